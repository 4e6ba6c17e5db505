//! Mean value coordinates for closed triangle cages (Ju, Schaefer and Warren).

use nalgebra::{Matrix3, Point3, Vector3};

use super::CageError;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

/// Mean value weights of `x` with respect to `cage`, normalized to sum 1.
///
/// A point within `eps` of a cage vertex gets that vertex's indicator row; a
/// point on a cage triangle gets its planar barycentric coordinates.
pub fn mvc_row<T: Real>(cage: &TriangleMesh<T>, x: &Point3<T>, vertex: usize) -> Result<Vec<T>, CageError> {
    let n = cage.vertex_count();
    let scale = cage.diagonal();
    let eps = T::lit(1e-12) * scale;
    let mut d = vec![T::zero(); n];
    let mut u = vec![Vector3::zeros(); n];
    for (j, c) in cage.positions().iter().enumerate() {
        let diff = c - x;
        let dj = diff.norm();
        if dj < eps {
            let mut row = vec![T::zero(); n];
            row[j] = T::one();
            return Ok(row);
        }
        d[j] = dj;
        u[j] = diff / dj;
    }

    let two = T::lit(2.0);
    let tiny = T::lit(1e-12);
    let face_eps = T::lit(1e-10) * scale;
    let mut w = vec![T::zero(); n];
    for tri in cage.triangles() {
        let ids = *tri;
        if let Some(bary) = on_triangle(cage, ids, x, face_eps) {
            let mut row = vec![T::zero(); n];
            for i in 0..3 {
                row[ids[i]] += bary[i];
            }
            return Ok(row);
        }
        let mut theta = [T::zero(); 3];
        for i in 0..3 {
            let l = (u[ids[(i + 1) % 3]] - u[ids[(i + 2) % 3]]).norm();
            theta[i] = two * (l / two).min(T::one()).asin();
        }
        let h = (theta[0] + theta[1] + theta[2]) / two;
        let det = Matrix3::from_columns(&[u[ids[0]], u[ids[1]], u[ids[2]]]).determinant();
        let sign = if det < T::zero() { -T::one() } else { T::one() };
        let mut c = [T::zero(); 3];
        let mut s = [T::zero(); 3];
        let mut degenerate = false;
        for i in 0..3 {
            let denom = theta[(i + 1) % 3].sin() * theta[(i + 2) % 3].sin();
            c[i] = two * h.sin() * (h - theta[i]).sin() / denom - T::one();
            let ci = c[i].max(-T::one()).min(T::one());
            s[i] = sign * (T::one() - ci * ci).sqrt();
            if s[i].abs() <= tiny || !c[i].is_finite() {
                degenerate = true;
            }
        }
        if degenerate {
            // x is on the triangle's plane but outside it
            continue;
        }
        for i in 0..3 {
            let (ip, im) = ((i + 1) % 3, (i + 2) % 3);
            let num = theta[i] - c[ip] * theta[im] - c[im] * theta[ip];
            w[ids[i]] += num / (d[ids[i]] * theta[ip].sin() * s[im]);
        }
    }
    let total = w.iter().fold(T::zero(), |a, &b| a + b);
    if !(total.abs() >= T::lit(1e-12)) || !total.is_finite() {
        return Err(CageError::NumericalBreakdown {
            vertex,
            norm: total.abs().as_f64(),
        });
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Barycentric coordinates of `x` if it lies on triangle `ids` within `eps`.
fn on_triangle<T: Real>(cage: &TriangleMesh<T>, ids: [usize; 3], x: &Point3<T>, eps: T) -> Option<[T; 3]> {
    let [a, b, c] = ids.map(|i| *cage.position(i));
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm();
    if area2 <= T::zero() || (x - a).dot(&n).abs() > eps * area2 {
        return None;
    }
    let lam = [(c - b).cross(&(x - b)).dot(&n), (a - c).cross(&(x - c)).dot(&n), (b - a).cross(&(x - a)).dot(&n)]
        .map(|v| v / (area2 * area2));
    let slack = eps / area2.sqrt();
    if lam.iter().any(|&l| l < -slack) {
        return None;
    }
    let clamped = lam.map(|l| l.max(T::zero()));
    let total = clamped[0] + clamped[1] + clamped[2];
    Some(clamped.map(|l| l / total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn centroid_of_regular_tetrahedron() {
        let cage: TriangleMesh<f64> = primitives::tetrahedron();
        let c = cage.positions().iter().fold(Vector3::zeros(), |a, p| a + p.coords) / 4.0;
        let row = mvc_row(&cage, &Point3::from(c), 0).unwrap();
        for w in row {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn on_vertex_and_on_face() {
        let cage: TriangleMesh<f64> = primitives::cube();
        let row = mvc_row(&cage, cage.position(5), 0).unwrap();
        assert_eq!(row[5], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
        let p = Point3::new(0.25, 0.5, 0.0);
        let row = mvc_row(&cage, &p, 0).unwrap();
        let rec = cage.positions().iter().zip(&row).fold(Vector3::zeros(), |a, (c, w)| a + c.coords * *w);
        assert!((rec - p.coords).norm() < 1e-12);
    }

    #[test]
    fn on_face_diagonal_touches_only_its_endpoints() {
        let cage: TriangleMesh<f64> = primitives::cube();
        let [a, b] = *cage
            .edges()
            .iter()
            .find(|e| cage.position(e[0]).z == 0.0 && cage.position(e[1]).z == 0.0 && cage.edge_length(e[0], e[1]) > 1.1)
            .unwrap();
        let mid = Point3::from((cage.position(a).coords + cage.position(b).coords) / 2.0);
        let row = mvc_row(&cage, &mid, 0).unwrap();
        for (j, w) in row.iter().enumerate() {
            let expected = if j == a || j == b { 0.5 } else { 0.0 };
            assert!((w - expected).abs() < 1e-15, "{j}: {w}");
        }
    }
}
