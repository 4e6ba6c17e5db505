//! Green coordinates (Lipman, Levin and Cohen-Or) for interior points.

use nalgebra::{Point3, Vector3};

use super::CageError;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

/// Vertex coordinates `phi` and face coordinates `psi` of `x`.
pub fn gc_row<T: Real>(cage: &TriangleMesh<T>, x: &Point3<T>, vertex: usize) -> Result<(Vec<T>, Vec<T>), CageError> {
    let mut phi = vec![T::zero(); cage.vertex_count()];
    let mut psi = vec![T::zero(); cage.triangle_count()];
    let eps = T::lit(1e-12);
    for (t, tri) in cage.triangles().iter().enumerate() {
        let v: [Vector3<T>; 3] = [
            cage.position(tri[0]) - x,
            cage.position(tri[1]) - x,
            cage.position(tri[2]) - x,
        ];
        let cross = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let len = cross.norm();
        if len < eps {
            return Err(CageError::NumericalBreakdown {
                vertex,
                norm: len.as_f64(),
            });
        }
        let n = cross / len;
        let p = n * v[0].dot(&n);
        let mut s = [T::zero(); 3];
        let mut big_i = [T::zero(); 3];
        let mut big_ii = [T::zero(); 3];
        let mut big_n = [Vector3::zeros(); 3];
        let zero = Vector3::zeros();
        for l in 0..3 {
            let (a, b) = (v[l], v[(l + 1) % 3]);
            let side = (a - p).cross(&(b - p)).dot(&n);
            s[l] = if side > T::zero() {
                T::one()
            } else if side < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            big_i[l] = tri_int(&p, &a, &b);
            big_ii[l] = tri_int(&zero, &b, &a);
            let q = b.cross(&a);
            let qn = q.norm();
            if qn < eps {
                return Err(CageError::NumericalBreakdown {
                    vertex,
                    norm: qn.as_f64(),
                });
            }
            big_n[l] = q / qn;
        }
        let total = -(s[0] * big_i[0] + s[1] * big_i[1] + s[2] * big_i[2]).abs();
        psi[t] = -total;
        let w = n * total + big_n[0] * big_ii[0] + big_n[1] * big_ii[1] + big_n[2] * big_ii[2];
        if w.norm() > T::lit(1e-15) {
            for l in 0..3 {
                let nn = big_n[(l + 1) % 3];
                phi[tri[l]] += nn.dot(&w) / nn.dot(&v[l]);
            }
        }
    }
    if phi.iter().chain(&psi).any(|c| !c.is_finite()) {
        return Err(CageError::NumericalBreakdown { vertex, norm: f64::NAN });
    }
    Ok((phi, psi))
}

/// Integral over the triangle `(p, a, b)` used by the Green coordinate formulas,
/// with the evaluation point at the origin.
fn tri_int<T: Real>(p: &Vector3<T>, a: &Vector3<T>, b: &Vector3<T>) -> T {
    let ba = b - a;
    let pa = p - a;
    let ap = a - p;
    let bp = b - p;
    let tiny = T::lit(1e-14);
    let scale = ba.norm().max(ap.norm()).max(bp.norm());
    if ap.norm() <= tiny * scale || bp.norm() <= tiny * scale || ap.cross(&bp).norm() <= tiny * scale * scale {
        return T::zero();
    }
    let clamp = |x: T| x.max(-T::one()).min(T::one());
    let alpha = clamp(ba.dot(&pa) / (ba.norm() * pa.norm())).acos();
    let beta = clamp(ap.dot(&bp) / (ap.norm() * bp.norm())).acos();
    let sa = alpha.sin();
    let lambda = pa.norm_squared() * sa * sa;
    let c = p.norm_squared();
    let sqrt_c = c.sqrt();
    let sqrt_l = lambda.sqrt();
    let pi = T::pi();
    let two = T::lit(2.0);
    let eval = |theta: T| -> T {
        let (st, ct) = (theta.sin(), theta.cos());
        let sign = if st < T::zero() { -T::one() } else { T::one() };
        let first = two * sqrt_c * (sqrt_c * ct / (lambda + st * st * c).sqrt()).atan();
        let inner = T::one() - two * c * ct / (c * (T::one() + ct) + lambda + (lambda * lambda + lambda * c * st * st).sqrt());
        let second = sqrt_l * (two * sqrt_l * st * st / ((T::one() - ct) * (T::one() - ct)) * inner).ln();
        -sign / two * (first + second)
    };
    let i1 = eval(pi - alpha);
    let i2 = eval(pi - alpha - beta);
    -(i1 - i2 - sqrt_c * beta).abs() / (T::lit(4.0) * pi)
}

/// Per-face stretch factor of a deformed triangle relative to its rest shape.
pub fn stretch_factor<T: Real>(rest: [Point3<T>; 3], deformed: [Point3<T>; 3]) -> T {
    let u = rest[1] - rest[0];
    let v = rest[2] - rest[0];
    let ud = deformed[1] - deformed[0];
    let vd = deformed[2] - deformed[0];
    let area = u.cross(&v).norm() / T::lit(2.0);
    let num = ud.norm_squared() * v.norm_squared() - T::lit(2.0) * ud.dot(&vd) * u.dot(&v) + vd.norm_squared() * u.norm_squared();
    num.max(T::zero()).sqrt() / (T::lit(8.0).sqrt() * area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn reconstruct(cage: &TriangleMesh<f64>, phi: &[f64], psi: &[f64]) -> Vector3<f64> {
        let mut r = Vector3::zeros();
        for (c, w) in cage.positions().iter().zip(phi) {
            r += c.coords * *w;
        }
        for (t, w) in psi.iter().enumerate() {
            r += cage.triangle_normal(t) * *w;
        }
        r
    }

    #[test]
    fn rest_reproduction_in_cube() {
        let cage: TriangleMesh<f64> = primitives::cube();
        for p in [Point3::new(0.5, 0.5, 0.5), Point3::new(0.2, 0.7, 0.4), Point3::new(0.9, 0.1, 0.05)] {
            let (phi, psi) = gc_row(&cage, &p, 0).unwrap();
            assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-10, "{phi:?}");
            assert!((reconstruct(&cage, &phi, &psi) - p.coords).norm() < 1e-10);
        }
    }

    #[test]
    fn stretch_of_similar_triangle() {
        let a: [Point3<f64>; 3] = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.3, 0.8, 0.0)];
        assert!((stretch_factor(a, a) - 1.0).abs() < 1e-14);
        let b = a.map(|p| Point3::from(p.coords * 2.5));
        assert!((stretch_factor(a, b) - 2.5).abs() < 1e-12);
    }
}
