//! Independent reference computations for checking the engine.

use cageforge_core::cage::CoordinateMatrix;
use cageforge_core::fitting::SimilarityTransform;
use cageforge_core::mesh::TriangleMesh;
use nalgebra::{DMatrix, Matrix3, Point3, Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::Bound;

/// Dense least squares over the same energy: weighted template rows, pins and
/// the edge-vector shape term.
pub fn dense_oracle(
    b: &Bound,
    closeness: &[(usize, Point3<f64>, f64)],
    pins: &BTreeMap<usize, Point3<f64>>,
    pin_weight: f64,
    shape_weight: f64,
) -> DMatrix<f64> {
    let n = b.cage.vertex_count();
    let edges = b.cage.edges();
    let m = closeness.len() + pins.len() + edges.len();
    let mut a = DMatrix::zeros(m, n);
    let mut rhs = DMatrix::zeros(m, 3);
    let mut row = 0;
    for &(v, t, w) in closeness {
        for j in 0..n {
            a[(row, j)] = w.sqrt() * b.coords.vertex[(v, j)];
        }
        for k in 0..3 {
            rhs[(row, k)] = w.sqrt() * t[k];
        }
        row += 1;
    }
    for (&v, t) in pins {
        a[(row, v)] = pin_weight.sqrt();
        for k in 0..3 {
            rhs[(row, k)] = pin_weight.sqrt() * t[k];
        }
        row += 1;
    }
    for &[p, q] in edges {
        let s = shape_weight.sqrt();
        a[(row, p)] = s;
        a[(row, q)] = -s;
        let d = b.cage.position(p) - b.cage.position(q);
        for k in 0..3 {
            rhs[(row, k)] = s * d[k];
        }
        row += 1;
    }
    a.svd(true, true).solve(&rhs, 1e-14).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    *Rotation3::new(axis.normalize() * rng.random_range(0.0..std::f64::consts::PI)).matrix()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    (0..n).map(|_| Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)))).collect()
}

pub fn residual(src: &[Point3<f64>], dst: &[Point3<f64>], s: &SimilarityTransform<f64>) -> f64 {
    src.iter().zip(dst).map(|(x, y)| (s.apply(x) - y).norm_squared()).sum()
}

/// Best residual for a fixed rotation: optimal scale (non-negative) and translation are closed form.
pub fn residual_for_rotation(src: &[Point3<f64>], dst: &[Point3<f64>], r: &Matrix3<f64>) -> f64 {
    let n = src.len() as f64;
    let mx = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let my = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let (mut cross, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (x, y) in src.iter().zip(dst) {
        let (xc, yc) = (r * (x.coords - mx), y.coords - my);
        cross += xc.dot(&yc);
        xx += xc.norm_squared();
        yy += yc.norm_squared();
    }
    let s = (cross / xx).max(0.0);
    yy - 2.0 * s * cross + s * s * xx
}

/// Nelder-Mead over rotation vectors with random restarts.
pub fn brute_force_proper(src: &[Point3<f64>], dst: &[Point3<f64>], rng: &mut ChaCha8Rng) -> f64 {
    let f = |w: &Vector3<f64>| residual_for_rotation(src, dst, Rotation3::new(*w).matrix());
    let mut best = f64::INFINITY;
    for _ in 0..30 {
        let start = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        let mut simplex: Vec<(Vector3<f64>, f64)> = (0..4)
            .map(|i| {
                let mut p = start;
                if i > 0 {
                    p[i - 1] += 0.5;
                }
                (p, f(&p))
            })
            .collect();
        for _ in 0..4000 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[3].1 - simplex[0].1 < 1e-16 {
                break;
            }
            let centroid = (simplex[0].0 + simplex[1].0 + simplex[2].0) / 3.0;
            let worst = simplex[3];
            let reflect = centroid + (centroid - worst.0);
            let fr = f(&reflect);
            if fr < simplex[0].1 {
                let expand = centroid + (centroid - worst.0) * 2.0;
                let fe = f(&expand);
                simplex[3] = if fe < fr { (expand, fe) } else { (reflect, fr) };
            } else if fr < simplex[2].1 {
                simplex[3] = (reflect, fr);
            } else {
                let contract = centroid + (worst.0 - centroid) * 0.5;
                let fc = f(&contract);
                if fc < worst.1 {
                    simplex[3] = (contract, fc);
                } else {
                    let b0 = simplex[0].0;
                    for v in simplex.iter_mut().skip(1) {
                        v.0 = b0 + (v.0 - b0) * 0.5;
                        v.1 = f(&v.0);
                    }
                }
            }
        }
        best = best.min(simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min));
    }
    best
}

/// Parity of crossings along a fixed skew ray.
pub fn inside_by_ray(cage: &TriangleMesh<f64>, p: &Point3<f64>) -> bool {
    let dir = Vector3::new(0.5731, 0.3129, 0.7577).normalize();
    let mut hits = 0;
    for t in 0..cage.triangle_count() {
        let [a, b, c] = cage.triangle_points(t);
        let (e1, e2) = (b - a, c - a);
        let h = dir.cross(&e2);
        let det = e1.dot(&h);
        if det.abs() < 1e-14 {
            continue;
        }
        let s = p - a;
        let u = s.dot(&h) / det;
        let q = s.cross(&e1);
        let v = dir.dot(&q) / det;
        let dist = e2.dot(&q) / det;
        if u >= 0.0 && v >= 0.0 && u + v <= 1.0 && dist > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

/// Signed distance to the cage surface, negative inside.
pub fn signed_distance(cage: &TriangleMesh<f64>, p: &Point3<f64>) -> f64 {
    let d = (0..cage.triangle_count())
        .map(|t| {
            let [a, b, c] = cage.triangle_points(t);
            (cageforge_core::geom::closest_point_on_triangle(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min);
    if inside_by_ray(cage, p) {
        -d
    } else {
        d
    }
}

/// Relax every edge until nothing changes.
pub fn relaxed_distances(mesh: &TriangleMesh<f64>, from: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; mesh.vertex_count()];
    dist[from] = 0.0;
    loop {
        let mut changed = false;
        for &[a, b] in mesh.edges() {
            let len = (mesh.position(a) - mesh.position(b)).norm();
            for (u, v) in [(a, b), (b, a)] {
                if dist[u] + len < dist[v] {
                    dist[v] = dist[u] + len;
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Largest `|Σ w − 1|` and largest linear reproduction error over the rows.
pub fn mvc_row_errors(coords: &CoordinateMatrix<f64>, template: &TriangleMesh<f64>, cage: &TriangleMesh<f64>) -> (f64, f64) {
    let mut unity: f64 = 0.0;
    let mut linear: f64 = 0.0;
    for (i, x) in template.positions().iter().enumerate() {
        let row = coords.row(i);
        unity = unity.max((row.iter().sum::<f64>() - 1.0).abs());
        let r = row.iter().zip(cage.positions()).fold(Vector3::zeros(), |a, (w, c)| a + c.coords * *w);
        linear = linear.max((r - x.coords).norm());
    }
    (unity, linear)
}

pub fn transform(mesh: &TriangleMesh<f64>, a: &Matrix3<f64>, t: &Vector3<f64>) -> TriangleMesh<f64> {
    mesh.with_positions(mesh.positions().iter().map(|p| Point3::from(a * p.coords + t)).collect())
}

/// Summed triangle area by the cross-product formula.
pub fn summed_area(mesh: &TriangleMesh<f64>, tris: &[usize]) -> f64 {
    tris.iter()
        .map(|&t| {
            let [a, b, c] = mesh.triangle_points(t);
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .sum()
}
