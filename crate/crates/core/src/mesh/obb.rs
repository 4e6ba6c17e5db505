//! Principal-component oriented bounding boxes.
//!
//! The box axes are the eigenvectors of the point covariance and the extents
//! are tight along them. This is a heuristic: the box is not guaranteed to
//! have minimal volume, nor even to be smaller than the axis-aligned box.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::Serialize;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrientedBoundingBox<T: Real> {
    pub center: [T; 3],
    /// Right-handed orthonormal axes ordered by decreasing variance.
    pub axes: [[T; 3]; 3],
    pub half_extents: [T; 3],
}

impl<T: Real> OrientedBoundingBox<T> {
    pub fn axis(&self, k: usize) -> Vector3<T> {
        Vector3::from(self.axes[k])
    }

    pub fn center_point(&self) -> Point3<T> {
        Point3::from(self.center)
    }

    /// Whether `p` lies within the box enlarged by `tol` along every axis.
    pub fn contains(&self, p: &Point3<T>, tol: T) -> bool {
        let d = p - self.center_point();
        (0..3).all(|k| self.axis(k).dot(&d).abs() <= self.half_extents[k] + tol)
    }

    pub fn volume(&self) -> T {
        T::lit(8.0) * self.half_extents[0] * self.half_extents[1] * self.half_extents[2]
    }
}

/// # Panics
/// If `points` is empty.
pub fn compute_obb<T: Real>(points: &[Point3<T>]) -> OrientedBoundingBox<T> {
    assert!(!points.is_empty(), "compute_obb needs at least one point");
    let n = T::from_count(points.len());
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| crate::scalar::cmp(&eig.eigenvalues[b], &eig.eigenvalues[a]).then(a.cmp(&b)));
    let a0: Vector3<T> = eig.eigenvectors.column(order[0]).into_owned().normalize();
    let mut a1: Vector3<T> = eig.eigenvectors.column(order[1]).into_owned();
    a1 = (a1 - a0 * a0.dot(&a1)).normalize();
    let a2 = a0.cross(&a1);
    let axes = [a0, a1, a2];

    let mut lo = [T::zero(); 3];
    let mut hi = [T::zero(); 3];
    for (k, axis) in axes.iter().enumerate() {
        let mut first = true;
        for p in points {
            let s = axis.dot(&(p.coords - mean));
            if first {
                lo[k] = s;
                hi[k] = s;
                first = false;
            } else {
                lo[k] = lo[k].min(s);
                hi[k] = hi[k].max(s);
            }
        }
    }
    let half = T::lit(0.5);
    let mut center = mean;
    for k in 0..3 {
        center += axes[k] * ((lo[k] + hi[k]) * half);
    }
    OrientedBoundingBox {
        center: [center.x, center.y, center.z],
        axes: axes.map(|a| [a.x, a.y, a.z]),
        half_extents: [0, 1, 2].map(|k| (hi[k] - lo[k]) * half),
    }
}
