//! Small geometric primitives used across modules.

use nalgebra::{Point3, Rotation3, Unit, Vector3};

use crate::scalar::Real;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn empty() -> Self {
        let big = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
        Self {
            min: Point3::new(big, big, big),
            max: Point3::new(-big, -big, -big),
        }
    }

    pub fn from_points<'a, I>(points: I) -> Self
    where
        I: IntoIterator<Item = &'a Point3<T>>,
    {
        let mut bb = Self::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Point3<T>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    /// Length of the box diagonal; zero for an empty box.
    pub fn diagonal(&self) -> T {
        if self.is_empty() {
            T::zero()
        } else {
            (self.max - self.min).norm()
        }
    }

    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Squared distance from a point to the box (zero inside).
    pub fn distance_squared(&self, p: &Point3<T>) -> T {
        let mut d = T::zero();
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                T::zero()
            };
            d += v * v;
        }
        d
    }
}

/// Unnormalized normal (twice-area vector) of a triangle.
#[inline]
pub fn triangle_cross<T: Real>(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> Vector3<T> {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area<T: Real>(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> T {
    triangle_cross(a, b, c).norm() * T::lit(0.5)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle<T: Real>(
    p: &Point3<T>,
    a: &Point3<T>,
    b: &Point3<T>,
    c: &Point3<T>,
) -> Point3<T> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= T::zero() && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= T::zero() && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Signed solid angle subtended by triangle `abc` at `p` (Van Oosterom & Strackee).
pub fn solid_angle<T: Real>(p: &Point3<T>, a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> T {
    let ra = a - p;
    let rb = b - p;
    let rc = c - p;
    let la = ra.norm();
    let lb = rb.norm();
    let lc = rc.norm();
    let num = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + ra.dot(&rc) * lb + rb.dot(&rc) * la;
    T::lit(2.0) * num.atan2(den)
}

/// Two unit vectors completing `n` to a right-handed orthonormal frame `(u, v, n)`.
pub fn plane_basis<T: Real>(n: &Vector3<T>) -> (Vector3<T>, Vector3<T>) {
    let n = n.normalize();
    let helper = if n.x.abs() < T::lit(0.9) {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = helper.cross(&n).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Rotation by `angle` radians about `axis` (need not be unit length).
pub fn axis_angle<T: Real>(axis: &Vector3<T>, angle: T) -> Rotation3<T> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle)
}
