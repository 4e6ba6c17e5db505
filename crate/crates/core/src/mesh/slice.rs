//! Plane cross-sections of a mesh and their shape descriptors.

use std::collections::HashMap;

use nalgebra::{Point2, Point3, Vector2, Vector3};
use serde::Serialize;

use super::{edge_key, MeshError, TriangleMesh};
use crate::geom;
use crate::scalar::Real;

/// Plane `normal · p = offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T: Real> {
    pub normal: Vector3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    /// Normalizes `normal`; the offset is interpreted against the normalized vector.
    pub fn new(normal: Vector3<T>, offset: T) -> Result<Self, MeshError> {
        let len = normal.norm();
        if !(len > T::zero()) || !len.is_finite() {
            return Err(MeshError::Precondition("plane normal must be nonzero".into()));
        }
        Ok(Self {
            normal: normal / len,
            offset,
        })
    }

    pub fn through(point: &Point3<T>, normal: Vector3<T>) -> Result<Self, MeshError> {
        let n = Self::new(normal, T::zero())?.normal;
        Ok(Self {
            normal: n,
            offset: n.dot(&point.coords),
        })
    }

    pub fn signed_distance(&self, p: &Point3<T>) -> T {
        self.normal.dot(&p.coords) - self.offset
    }

    /// In-plane right-handed basis `(u, v)` with `u × v = normal`.
    pub fn basis(&self) -> (Vector3<T>, Vector3<T>) {
        geom::plane_basis(&self.normal)
    }

    pub fn origin(&self) -> Point3<T> {
        Point3::from(self.normal * self.offset)
    }

    pub fn to_plane(&self, p: &Point3<T>) -> Point2<T> {
        let (u, v) = self.basis();
        let d = p - self.origin();
        Point2::new(u.dot(&d), v.dot(&d))
    }

    pub fn from_plane(&self, q: &Point2<T>) -> Point3<T> {
        let (u, v) = self.basis();
        self.origin() + u * q.x + v * q.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSlice<T: Real> {
    pub plane: Plane<T>,
    /// Closed polylines; the closing segment is implicit.
    pub loops: Vec<Vec<Point3<T>>>,
    /// Open polylines, only produced by meshes with boundary.
    pub chains: Vec<Vec<Point3<T>>>,
}

impl<T: Real> PlaneSlice<T> {
    pub fn from_loops(plane: Plane<T>, loops: Vec<Vec<Point3<T>>>) -> Self {
        Self {
            plane,
            loops,
            chains: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty() && self.chains.is_empty()
    }

    /// Loops expressed in plane coordinates.
    pub fn loops_2d(&self) -> Vec<Vec<Point2<T>>> {
        self.loops
            .iter()
            .map(|l| l.iter().map(|p| self.plane.to_plane(p)).collect())
            .collect()
    }
}

/// Intersect a mesh with a plane.
///
/// Loops are oriented so that, seen from the side the normal points to,
/// outer boundaries of a closed outward-oriented mesh run counter-clockwise
/// and holes clockwise.
pub fn slice_by_plane<T: Real>(mesh: &TriangleMesh<T>, plane: &Plane<T>) -> PlaneSlice<T> {
    let eps = mesh.diagonal() * T::lit(1e-12);
    let dist: Vec<T> = mesh
        .positions()
        .iter()
        .map(|p| {
            let d = plane.signed_distance(p);
            if d == T::zero() {
                eps
            } else {
                d
            }
        })
        .collect();
    let pos = |v: usize| -> Point3<T> {
        let p = mesh.positions()[v];
        if plane.signed_distance(&p) == T::zero() {
            p + plane.normal * eps
        } else {
            p
        }
    };

    let mut points: HashMap<[usize; 2], Point3<T>> = HashMap::new();
    let mut crossing = |a: usize, b: usize| -> [usize; 2] {
        let key = edge_key(a, b);
        points.entry(key).or_insert_with(|| {
            let (pa, pb) = (pos(key[0]), pos(key[1]));
            let (da, db) = (dist[key[0]], dist[key[1]]);
            let t = da / (da - db);
            let p = pa + (pb - pa) * t;
            p - plane.normal * plane.signed_distance(&p)
        });
        key
    };

    // one segment per crossing triangle, with the preferred travel direction n × N
    let mut segments: Vec<([usize; 2], [usize; 2], Vector3<T>)> = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if (dist[a] > T::zero()) != (dist[b] > T::zero()) {
                ends.push(crossing(a, b));
            }
        }
        if ends.len() == 2 {
            let pref = plane.normal.cross(&mesh.triangle_normal(t));
            segments.push((ends[0], ends[1], pref));
        }
    }

    let mut incident: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (s, (a, b, _)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(s);
        incident.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    let mut chains = Vec::new();

    let walk = |start_seg: usize, start_key: [usize; 2], used: &mut Vec<bool>| {
        let mut keys = vec![start_key];
        let mut score = T::zero();
        let mut seg = start_seg;
        let mut cur = start_key;
        loop {
            used[seg] = true;
            let (a, b, pref) = segments[seg];
            let next = if a == cur { b } else { a };
            score += (points[&next] - points[&cur]).dot(&pref);
            if next == start_key {
                return (keys, score, true);
            }
            keys.push(next);
            cur = next;
            match incident[&cur].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (keys, score, false),
            }
        }
    };

    // open chains first, starting from dangling endpoints in key order
    let mut dangling: Vec<[usize; 2]> = incident
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(k, _)| *k)
        .collect();
    dangling.sort_unstable();
    for key in dangling {
        let s = incident[&key][0];
        if used[s] {
            continue;
        }
        let (mut keys, score, _) = walk(s, key, &mut used);
        if score < T::zero() {
            keys.reverse();
        }
        chains.push(keys.iter().map(|k| points[k]).collect());
    }
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let start = segments[s].0;
        let (mut keys, score, closed) = walk(s, start, &mut used);
        if score < T::zero() {
            keys.reverse();
            if closed {
                keys.rotate_right(1);
            }
        }
        let pts: Vec<Point3<T>> = keys.iter().map(|k| points[k]).collect();
        if closed {
            loops.push(pts);
        } else {
            chains.push(pts);
        }
    }

    PlaneSlice {
        plane: *plane,
        loops,
        chains,
    }
}

/// Oriented rectangle in the slice plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarBox<T: Real> {
    pub center: [T; 2],
    pub axes: [[T; 2]; 2],
    pub half_extents: [T; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceDescriptors<T: Real> {
    pub perimeter: T,
    pub area: T,
    pub centroid: [T; 3],
    pub obb: PlanarBox<T>,
}

pub fn signed_area_2d<T: Real>(pts: &[Point2<T>]) -> T {
    let n = pts.len();
    let mut acc = T::zero();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    acc * T::lit(0.5)
}

fn centroid_2d<T: Real>(pts: &[Point2<T>]) -> (T, Vector2<T>) {
    let n = pts.len();
    let mut a2 = T::zero();
    let mut c = Vector2::zeros();
    // relative to the first point for conditioning
    let o = pts[0].coords;
    for i in 0..n {
        let p = pts[i].coords - o;
        let q = pts[(i + 1) % n].coords - o;
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        c += (p + q) * cross;
    }
    let area = a2 * T::lit(0.5);
    if a2 == T::zero() {
        let mean = pts.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / T::from_count(n);
        return (area, mean);
    }
    (area, o + c / (T::lit(3.0) * a2))
}

fn closed_length<T: Real>(pts: &[Point3<T>]) -> T {
    let n = pts.len();
    (0..n).fold(T::zero(), |acc, i| acc + (pts[(i + 1) % n] - pts[i]).norm())
}

/// 2D principal-axis box of a point set.
pub fn planar_obb<T: Real>(pts: &[Point2<T>]) -> PlanarBox<T> {
    let n = T::from_count(pts.len().max(1));
    let mean = pts.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / n;
    let (mut cxx, mut cxy, mut cyy) = (T::zero(), T::zero(), T::zero());
    for p in pts {
        let d = p.coords - mean;
        cxx += d.x * d.x;
        cxy += d.x * d.y;
        cyy += d.y * d.y;
    }
    let theta = (T::lit(2.0) * cxy).atan2(cxx - cyy) * T::lit(0.5);
    let a0 = Vector2::new(theta.cos(), theta.sin());
    let a1 = Vector2::new(-a0.y, a0.x);
    let mut lo = [T::zero(); 2];
    let mut hi = [T::zero(); 2];
    for (k, axis) in [a0, a1].iter().enumerate() {
        let mut first = true;
        for p in pts {
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
    let center = mean + a0 * ((lo[0] + hi[0]) * half) + a1 * ((lo[1] + hi[1]) * half);
    PlanarBox {
        center: [center.x, center.y],
        axes: [[a0.x, a0.y], [a1.x, a1.y]],
        half_extents: [(hi[0] - lo[0]) * half, (hi[1] - lo[1]) * half],
    }
}

/// Perimeter, area (holes subtracted), area-weighted centroid and in-plane box.
pub fn slice_descriptors<T: Real>(slice: &PlaneSlice<T>) -> Result<SliceDescriptors<T>, MeshError> {
    let loops: Vec<Vec<Point2<T>>> = slice.loops_2d().into_iter().filter(|l| l.len() >= 3).collect();
    if loops.is_empty() {
        return Err(MeshError::NoClosedLoop);
    }
    let parts: Vec<(T, Vector2<T>)> = loops.iter().map(|l| centroid_2d(l)).collect();
    // the loop of largest magnitude fixes which orientation counts as solid
    let dominant = parts
        .iter()
        .map(|(a, _)| *a)
        .fold(T::zero(), |best, a| if a.abs() > best.abs() { a } else { best });
    let sign = if dominant < T::zero() { -T::one() } else { T::one() };
    let mut area = T::zero();
    let mut moment = Vector2::zeros();
    for (a, c) in &parts {
        area += *a * sign;
        moment += c * (*a * sign);
    }
    let c2 = if area != T::zero() {
        moment / area
    } else {
        parts[0].1
    };
    let centroid = slice.plane.from_plane(&Point2::from(c2));
    let perimeter = slice.loops.iter().fold(T::zero(), |acc, l| acc + closed_length(l));
    let all: Vec<Point2<T>> = loops.iter().flatten().copied().collect();
    Ok(SliceDescriptors {
        perimeter,
        area,
        centroid: [centroid.x, centroid.y, centroid.z],
        obb: planar_obb(&all),
    })
}
