//! Approximate medial axis of a planar slice from the Voronoi diagram of
//! resampled boundary points, pruned by the angle the defining samples
//! subtend at each Voronoi vertex.

use std::collections::HashMap;

use nalgebra::{Point2, Vector2};

use super::slice::PlaneSlice;
use super::MeshError;
use crate::scalar::Real;

pub type Segment2<T> = [Point2<T>; 2];

/// Medial-axis segments in plane coordinates.
///
/// Voronoi vertices whose disk radius is within three sampling steps are
/// discarded as sampling noise. A retained Voronoi vertex with no retained edge is reported as a
/// zero-length segment `[p, p]`.
pub fn approximate_medial_axis<T: Real>(
    slice: &PlaneSlice<T>,
    step: T,
    pruning_deg: T,
) -> Result<Vec<Segment2<T>>, MeshError> {
    if !(step > T::zero()) {
        return Err(MeshError::Precondition("sampling step must be positive".into()));
    }
    let loops = slice.loops_2d();
    if loops.is_empty() {
        return Err(MeshError::NoClosedLoop);
    }
    medial_axis_2d(&loops, step, pruning_deg)
}

pub fn medial_axis_2d<T: Real>(loops: &[Vec<Point2<T>>], step: T, pruning_deg: T) -> Result<Vec<Segment2<T>>, MeshError> {
    for (i, l) in loops.iter().enumerate() {
        if l.len() < 3 {
            return Err(MeshError::DegenerateLoop(format!("loop {i} has fewer than 3 points")));
        }
    }
    check_simple(loops)?;
    let threshold = pruning_deg * T::pi() / T::lit(180.0);

    let mut samples = Vec::new();
    for l in loops {
        samples.extend(resample(l, step));
    }
    // deterministic sub-resolution jitter keeps co-circular samples out of in-circle ties
    let jitter = step * T::lit(1e-9);
    for (i, s) in samples.iter_mut().enumerate() {
        let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let a = T::lit(((h >> 11) as f64) / ((1u64 << 53) as f64) * std::f64::consts::TAU);
        s.x += jitter * a.cos();
        s.y += jitter * a.sin();
    }

    let tris = delaunay(&samples);

    // Voronoi vertices inside the region, merged when they coincide
    let merge_tol = step * T::lit(1e-6);
    // disks this small are artefacts of the sampling around convex corners
    let noise = step * T::lit(3.0);
    let mut vertex_of_tri = vec![usize::MAX; tris.len()];
    let mut centers: Vec<Point2<T>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        let Some(c) = circumcenter(&samples[tri[0]], &samples[tri[1]], &samples[tri[2]]) else {
            continue;
        };
        if !inside(loops, &c) {
            continue;
        }
        let cell = (
            (c.x / merge_tol).floor().to_f64().unwrap_or(0.0) as i64,
            (c.y / merge_tol).floor().to_f64().unwrap_or(0.0) as i64,
        );
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(cell.0 + dx, cell.1 + dy)) {
                    for &id in ids {
                        if (centers[id] - c).norm() <= merge_tol {
                            found = Some(id);
                            break 'search;
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                centers.push(c);
                members.push(Vec::new());
                grid.entry(cell).or_default().push(centers.len() - 1);
                centers.len() - 1
            }
        };
        for &s in tri {
            if !members[id].contains(&s) {
                members[id].push(s);
            }
        }
        vertex_of_tri[t] = id;
    }

    let angle = |center: &Point2<T>, a: usize, b: usize| -> T {
        let u: Vector2<T> = samples[a] - center;
        let v: Vector2<T> = samples[b] - center;
        let cross = u.x * v.y - u.y * v.x;
        cross.abs().atan2(u.dot(&v))
    };
    let retained: Vec<bool> = (0..centers.len())
        .map(|id| {
            let m = &members[id];
            let mut best = T::zero();
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    best = best.max(angle(&centers[id], m[i], m[j]));
                }
            }
            let radius = (samples[m[0]] - centers[id]).norm();
            best >= threshold && radius > noise
        })
        .collect();

    // Voronoi edges are dual to Delaunay edges shared by two triangles
    let mut by_edge: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = if a < b { [a, b] } else { [b, a] };
            by_edge.entry(key).or_default().push(t);
        }
    }
    let mut keys: Vec<&[usize; 2]> = by_edge.keys().collect();
    keys.sort_unstable();
    let mut out = Vec::new();
    let mut has_edge = vec![false; centers.len()];
    let mut seen = std::collections::HashSet::new();
    for key in keys {
        let ts = &by_edge[key];
        if ts.len() != 2 {
            continue;
        }
        let (p, q) = (vertex_of_tri[ts[0]], vertex_of_tri[ts[1]]);
        if p == usize::MAX || q == usize::MAX || p == q || !retained[p] || !retained[q] {
            continue;
        }
        if angle(&centers[p], key[0], key[1]) < threshold || angle(&centers[q], key[0], key[1]) < threshold {
            continue;
        }
        let pair = if p < q { (p, q) } else { (q, p) };
        if seen.insert(pair) {
            out.push([centers[pair.0], centers[pair.1]]);
            has_edge[p] = true;
            has_edge[q] = true;
        }
    }
    for id in 0..centers.len() {
        if retained[id] && !has_edge[id] {
            out.push([centers[id], centers[id]]);
        }
    }
    Ok(out)
}

fn resample<T: Real>(l: &[Point2<T>], step: T) -> Vec<Point2<T>> {
    let n = l.len();
    let lens: Vec<T> = (0..n).map(|i| (l[(i + 1) % n] - l[i]).norm()).collect();
    let total = lens.iter().fold(T::zero(), |a, b| a + *b);
    let count = (total / step).ceil().to_f64().unwrap_or(3.0).max(3.0) as usize;
    let spacing = total / T::from_count(count);
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    let mut start = T::zero();
    for k in 0..count {
        let s = spacing * T::from_count(k);
        while seg + 1 < n && start + lens[seg] < s {
            start += lens[seg];
            seg += 1;
        }
        let t = if lens[seg] > T::zero() {
            ((s - start) / lens[seg]).min(T::one())
        } else {
            T::zero()
        };
        out.push(l[seg] + (l[(seg + 1) % n] - l[seg]) * t);
    }
    out
}

fn orient<T: Real>(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross<T: Real>(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>, d: &Point2<T>) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    let on = |p: &Point2<T>, q: &Point2<T>, r: &Point2<T>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == z && on(c, d, a)) || (d2 == z && on(c, d, b)) || (d3 == z && on(a, b, c)) || (d4 == z && on(a, b, d))
}

/// Rejects loops whose edges intersect other than at shared endpoints.
fn check_simple<T: Real>(loops: &[Vec<Point2<T>>]) -> Result<(), MeshError> {
    let mut edges = Vec::new();
    for (li, l) in loops.iter().enumerate() {
        let n = l.len();
        for i in 0..n {
            edges.push((li, i, n, l[i], l[(i + 1) % n]));
        }
    }
    for x in 0..edges.len() {
        for y in x + 1..edges.len() {
            let (la, ia, na, a0, a1) = edges[x];
            let (lb, ib, _, b0, b1) = edges[y];
            if la == lb && (ib == (ia + 1) % na || ia == (ib + 1) % na) {
                continue;
            }
            if segments_cross(&a0, &a1, &b0, &b1) {
                return Err(MeshError::DegenerateLoop(format!(
                    "edge {ia} of loop {la} intersects edge {ib} of loop {lb}"
                )));
            }
        }
    }
    Ok(())
}

/// Even-odd point-in-region test over all loops.
fn inside<T: Real>(loops: &[Vec<Point2<T>>], p: &Point2<T>) -> bool {
    let mut odd = false;
    for l in loops {
        let n = l.len();
        for i in 0..n {
            let (a, b) = (l[i], l[(i + 1) % n]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    odd = !odd;
                }
            }
        }
    }
    odd
}

fn circumcenter<T: Real>(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>) -> Option<Point2<T>> {
    let b2 = b - a;
    let c2 = c - a;
    let d = T::lit(2.0) * (b2.x * c2.y - b2.y * c2.x);
    if d == T::zero() {
        return None;
    }
    let bb = b2.norm_squared();
    let cc = c2.norm_squared();
    let ux = (c2.y * bb - b2.y * cc) / d;
    let uy = (b2.x * cc - c2.x * bb) / d;
    Some(Point2::new(a.x + ux, a.y + uy))
}

/// Bowyer–Watson triangulation; triangles touching the super-triangle are dropped.
fn delaunay<T: Real>(points: &[Point2<T>]) -> Vec<[usize; 3]> {
    let n = points.len();
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(T::lit(1e-12));
    let mid = nalgebra::center(&lo, &hi);
    let big = span * T::lit(20.0);
    let mut pts = points.to_vec();
    pts.push(Point2::new(mid.x - big, mid.y - big));
    pts.push(Point2::new(mid.x + big, mid.y - big));
    pts.push(Point2::new(mid.x, mid.y + big));

    struct Tri<T: Real> {
        v: [usize; 3],
        c: Point2<T>,
        r2: T,
    }
    let make = |v: [usize; 3], pts: &[Point2<T>]| -> Tri<T> {
        let (a, b, c) = (pts[v[0]], pts[v[1]], pts[v[2]]);
        // counter-clockwise storage
        let v = if orient(&a, &b, &c) < T::zero() { [v[0], v[2], v[1]] } else { v };
        let cc = circumcenter(&a, &b, &c).unwrap_or(a);
        Tri {
            v,
            c: cc,
            r2: (a - cc).norm_squared(),
        }
    };
    let mut tris = vec![make([n, n + 1, n + 2], &pts)];
    for i in 0..n {
        let p = pts[i];
        let mut bad = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            if (p - tri.c).norm_squared() < tri.r2 {
                bad.push(t);
            }
        }
        let mut boundary: HashMap<[usize; 2], usize> = HashMap::new();
        for &t in &bad {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let key = if a < b { [a, b] } else { [b, a] };
                *boundary.entry(key).or_insert(0) += 1;
            }
        }
        let mut cavity: Vec<[usize; 2]> = Vec::new();
        for &t in &bad {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let key = if a < b { [a, b] } else { [b, a] };
                if boundary[&key] == 1 {
                    cavity.push([a, b]);
                }
            }
        }
        bad.sort_unstable();
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for [a, b] in cavity {
            if orient(&pts[a], &pts[b], &p) != T::zero() {
                tris.push(make([a, b, i], &pts));
            }
        }
    }
    tris.into_iter().filter(|t| t.v.iter().all(|&v| v < n)).map(|t| t.v).collect()
}
