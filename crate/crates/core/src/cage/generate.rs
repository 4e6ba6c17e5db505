//! Offset-surface cage generation: sample the template's distance on a grid,
//! extract an outer offset surface, then decimate it with quadric edge
//! collapses that keep the surface manifold and of unchanged genus.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use nalgebra::{Matrix3, Matrix4, Point3, Vector3, Vector4};

use super::{enclosure_violations, CageError};
use crate::mesh::{SurfaceIndex, TriangleMesh};
use crate::scalar::{self, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CageOptions<T: Real> {
    /// Offset distance as a fraction of a tenth of the template's bounding-box diagonal.
    pub offset_fraction: T,
    pub target_faces: usize,
    /// Grid cells spanning the offset distance (at least 3).
    pub cells_per_offset: usize,
}

impl<T: Real> Default for CageOptions<T> {
    fn default() -> Self {
        Self {
            offset_fraction: T::lit(0.55),
            target_faces: 200,
            cells_per_offset: 3,
        }
    }
}

/// A generated cage and the template vertices it fails to strictly enclose.
#[derive(Debug, Clone)]
pub struct GeneratedCage<T: Real> {
    pub cage: TriangleMesh<T>,
    pub violations: Vec<usize>,
}

pub fn generate_cage<T: Real>(template: &TriangleMesh<T>, options: &CageOptions<T>) -> Result<GeneratedCage<T>, CageError> {
    if !(options.offset_fraction > T::zero()) {
        return Err(CageError::Precondition("offset fraction must be positive".into()));
    }
    if options.target_faces < 4 {
        return Err(CageError::Precondition("target face count must be at least 4".into()));
    }
    if !template.is_closed() || template.triangle_count() == 0 {
        return Err(CageError::Precondition("template must be a closed manifold".into()));
    }
    let genus = template
        .genus()
        .ok_or_else(|| CageError::Precondition("template is not orientable".into()))?;
    let offset = options.offset_fraction * template.diagonal() / T::lit(10.0);
    let cells = options.cells_per_offset.max(3);
    let surface = offset_surface(template, offset, offset / T::from_count(cells))?;
    let surface_genus = surface.genus().unwrap_or(usize::MAX);
    if surface_genus != genus {
        return Err(CageError::TopologyChange {
            template: genus,
            cage: surface_genus,
        });
    }
    let cage = decimate(&surface, options.target_faces)?;
    let cage_genus = cage.genus().unwrap_or(usize::MAX);
    if cage_genus != genus {
        return Err(CageError::TopologyChange {
            template: genus,
            cage: cage_genus,
        });
    }
    let violations = enclosure_violations(&cage, template);
    if !violations.is_empty() {
        log::warn!("generated cage does not strictly enclose template vertices {violations:?}");
    }
    Ok(GeneratedCage { cage, violations })
}

struct Grid<T: Real> {
    origin: Point3<T>,
    h: T,
    dims: [usize; 3],
}

impl<T: Real> Grid<T> {
    fn id(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    fn point(&self, id: usize) -> Point3<T> {
        let i = id % self.dims[0];
        let j = (id / self.dims[0]) % self.dims[1];
        let k = id / (self.dims[0] * self.dims[1]);
        self.origin + Vector3::new(T::from_count(i), T::from_count(j), T::from_count(k)) * self.h
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }
}

/// Closed surface at distance `offset` outside the template, by marching
/// tetrahedra over a grid of spacing `h`.
pub fn offset_surface<T: Real>(template: &TriangleMesh<T>, offset: T, h: T) -> Result<TriangleMesh<T>, CageError> {
    let bb = template.bounding_box();
    let pad = offset + h * T::lit(2.0);
    let origin = bb.min - Vector3::repeat(pad);
    let span = bb.extent() + Vector3::repeat(pad * T::lit(2.0));
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = (span[a] / h).ceil().to_usize().unwrap_or(1) + 1;
    }
    let grid = Grid { origin, h, dims };
    if grid.len() > 40_000_000 {
        return Err(CageError::Precondition(format!("sampling grid too large: {dims:?}")));
    }

    let index = SurfaceIndex::new(template);
    let mut value: Vec<T> = super::par_rows(grid.len(), |id| {
        let d = index.closest_point(&grid.point(id)).map(|s| s.distance).unwrap_or(T::zero());
        Ok(d - offset)
    })?;

    // flood the exterior from the grid boundary; enclosed positive nodes are inside
    let mut exterior = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let boundary = i == 0 || j == 0 || k == 0 || i + 1 == dims[0] || j + 1 == dims[1] || k + 1 == dims[2];
                let id = grid.id(i, j, k);
                if boundary && value[id] > T::zero() {
                    exterior[id] = true;
                    queue.push_back((i, j, k));
                }
            }
        }
    }
    while let Some((i, j, k)) = queue.pop_front() {
        let mut visit = |i: usize, j: usize, k: usize| {
            let id = grid.id(i, j, k);
            if !exterior[id] && value[id] > T::zero() {
                exterior[id] = true;
                queue.push_back((i, j, k));
            }
        };
        if i > 0 {
            visit(i - 1, j, k);
        }
        if j > 0 {
            visit(i, j - 1, k);
        }
        if k > 0 {
            visit(i, j, k - 1);
        }
        if i + 1 < dims[0] {
            visit(i + 1, j, k);
        }
        if j + 1 < dims[1] {
            visit(i, j + 1, k);
        }
        if k + 1 < dims[2] {
            visit(i, j, k + 1);
        }
    }
    let nudge = h * T::lit(1e-9);
    for (v, &out) in value.iter_mut().zip(&exterior) {
        if !out {
            *v = (*v).min(-nudge);
        }
    }

    // six tetrahedra around the cube diagonal 0-7; corner bit 1 = +x, 2 = +y, 4 = +z
    const TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];
    let mut verts: Vec<Point3<T>> = Vec::new();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut crossing = |a: usize, b: usize, verts: &mut Vec<Point3<T>>| -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        *lookup.entry(key).or_insert_with(|| {
            let (fa, fb) = (value[key.0], value[key.1]);
            let t = fa / (fa - fb);
            let (pa, pb) = (grid.point(key.0), grid.point(key.1));
            verts.push(pa + (pb - pa) * t);
            verts.len() - 1
        })
    };
    for k in 0..dims[2] - 1 {
        for j in 0..dims[1] - 1 {
            for i in 0..dims[0] - 1 {
                let corner = |c: usize| grid.id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let ids: [usize; 8] = std::array::from_fn(corner);
                let signs = ids.map(|id| value[id] > T::zero());
                if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
                    continue;
                }
                for tet in TETS {
                    let nodes = tet.map(|c| ids[c]);
                    let inside: Vec<usize> = nodes.iter().copied().filter(|&n| !(value[n] > T::zero())).collect();
                    let outside: Vec<usize> = nodes.iter().copied().filter(|&n| value[n] > T::zero()).collect();
                    let dir = centroid(&grid, &outside) - centroid(&grid, &inside);
                    let emit = |a: usize, b: usize, c: usize, verts: &Vec<Point3<T>>, tris: &mut Vec<[usize; 3]>| {
                        let n = (verts[b] - verts[a]).cross(&(verts[c] - verts[a]));
                        if n.dot(&dir) >= T::zero() {
                            tris.push([a, b, c]);
                        } else {
                            tris.push([a, c, b]);
                        }
                    };
                    match (inside.len(), outside.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if inside.len() == 1 { (inside[0], &outside) } else { (outside[0], &inside) };
                            let a = crossing(lone, rest[0], &mut verts);
                            let b = crossing(lone, rest[1], &mut verts);
                            let c = crossing(lone, rest[2], &mut verts);
                            emit(a, b, c, &verts, &mut tris);
                        }
                        (2, 2) => {
                            let ac = crossing(inside[0], outside[0], &mut verts);
                            let ad = crossing(inside[0], outside[1], &mut verts);
                            let bd = crossing(inside[1], outside[1], &mut verts);
                            let bc = crossing(inside[1], outside[0], &mut verts);
                            emit(ac, ad, bd, &verts, &mut tris);
                            emit(ac, bd, bc, &verts, &mut tris);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(TriangleMesh::new(verts, tris)?)
}

fn centroid<T: Real>(grid: &Grid<T>, ids: &[usize]) -> Vector3<T> {
    ids.iter().fold(Vector3::zeros(), |a, &id| a + grid.point(id).coords) / T::from_count(ids.len())
}

#[derive(Clone, Copy)]
struct Candidate<T: Real> {
    cost: T,
    a: usize,
    b: usize,
    stamp: (u32, u32),
    target: Point3<T>,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    // reversed so the max-heap pops the cheapest collapse first
    fn cmp(&self, other: &Self) -> Ordering {
        scalar::cmp(&other.cost, &self.cost)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

struct Decimator<T: Real> {
    pos: Vec<Point3<T>>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vertex_alive: Vec<bool>,
    vertex_faces: Vec<Vec<usize>>,
    quadric: Vec<Matrix4<T>>,
    stamp: Vec<u32>,
    live_faces: usize,
}

impl<T: Real> Decimator<T> {
    fn new(mesh: &TriangleMesh<T>) -> Self {
        let n = mesh.vertex_count();
        let mut quadric = vec![Matrix4::zeros(); n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let cross = {
                let [a, b, c] = mesh.triangle_points(t);
                (b - a).cross(&(c - a))
            };
            let area = cross.norm() / T::lit(2.0);
            let Some(nrm) = cross.try_normalize(T::zero()) else { continue };
            let d = -nrm.dot(&mesh.position(tri[0]).coords);
            let p = Vector4::new(nrm.x, nrm.y, nrm.z, d);
            let k = p * p.transpose() * area;
            for &v in tri {
                quadric[v] += k;
            }
        }
        Self {
            pos: mesh.positions().to_vec(),
            faces: mesh.triangles().to_vec(),
            face_alive: vec![true; mesh.triangle_count()],
            vertex_alive: vec![true; n],
            vertex_faces: (0..n).map(|v| mesh.vertex_triangles(v).to_vec()).collect(),
            quadric,
            stamp: vec![0; n],
            live_faces: mesh.triangle_count(),
        }
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vertex_faces[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn evaluate(q: &Matrix4<T>, p: &Point3<T>) -> T {
        let h = Vector4::new(p.x, p.y, p.z, T::one());
        (h.transpose() * q * h)[(0, 0)]
    }

    fn candidate(&self, a: usize, b: usize) -> Candidate<T> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let q = self.quadric[a] + self.quadric[b];
        let (pa, pb) = (self.pos[a], self.pos[b]);
        let mid = Point3::from((pa.coords + pb.coords) / T::lit(2.0));
        let mut best = (Self::evaluate(&q, &mid), mid);
        for p in [pa, pb] {
            let c = Self::evaluate(&q, &p);
            if c < best.0 {
                best = (c, p);
            }
        }
        let m = Matrix3::new(q[(0, 0)], q[(0, 1)], q[(0, 2)], q[(1, 0)], q[(1, 1)], q[(1, 2)], q[(2, 0)], q[(2, 1)], q[(2, 2)]);
        let rhs = -Vector3::new(q[(0, 3)], q[(1, 3)], q[(2, 3)]);
        let len = (pb - pa).norm();
        if m.determinant().abs() > T::lit(1e-12) * m.norm().powi(3) {
            if let Some(x) = m.lu().solve(&rhs) {
                let p = Point3::from(x);
                // reject optimal points that wander far from the edge
                if (p - mid).norm() <= len * T::lit(2.0) {
                    let c = Self::evaluate(&q, &p);
                    if c <= best.0 {
                        best = (c, p);
                    }
                }
            }
        }
        Candidate {
            cost: best.0.max(T::zero()),
            a,
            b,
            stamp: (self.stamp[a], self.stamp[b]),
            target: best.1,
        }
    }

    fn can_collapse(&self, c: &Candidate<T>) -> bool {
        let (a, b) = (c.a, c.b);
        let shared: Vec<usize> = self.vertex_faces[a]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&b))
            .collect();
        if shared.len() != 2 || self.live_faces < 6 {
            return false;
        }
        // link condition: the only common neighbours are the two opposite vertices
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common = na.iter().filter(|u| nb.binary_search(u).is_ok()).count();
        if common != 2 {
            return false;
        }
        for &v in &[a, b] {
            for &f in &self.vertex_faces[v] {
                if shared.contains(&f) {
                    continue;
                }
                let tri = self.faces[f];
                let before = self.face_cross(tri, None);
                let after = self.face_cross(tri, Some((v, c.target)));
                let (Some(n0), Some(n1)) = (before.try_normalize(T::zero()), after.try_normalize(T::zero())) else {
                    return false;
                };
                if n0.dot(&n1) < T::lit(0.2) {
                    return false;
                }
            }
        }
        true
    }

    fn face_cross(&self, tri: [usize; 3], moved: Option<(usize, Point3<T>)>) -> Vector3<T> {
        let p = |v: usize| match moved {
            Some((m, q)) if m == v => q,
            _ => self.pos[v],
        };
        let (a, b, c) = (p(tri[0]), p(tri[1]), p(tri[2]));
        (b - a).cross(&(c - a))
    }

    fn collapse(&mut self, c: &Candidate<T>) {
        let (a, b) = (c.a, c.b);
        self.pos[a] = c.target;
        self.quadric[a] = self.quadric[a] + self.quadric[b];
        let faces_b = std::mem::take(&mut self.vertex_faces[b]);
        for f in faces_b {
            if !self.face_alive[f] {
                continue;
            }
            if self.faces[f].contains(&a) {
                self.face_alive[f] = false;
                self.live_faces -= 1;
                for &v in &self.faces[f] {
                    if v != b {
                        self.vertex_faces[v].retain(|&g| g != f);
                    }
                }
            } else {
                for v in &mut self.faces[f] {
                    if *v == b {
                        *v = a;
                    }
                }
                self.vertex_faces[a].push(f);
            }
        }
        self.vertex_alive[b] = false;
        self.stamp[a] += 1;
        self.stamp[b] += 1;
    }

    fn fresh(&self, c: &Candidate<T>) -> bool {
        self.vertex_alive[c.a] && self.vertex_alive[c.b] && c.stamp == (self.stamp[c.a], self.stamp[c.b])
    }

    fn all_candidates(&self) -> BinaryHeap<Candidate<T>> {
        let mut heap = BinaryHeap::new();
        for a in 0..self.pos.len() {
            if !self.vertex_alive[a] {
                continue;
            }
            for b in self.neighbors(a) {
                if a < b {
                    heap.push(self.candidate(a, b));
                }
            }
        }
        heap
    }

    fn finish(self) -> Result<TriangleMesh<T>, CageError> {
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut positions = Vec::new();
        for (v, &alive) in self.vertex_alive.iter().enumerate() {
            if alive && !self.vertex_faces[v].is_empty() {
                remap[v] = positions.len();
                positions.push(self.pos[v]);
            }
        }
        let tris = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| f.map(|v| remap[v]))
            .collect();
        Ok(TriangleMesh::new(positions, tris)?)
    }
}

/// Quadric-error edge-collapse decimation of a closed manifold to `target` faces.
pub fn decimate<T: Real>(mesh: &TriangleMesh<T>, target: usize) -> Result<TriangleMesh<T>, CageError> {
    if target < 4 {
        return Err(CageError::TargetTooCoarse(format!("{target} faces requested, at least 4 needed")));
    }
    let mut d = Decimator::new(mesh);
    let mut heap = d.all_candidates();
    let mut progressed = true;
    while d.live_faces > target {
        let Some(c) = heap.pop() else {
            // frozen edges may have become collapsible; retry once per round of progress
            if !progressed {
                return Err(CageError::TargetTooCoarse(format!(
                    "no valid collapse left at {} faces (target {target})",
                    d.live_faces
                )));
            }
            progressed = false;
            heap = d.all_candidates();
            continue;
        };
        if !d.fresh(&c) || !d.can_collapse(&c) {
            continue;
        }
        d.collapse(&c);
        progressed = true;
        let a = c.a;
        for n in d.neighbors(a) {
            heap.push(d.candidate(a, n));
        }
    }
    d.finish()
}
