//! Indexed triangle meshes with derived adjacency.
//!
//! A [`TriangleMesh`] is validated on construction (indices in range, no
//! repeated vertex in a triangle, every edge bounding one or two triangles)
//! and is immutable afterwards; positions can be swapped wholesale with
//! [`TriangleMesh::with_positions`], which keeps the connectivity.

mod bvh;
pub mod io;
pub mod medial;
pub mod obb;
pub mod path;
pub mod primitives;
pub mod slice;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::geom::{self, Aabb};
use crate::scalar::Real;

pub use bvh::{PointIndex, SurfaceIndex, SurfacePoint};

/// Sentinel used in the edge → triangle table for a missing second triangle.
const NONE: usize = usize::MAX;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error ({format}) at line {line}: {message}")]
    Parse {
        format: &'static str,
        line: usize,
        message: String,
    },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    InvalidIndex {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {0} repeats a vertex index")]
    DegenerateTriangle(usize),
    #[error("non-manifold edge ({}, {}) is shared by {count} triangles", edge[0], edge[1])]
    NonManifold { edge: [usize; 2], count: usize },
    #[error("vertex {to} is unreachable from vertex {from}")]
    Unreachable { from: usize, to: usize },
    #[error("vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("slice has no closed loop")]
    NoClosedLoop,
    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Unordered edge key with the smaller index first.
#[inline]
pub fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

#[derive(Debug, Clone)]
pub struct TriangleMesh<T: Real> {
    positions: Vec<Point3<T>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_faces: Vec<[usize; 2]>,
    edge_lookup: HashMap<[usize; 2], usize>,
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

impl<T: Real> TriangleMesh<T> {
    /// Build and validate a mesh.
    pub fn new(positions: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(MeshError::InvalidIndex {
                        triangle: t,
                        index: i,
                        count: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }

        let mut edge_lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut incident: Vec<Vec<usize>> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    incident.push(Vec::with_capacity(2));
                    incident.len() - 1
                });
                incident[id].push(t);
            }
        }
        let mut keyed: Vec<([usize; 2], usize)> = edge_lookup.iter().map(|(k, v)| (*k, *v)).collect();
        keyed.sort_unstable();
        let mut edges = Vec::with_capacity(keyed.len());
        let mut edge_faces = Vec::with_capacity(keyed.len());
        for (new_id, (key, old_id)) in keyed.iter().enumerate() {
            let faces = &incident[*old_id];
            if faces.len() > 2 {
                return Err(MeshError::NonManifold {
                    edge: *key,
                    count: faces.len(),
                });
            }
            edges.push(*key);
            edge_faces.push([faces[0], faces.get(1).copied().unwrap_or(NONE)]);
            edge_lookup.insert(*key, new_id);
        }

        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e[0]].push(e[1]);
            neighbors[e[1]].push(e[0]);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let mut vertex_faces = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                vertex_faces[i].push(t);
            }
        }

        Ok(Self {
            positions,
            triangles,
            edges,
            edge_faces,
            edge_lookup,
            neighbors,
            vertex_faces,
        })
    }

    /// Same connectivity, new positions.
    ///
    /// # Panics
    /// If `positions` does not have one entry per vertex.
    pub fn with_positions(&self, positions: Vec<Point3<T>>) -> Self {
        assert_eq!(positions.len(), self.positions.len(), "vertex count mismatch");
        Self {
            positions,
            ..self.clone()
        }
    }

    /// Mesh made of the listed triangles, with vertices renumbered in first-use
    /// order. Also returns the original index of every new vertex.
    pub fn submesh(&self, triangles: &[usize]) -> Result<(Self, Vec<usize>), MeshError> {
        let mut map = HashMap::new();
        let mut origin = Vec::new();
        let mut tris = Vec::with_capacity(triangles.len());
        for &t in triangles {
            let tri = self.triangles[t].map(|v| {
                *map.entry(v).or_insert_with(|| {
                    origin.push(v);
                    origin.len() - 1
                })
            });
            tris.push(tri);
        }
        let positions = origin.iter().map(|&v| self.positions[v]).collect();
        Ok((Self::new(positions, tris)?, origin))
    }

    pub fn positions(&self) -> &[Point3<T>] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> &Point3<T> {
        &self.positions[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Sorted list of unordered edges.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbour list of a vertex.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&edge_key(a, b)).copied()
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.edge_lookup.contains_key(&edge_key(a, b))
    }

    /// Triangles incident to an edge (one or two).
    pub fn edge_triangles(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.edge_id(a, b).map(|id| self.edge_triangles_by_id(id))
    }

    pub fn edge_triangles_by_id(&self, id: usize) -> &[usize] {
        let f = &self.edge_faces[id];
        if f[1] == NONE {
            &f[..1]
        } else {
            &f[..]
        }
    }

    /// Triangles sharing an edge with `t`, excluding `t` itself.
    pub fn triangle_neighbors(&self, t: usize) -> impl Iterator<Item = (usize, [usize; 2])> + '_ {
        let tri = self.triangles[t];
        (0..3).filter_map(move |k| {
            let key = edge_key(tri[k], tri[(k + 1) % 3]);
            let id = self.edge_lookup[&key];
            let f = self.edge_faces[id];
            let other = if f[0] == t { f[1] } else { f[0] };
            (other != NONE).then_some((other, key))
        })
    }

    /// Every edge bounds exactly two triangles.
    pub fn is_closed(&self) -> bool {
        !self.edges.is_empty() && self.edge_faces.iter().all(|f| f[1] != NONE)
    }

    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        self.edges
            .iter()
            .zip(&self.edge_faces)
            .filter(|(_, f)| f[1] == NONE)
            .map(|(e, _)| *e)
            .collect()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> T {
        (self.positions[a] - self.positions[b]).norm()
    }

    pub fn bounding_box(&self) -> Aabb<T> {
        Aabb::from_points(&self.positions)
    }

    pub fn diagonal(&self) -> T {
        self.bounding_box().diagonal()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_points(t);
        geom::triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangle_count()).fold(T::zero(), |acc, t| acc + self.triangle_area(t))
    }

    /// Unit normal; zero for zero-area triangles.
    pub fn triangle_normal(&self, t: usize) -> Vector3<T> {
        let [a, b, c] = self.triangle_points(t);
        geom::triangle_cross(&a, &b, &c).try_normalize(T::zero()).unwrap_or_else(Vector3::zeros)
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vector3<T>> {
        let mut normals = vec![Vector3::zeros(); self.vertex_count()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = self.triangle_points(t);
            let n = geom::triangle_cross(&a, &b, &c);
            for &i in tri {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            *n = n.try_normalize(T::zero()).unwrap_or_else(Vector3::zeros);
        }
        normals
    }

    /// Signed volume enclosed by a closed, consistently oriented mesh.
    pub fn signed_volume(&self) -> T {
        let sixth = T::lit(1.0 / 6.0);
        self.triangles.iter().fold(T::zero(), |acc, tri| {
            let a = self.positions[tri[0]].coords;
            let b = self.positions[tri[1]].coords;
            let c = self.positions[tri[2]].coords;
            acc + a.dot(&b.cross(&c)) * sixth
        })
    }

    /// Number of edge-connected components among vertices used by triangles.
    pub fn component_count(&self) -> usize {
        let labels = self.component_labels();
        let mut seen: Vec<usize> = labels.iter().filter_map(|l| *l).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Component label per vertex; `None` for isolated vertices.
    pub fn component_labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.vertex_count()];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.vertex_count() {
            if labels[start].is_some() || self.neighbors[start].is_empty() {
                continue;
            }
            labels[start] = Some(next);
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if labels[w].is_none() {
                        labels[w] = Some(next);
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        labels
    }

    /// V − E + F over vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let used = self.neighbors.iter().filter(|n| !n.is_empty()).count() as i64;
        used - self.edge_count() as i64 + self.triangle_count() as i64
    }

    /// Total genus of a closed mesh: Σ over components of (2 − χᵢ)/2.
    pub fn genus(&self) -> Option<usize> {
        if !self.is_closed() {
            return None;
        }
        let c = self.component_count() as i64;
        let g2 = 2 * c - self.euler_characteristic();
        (g2 >= 0 && g2 % 2 == 0).then_some((g2 / 2) as usize)
    }

    /// Generalized winding number of a closed mesh around `p` (≈1 inside, ≈0 outside).
    pub fn winding_number(&self, p: &Point3<T>) -> T {
        let total = self.triangles.iter().fold(T::zero(), |acc, tri| {
            acc + geom::solid_angle(
                p,
                &self.positions[tri[0]],
                &self.positions[tri[1]],
                &self.positions[tri[2]],
            )
        });
        total / (T::lit(4.0) * T::pi())
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), MeshError> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(MeshError::VertexOutOfRange {
                index: v,
                count: self.vertex_count(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn tetrahedron_is_closed_genus_zero() {
        let m: TriangleMesh<f64> = primitives::tetrahedron();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 4);
        assert_eq!(m.edge_count(), 6);
        assert!(m.is_closed());
        assert_eq!(m.genus(), Some(0));
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn rejects_three_triangles_on_one_edge() {
        let p = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, 1.0, 0.0),
            Point3::new(0.5, -1.0, 0.0),
            Point3::new(0.5, 0.0, 1.0),
        ];
        let err = TriangleMesh::new(p, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        match err {
            MeshError::NonManifold { edge, count } => {
                assert_eq!(edge, [0, 1]);
                assert_eq!(count, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_indices_and_degenerate_triangles() {
        let p = vec![Point3::new(0.0f64, 0.0, 0.0); 3];
        assert!(matches!(
            TriangleMesh::new(p.clone(), vec![[0, 1, 3]]),
            Err(MeshError::InvalidIndex { index: 3, .. })
        ));
        assert!(matches!(
            TriangleMesh::new(p, vec![[0, 1, 1]]),
            Err(MeshError::DegenerateTriangle(0))
        ));
    }

    #[test]
    fn open_square_has_boundary() {
        let m: TriangleMesh<f64> = primitives::grid_square(2);
        assert!(!m.is_closed());
        assert_eq!(m.boundary_edges().len(), 8);
        assert_eq!(m.genus(), None);
    }

    #[test]
    fn torus_genus() {
        let m: TriangleMesh<f64> = primitives::torus(1.0, 0.3, 24, 12);
        assert!(m.is_closed());
        assert_eq!(m.genus(), Some(1));
    }

    #[test]
    fn winding_number_inside_and_outside() {
        let m: TriangleMesh<f64> = primitives::cube();
        assert!((m.winding_number(&Point3::new(0.5, 0.5, 0.5)) - 1.0).abs() < 1e-12);
        assert!(m.winding_number(&Point3::new(2.0, 0.5, 0.5)).abs() < 1e-12);
    }
}
