//! Edge-graph shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{MeshError, TriangleMesh};
use crate::scalar::{self, Real};

#[derive(Debug, Clone, Copy)]
struct Entry<T: Real> {
    dist: T,
    vertex: usize,
}

impl<T: Real> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Entry<T> {}

impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Entry<T> {
    // min-heap on distance, then on vertex index
    fn cmp(&self, other: &Self) -> Ordering {
        scalar::cmp(&other.dist, &self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// A vertex path with its summed edge length.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePath<T: Real> {
    pub vertices: Vec<usize>,
    pub length: T,
}

/// Dijkstra from `from`, stopping as soon as `to` is settled.
///
/// Among equal-length relaxations the predecessor with the smaller index is kept.
pub fn shortest_edge_path<T: Real>(mesh: &TriangleMesh<T>, from: usize, to: usize) -> Result<EdgePath<T>, MeshError> {
    mesh.check_vertex(from)?;
    mesh.check_vertex(to)?;
    let n = mesh.vertex_count();
    let mut dist: Vec<Option<T>> = vec![None; n];
    let mut pred = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[from] = Some(T::zero());
    heap.push(Entry {
        dist: T::zero(),
        vertex: from,
    });
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if settled[v] {
            continue;
        }
        settled[v] = true;
        if v == to {
            break;
        }
        for &w in mesh.neighbors(v) {
            if settled[w] {
                continue;
            }
            let nd = d + mesh.edge_length(v, w);
            let improve = match dist[w] {
                None => true,
                Some(old) => nd < old || (nd == old && v < pred[w]),
            };
            if improve {
                dist[w] = Some(nd);
                pred[w] = v;
                heap.push(Entry { dist: nd, vertex: w });
            }
        }
    }
    if !settled[to] {
        return Err(MeshError::Unreachable { from, to });
    }
    let mut vertices = vec![to];
    let mut cur = to;
    while cur != from {
        cur = pred[cur];
        vertices.push(cur);
    }
    vertices.reverse();
    Ok(EdgePath {
        vertices,
        length: dist[to].unwrap_or_else(T::zero),
    })
}

/// Summed edge length of a vertex path; `None` if a step is not a mesh edge.
pub fn path_length<T: Real>(mesh: &TriangleMesh<T>, path: &[usize]) -> Option<T> {
    let mut total = T::zero();
    for w in path.windows(2) {
        if w[0] != w[1] && !mesh.is_edge(w[0], w[1]) {
            return None;
        }
        total += mesh.edge_length(w[0], w[1]);
    }
    Some(total)
}
