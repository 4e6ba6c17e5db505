//! Read-only spatial indices over a mesh: closest surface point and nearest vertex.

use nalgebra::{Point3, Vector3};

use super::TriangleMesh;
use crate::geom::{self, Aabb};
use crate::scalar::{self, Real};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node<T: Real> {
    Leaf { bounds: Aabb<T>, start: usize, end: usize },
    Inner { bounds: Aabb<T>, left: usize, right: usize },
}

impl<T: Real> Node<T> {
    fn bounds(&self) -> &Aabb<T> {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Closest point on a mesh surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint<T: Real> {
    pub triangle: usize,
    pub point: Point3<T>,
    pub distance: T,
}

/// Bounding volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceIndex<T: Real> {
    corners: Vec<[Point3<T>; 3]>,
    normals: Vec<Vector3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> SurfaceIndex<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Self {
        Self::from_triangles(mesh, 0..mesh.triangle_count())
    }

    /// Index over a subset of the mesh triangles.
    pub fn from_triangles(mesh: &TriangleMesh<T>, triangles: impl IntoIterator<Item = usize>) -> Self {
        let order: Vec<usize> = triangles.into_iter().collect();
        let corners: Vec<[Point3<T>; 3]> = (0..mesh.triangle_count()).map(|t| mesh.triangle_points(t)).collect();
        let normals = (0..mesh.triangle_count()).map(|t| mesh.triangle_normal(t)).collect();
        let mut index = Self {
            corners,
            normals,
            order,
            nodes: Vec::new(),
        };
        if !index.order.is_empty() {
            let n = index.order.len();
            index.build(0, n);
        }
        index
    }

    fn centroid(&self, t: usize) -> Point3<T> {
        let [a, b, c] = &self.corners[t];
        Point3::from((a.coords + b.coords + c.coords) * T::lit(1.0 / 3.0))
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.corners[t] {
                bounds.grow(p);
            }
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let ext = bounds.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mut slice: Vec<usize> = self.order[start..end].to_vec();
        slice.sort_by(|&a, &b| scalar::cmp(&self.centroid(a)[axis], &self.centroid(b)[axis]).then(a.cmp(&b)));
        self.order[start..end].copy_from_slice(&slice);
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf { bounds, start, end }); // placeholder
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn triangle_normal(&self, t: usize) -> Vector3<T> {
        self.normals[t]
    }

    /// Closest surface point; ties resolved towards the lower triangle index.
    pub fn closest_point(&self, p: &Point3<T>) -> Option<SurfacePoint<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(T, usize, Point3<T>)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if let Some((d, _, _)) = best {
                if node.bounds().distance_squared(p) > d {
                    continue;
                }
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = &self.corners[t];
                        let q = geom::closest_point_on_triangle(p, a, b, c);
                        let d = (q - p).norm_squared();
                        let better = match best {
                            None => true,
                            Some((bd, bt, _)) => d < bd || (d == bd && t < bt),
                        };
                        if better {
                            best = Some((d, t, q));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.map(|(d, triangle, point)| SurfacePoint {
            triangle,
            point,
            distance: d.sqrt(),
        })
    }
}

/// Kd-tree over points answering nearest-neighbour queries with
/// lowest-index tie breaking.
#[derive(Debug, Clone)]
pub struct PointIndex<T: Real> {
    points: Vec<Point3<T>>,
    // implicit tree: order[lo..hi] with median at the split
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<T: Real> PointIndex<T> {
    pub fn new(points: &[Point3<T>]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        let n = points.len();
        index.build(0, n, 0);
        index
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) {
        if hi <= lo + 1 {
            return;
        }
        let axis = depth % 3;
        let pts = &self.points;
        self.order[lo..hi].sort_by(|&a, &b| scalar::cmp(&pts[a][axis], &pts[b][axis]).then(a.cmp(&b)));
        let mid = (lo + hi) / 2;
        self.axes[mid] = axis as u8;
        self.build(lo, mid, depth + 1);
        self.build(mid + 1, hi, depth + 1);
    }

    /// Index of the nearest point; equidistant candidates resolve to the lowest index.
    pub fn nearest(&self, q: &Point3<T>) -> Option<usize> {
        let mut best: Option<(T, usize)> = None;
        self.search(q, 0, self.order.len(), &mut best);
        best.map(|(_, i)| i)
    }

    fn search(&self, q: &Point3<T>, lo: usize, hi: usize, best: &mut Option<(T, usize)>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d = (self.points[i] - q).norm_squared();
        let better = match *best {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && i < bi),
        };
        if better {
            *best = Some((d, i));
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - self.points[i][axis];
        let (near, far) = if diff <= T::zero() {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        // `<=` keeps equidistant points on the far side reachable for tie breaking
        if best.is_none_or(|(bd, _)| diff * diff <= bd) {
            self.search(q, far.0, far.1, best);
        }
    }
}
