//! Procedural meshes and subdivision.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{edge_key, TriangleMesh};
use crate::geom;
use crate::scalar::Real;

/// Flip faces whose normal points towards `inside(centroid)`, for star-shaped solids.
fn orient_outward<T: Real>(
    positions: &[Point3<T>],
    triangles: &mut [[usize; 3]],
    inside: impl Fn(&Point3<T>) -> Point3<T>,
) {
    let third = T::lit(1.0 / 3.0);
    for tri in triangles.iter_mut() {
        let (a, b, c) = (positions[tri[0]], positions[tri[1]], positions[tri[2]]);
        let centroid = Point3::from((a.coords + b.coords + c.coords) * third);
        let n = geom::triangle_cross(&a, &b, &c);
        if n.dot(&(centroid - inside(&centroid))) < T::zero() {
            tri.swap(1, 2);
        }
    }
}

fn build<T: Real>(positions: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> TriangleMesh<T> {
    TriangleMesh::new(positions, triangles).expect("primitive meshes are valid")
}

fn p<T: Real>(x: f64, y: f64, z: f64) -> Point3<T> {
    Point3::new(T::lit(x), T::lit(y), T::lit(z))
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron<T: Real>() -> TriangleMesh<T> {
    let s = 1.0 / 3f64.sqrt();
    let positions = vec![p(s, s, s), p(s, -s, -s), p(-s, s, -s), p(-s, -s, s)];
    let mut tris = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    orient_outward(&positions, &mut tris, |_| Point3::origin());
    build(positions, tris)
}

/// Axis-aligned box as 8 vertices and 12 triangles.
pub fn boxed<T: Real>(min: Point3<T>, max: Point3<T>) -> TriangleMesh<T> {
    let mut positions = Vec::with_capacity(8);
    for &z in &[min.z, max.z] {
        for &y in &[min.y, max.y] {
            for &x in &[min.x, max.x] {
                positions.push(Point3::new(x, y, z));
            }
        }
    }
    // corner index = x + 2y + 4z
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let mut tris = Vec::with_capacity(12);
    for q in quads {
        tris.push([q[0], q[1], q[2]]);
        tris.push([q[0], q[2], q[3]]);
    }
    let center = nalgebra::center(&min, &max);
    orient_outward(&positions, &mut tris, |_| center);
    build(positions, tris)
}

/// Unit cube `[0, 1]³`.
pub fn cube<T: Real>() -> TriangleMesh<T> {
    boxed(p(0.0, 0.0, 0.0), p(1.0, 1.0, 1.0))
}

/// Base icosahedron with poles on ±z: vertex 0 is the north pole, 1..=5 the
/// upper ring, 6..=10 the lower ring (offset by π/5) and 11 the south pole.
pub fn icosahedron<T: Real>(radius: f64) -> TriangleMesh<T> {
    let z = 1.0 / 5f64.sqrt();
    let rho = 2.0 / 5f64.sqrt();
    let mut positions = vec![p(0.0, 0.0, radius)];
    for k in 0..5 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
        positions.push(p(radius * rho * a.cos(), radius * rho * a.sin(), radius * z));
    }
    for k in 0..5 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0 + std::f64::consts::PI / 5.0;
        positions.push(p(radius * rho * a.cos(), radius * rho * a.sin(), -radius * z));
    }
    positions.push(p(0.0, 0.0, -radius));
    let mut tris = Vec::with_capacity(20);
    for k in 0..5 {
        let u0 = 1 + k;
        let u1 = 1 + (k + 1) % 5;
        let l0 = 6 + k;
        let l1 = 6 + (k + 1) % 5;
        tris.push([0, u0, u1]);
        tris.push([u0, l0, u1]);
        tris.push([u1, l0, l1]);
        tris.push([11, l1, l0]);
    }
    orient_outward(&positions, &mut tris, |_| Point3::origin());
    build(positions, tris)
}

/// Icosphere: icosahedron refined `levels` times by midpoint subdivision,
/// with new vertices projected to the sphere. Existing vertex indices are kept.
pub fn icosphere<T: Real>(radius: f64, levels: usize) -> TriangleMesh<T> {
    let mut mesh = icosahedron::<T>(radius);
    let r = T::lit(radius);
    for _ in 0..levels {
        mesh = midpoint_subdivide(&mesh, |q| Point3::from(q.coords.normalize() * r));
    }
    mesh
}

/// Latitude/longitude sphere. Vertex 0 is the north pole, then `stacks − 1`
/// rings of `slices` vertices from north to south, then the south pole.
pub fn uv_sphere<T: Real>(radius: f64, stacks: usize, slices: usize) -> TriangleMesh<T> {
    assert!(stacks >= 2 && slices >= 3);
    let mut positions = vec![p(0.0, 0.0, radius)];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            positions.push(p(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    let south = positions.len();
    positions.push(p(0.0, 0.0, -radius));
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
    let mut tris = Vec::new();
    for j in 0..slices {
        tris.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    for j in 0..slices {
        tris.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    orient_outward(&positions, &mut tris, |_| Point3::origin());
    build(positions, tris)
}

/// Torus around the z axis with `major` radius and tube radius `minor`.
pub fn torus<T: Real>(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh<T> {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let rr = major + minor * v.cos();
            positions.push(p(rr * u.cos(), rr * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    build(positions, tris)
}

/// Unit square in the z = 0 plane split into `n × n` cells, two triangles each.
/// Vertex `(i, j)` has index `j * (n + 1) + i`.
pub fn grid_square<T: Real>(n: usize) -> TriangleMesh<T> {
    let mut positions = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            positions.push(p(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(positions, tris)
}

/// 1-to-4 split with new edge vertices placed by `place(midpoint)`. Old
/// vertices keep their indices; edge vertices follow in sorted edge order.
pub fn midpoint_subdivide<T: Real>(
    mesh: &TriangleMesh<T>,
    place: impl Fn(&Point3<T>) -> Point3<T>,
) -> TriangleMesh<T> {
    let mut positions = mesh.positions().to_vec();
    let mut mid = HashMap::with_capacity(mesh.edge_count());
    for e in mesh.edges() {
        let m = nalgebra::center(mesh.position(e[0]), mesh.position(e[1]));
        mid.insert(*e, positions.len());
        positions.push(place(&m));
    }
    let tris = split_triangles(mesh, &mid);
    build(positions, tris)
}

fn split_triangles<T: Real>(mesh: &TriangleMesh<T>, mid: &HashMap<[usize; 2], usize>) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(mesh.triangle_count() * 4);
    for &[a, b, c] in mesh.triangles() {
        let ab = mid[&edge_key(a, b)];
        let bc = mid[&edge_key(b, c)];
        let ca = mid[&edge_key(c, a)];
        tris.push([a, ab, ca]);
        tris.push([ab, b, bc]);
        tris.push([ca, bc, c]);
        tris.push([ab, bc, ca]);
    }
    tris
}

/// One level of Loop subdivision (boundary-aware). Vertex numbering as in
/// [`midpoint_subdivide`].
pub fn loop_subdivide<T: Real>(mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
    let pos = mesh.positions();
    let is_boundary_edge = |a: usize, b: usize| mesh.edge_triangles(a, b).is_some_and(|f| f.len() == 1);

    let mut positions = Vec::with_capacity(mesh.vertex_count() + mesh.edge_count());
    for v in 0..mesh.vertex_count() {
        let nbrs = mesh.neighbors(v);
        let boundary: Vec<usize> = nbrs.iter().copied().filter(|&w| is_boundary_edge(v, w)).collect();
        let new = if boundary.len() == 2 {
            let sum = pos[boundary[0]].coords + pos[boundary[1]].coords;
            Point3::from(pos[v].coords * T::lit(0.75) + sum * T::lit(0.125))
        } else if nbrs.is_empty() || !boundary.is_empty() {
            pos[v]
        } else {
            let n = nbrs.len() as f64;
            let c = 3.0 / 8.0 + 0.25 * (2.0 * std::f64::consts::PI / n).cos();
            let beta = T::lit((5.0 / 8.0 - c * c) / n);
            let sum = nbrs.iter().fold(Vector3::zeros(), |acc, &w| acc + pos[w].coords);
            Point3::from(pos[v].coords * (T::one() - T::lit(n) * beta) + sum * beta)
        };
        positions.push(new);
    }
    let mut mid = HashMap::with_capacity(mesh.edge_count());
    for e in mesh.edges() {
        let faces = mesh.edge_triangles(e[0], e[1]).unwrap_or(&[]);
        let (a, b) = (pos[e[0]].coords, pos[e[1]].coords);
        let new = if faces.len() == 2 {
            let opposite = |t: usize| {
                let tri = mesh.triangles()[t];
                tri.into_iter().find(|&i| i != e[0] && i != e[1]).unwrap()
            };
            let (c, d) = (pos[opposite(faces[0])].coords, pos[opposite(faces[1])].coords);
            (a + b) * T::lit(0.375) + (c + d) * T::lit(0.125)
        } else {
            (a + b) * T::lit(0.5)
        };
        mid.insert(*e, positions.len());
        positions.push(Point3::from(new));
    }
    let tris = split_triangles(mesh, &mid);
    build(positions, tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_primitives_are_outward() {
        let meshes: Vec<TriangleMesh<f64>> = vec![
            tetrahedron(),
            cube(),
            icosphere(1.0, 2),
            uv_sphere(1.0, 8, 12),
            torus(1.0, 0.3, 16, 8),
        ];
        for m in meshes {
            assert!(m.is_closed());
            assert!(m.signed_volume() > 0.0);
        }
    }

    #[test]
    fn icosphere_counts() {
        let m: TriangleMesh<f64> = icosphere(1.0, 3);
        assert_eq!(m.triangle_count(), 20 * 64);
        assert_eq!(m.vertex_count(), 642);
        assert_eq!(m.genus(), Some(0));
    }

    #[test]
    fn loop_subdivision_keeps_topology() {
        let m: TriangleMesh<f64> = icosphere(1.0, 1);
        let s = loop_subdivide(&m);
        assert_eq!(s.triangle_count(), 4 * m.triangle_count());
        assert_eq!(s.vertex_count(), m.vertex_count() + m.edge_count());
        assert!(s.is_closed());
        let g: TriangleMesh<f64> = grid_square(3);
        let sg = loop_subdivide(&g);
        assert_eq!(sg.boundary_edges().len(), 2 * g.boundary_edges().len());
    }
}
