mod common;

use cageforge_core::mesh::path::{path_length, shortest_edge_path};
use cageforge_core::mesh::{primitives, TriangleMesh};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle::relaxed_distances;


fn jittered_grid() -> TriangleMesh<f64> {
    let grid: TriangleMesh<f64> = primitives::grid_square(16);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = 1.0 / 16.0;
    grid.with_positions(
        grid.positions()
            .iter()
            .map(|p| p + Vector3::new(rng.random_range(-0.3..0.3) * step, rng.random_range(-0.3..0.3) * step, rng.random_range(-0.5..0.5) * step))
            .collect(),
    )
}

#[test]
fn shortest_paths_match_exhaustive_relaxation() {
    let meshes: Vec<(&str, TriangleMesh<f64>)> = vec![
        ("icosphere", primitives::icosphere(1.0, 3)),
        ("torus", primitives::torus(1.0, 0.35, 40, 16)),
        ("jittered-grid", jittered_grid()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, mesh) in &meshes {
        for _ in 0..100 {
            let a = rng.random_range(0..mesh.vertex_count());
            let b = rng.random_range(0..mesh.vertex_count());
            let path = shortest_edge_path(mesh, a, b).unwrap();
            let oracle = relaxed_distances(mesh, a)[b];
            assert_eq!(path.length, oracle, "{name}: {a} -> {b}");
            assert_eq!(path.vertices.first(), Some(&a));
            assert_eq!(path.vertices.last(), Some(&b));
            assert_eq!(path_length(mesh, &path.vertices), Some(path.length), "{name}");
        }
    }
}

#[test]
fn ties_resolve_to_the_same_path_every_time() {
    let grid: TriangleMesh<f64> = primitives::grid_square(6);
    let first = shortest_edge_path(&grid, 0, grid.vertex_count() - 1).unwrap();
    for _ in 0..5 {
        assert_eq!(shortest_edge_path(&grid, 0, grid.vertex_count() - 1).unwrap(), first);
    }
    let corner = Point3::new(1.0, 1.0, 0.0);
    assert!((grid.position(*first.vertices.last().unwrap()) - corner).norm() < 1e-12);
}
