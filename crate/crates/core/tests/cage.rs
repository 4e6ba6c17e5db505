mod common;

use cageforge_core::annotation::{region_loops, Annotation, SelectorSpec};
use cageforge_core::cage::generate::{generate_cage, CageOptions};
use cageforge_core::cage::{self, annotation_to_cage_vertices, apply_deformation, compute_mvc, CageError, CoordinateMethod, DEFAULT_INFLUENCE_THRESHOLD};
use cageforge_core::mesh::{primitives, TriangleMesh};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle::signed_distance;



fn assert_encloses(cage: &TriangleMesh<f64>, template: &TriangleMesh<f64>) {
    let tol = 1e-6 * cage.diagonal();
    for (i, p) in template.positions().iter().enumerate() {
        assert!(signed_distance(cage, p) < -tol, "vertex {i} not strictly inside");
    }
}

#[test]
fn sphere_cage_is_closed_genus_zero_and_encloses() {
    let sphere: TriangleMesh<f64> = primitives::icosphere(1.0, 3);
    let opts = CageOptions {
        target_faces: 100,
        ..CageOptions::default()
    };
    assert_eq!(opts.offset_fraction, 0.55);
    let g = generate_cage(&sphere, &opts).unwrap();
    assert!((g.cage.triangle_count() as i64 - 100).abs() <= 4);
    assert!(g.cage.is_closed());
    assert_eq!(g.cage.genus(), Some(0));
    assert!(g.violations.is_empty());
    assert_encloses(&g.cage, &sphere);
}

#[test]
fn torus_cage_keeps_genus_one() {
    let torus: TriangleMesh<f64> = primitives::torus(1.0, 0.4, 48, 24);
    let g = generate_cage(
        &torus,
        &CageOptions {
            target_faces: 240,
            ..CageOptions::default()
        },
    )
    .unwrap();
    assert!(g.cage.is_closed());
    assert_eq!(g.cage.genus(), Some(1));
    assert_eq!(g.cage.euler_characteristic(), 0);
    assert!(g.violations.is_empty());
    assert_encloses(&g.cage, &torus);
    cage::compute_coords(CoordinateMethod::MeanValue, &torus, &g.cage).unwrap();
}

#[test]
fn zero_offset_is_rejected() {
    let sphere: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
    let opts = CageOptions {
        offset_fraction: 0.0,
        ..CageOptions::default()
    };
    assert!(matches!(generate_cage(&sphere, &opts), Err(CageError::Precondition(_))));
}

#[test]
fn random_points_in_cube_are_reproduced() {
    let cube: TriangleMesh<f64> = primitives::cube();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Point3<f64>> = (0..51).map(|_| Point3::from(Vector3::from_fn(|_, _| rng.random_range(0.02..0.98)))).collect();
    let tris = (0..17).map(|k| [3 * k, 3 * k + 1, 3 * k + 2]).collect();
    let template = TriangleMesh::new(pts, tris).unwrap();
    let coords = compute_mvc(&template, &cube).unwrap();
    for (i, p) in template.positions().iter().enumerate() {
        let r = coords.row(i).iter().zip(cube.positions()).fold(Vector3::zeros(), |a, (w, c)| a + c.coords * *w);
        assert!((r - p.coords).norm() < 1e-6);
    }
    let doubled = cube.with_positions(cube.positions().iter().map(|c| Point3::from(c.coords * 2.0)).collect());
    for (a, b) in apply_deformation(&coords, &cube, &doubled).unwrap().iter().zip(template.positions()) {
        assert!((a.coords - b.coords * 2.0).norm() < 1e-9);
    }
}

#[test]
fn hemisphere_ranks_near_corners_first() {
    let cube = primitives::boxed(Point3::new(-1.5, -1.5, -1.5), Point3::new(1.5, 1.5, 1.5));
    let sphere: TriangleMesh<f64> = primitives::icosphere(1.0, 3);
    let coords = compute_mvc(&sphere, &cube).unwrap();
    let top: Vec<usize> = (0..sphere.triangle_count())
        .filter(|&t| sphere.triangles()[t].iter().all(|&v| sphere.position(v).z >= -1e-9))
        .collect();
    let hemi = Annotation::new(&sphere, 0, SelectorSpec::Region(region_loops(&sphere, &top).unwrap()), "top", [0, 0, 0]).unwrap();
    let members = hemi.vertices(&sphere);
    let aggregate: Vec<f64> = (0..8).map(|j| members.iter().map(|&i| coords.vertex[(i, j)].abs()).sum()).collect();
    let max = aggregate.iter().copied().fold(0.0, f64::max);
    let (near, far): (Vec<usize>, Vec<usize>) = (0..8).partition(|&v| cube.position(v).z > 0.0);
    let weakest_near = near.iter().map(|&j| aggregate[j]).fold(f64::INFINITY, f64::min);
    let strongest_far = far.iter().map(|&j| aggregate[j]).fold(0.0, f64::max);
    assert!(strongest_far < weakest_near);
    let split = 0.5 * (weakest_near + strongest_far) / max;
    assert_eq!(annotation_to_cage_vertices(&coords, &sphere, &hemi, split), near);
    let default = annotation_to_cage_vertices(&coords, &sphere, &hemi, DEFAULT_INFLUENCE_THRESHOLD);
    assert_eq!(default.len(), 8, "far corners keep {:.3} of the peak", strongest_far / max);
    let everything: Vec<usize> = (0..sphere.vertex_count()).collect();
    assert_eq!(cage::influencing_cage_vertices(&coords, &everything, 0.0).len(), 8);
}
