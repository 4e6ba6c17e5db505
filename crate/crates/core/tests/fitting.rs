mod common;

use std::time::Instant;

use cageforge_core::fitting::{rigid_place, umeyama_similarity, FitError, FitOptions, LandmarkPair, LandmarkSet, SimilarityTransform};
use cageforge_core::mesh::{primitives, TriangleMesh};
use common::oracle::{brute_force_proper, random_points, random_rotation, residual};
use common::{fit_fixture, fit_pipeline};
use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;



#[test]
fn construct_and_recover() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let src = random_points(&mut rng, 10);
        let truth = SimilarityTransform {
            scale: rng.random_range(0.2..5.0),
            rotation: random_rotation(&mut rng),
            translation: Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)),
        };
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let got = umeyama_similarity(&src, &dst).unwrap();
        worst = worst
            .max((got.scale - truth.scale).abs())
            .max((got.rotation - truth.rotation).amax())
            .max((got.translation - truth.translation).amax());
    }
    assert!(worst < 1e-9, "{worst}");
}




#[test]
fn mirrored_targets_give_the_best_proper_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let src = random_points(&mut rng, 8);
        let r = random_rotation(&mut rng);
        let dst: Vec<_> = src
            .iter()
            .map(|p| Point3::from(r * Vector3::new(-p.x, p.y, p.z) * 1.7 + Vector3::new(0.3, 0.1, -0.2)))
            .collect();
        let got = umeyama_similarity(&src, &dst).unwrap();
        assert!((got.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!((got.rotation.transpose() * got.rotation - Matrix3::identity()).amax() < 1e-9);
        let oracle = brute_force_proper(&src, &dst, &mut rng);
        let ours = residual(&src, &dst, &got);
        assert!((ours - oracle).abs() < 1e-7, "{ours} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn left_equivariance(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_points(&mut rng, 7);
        let dst = random_points(&mut rng, 7);
        let q = random_rotation(&mut rng);
        let base = umeyama_similarity(&src, &dst).unwrap();
        let rotated: Vec<_> = dst.iter().map(|p| Point3::from(q * p.coords)).collect();
        let turned = umeyama_similarity(&src, &rotated).unwrap();
        prop_assert!((turned.rotation - q * base.rotation).amax() < 1e-9);
        prop_assert!((turned.scale - base.scale).abs() < 1e-9);
        prop_assert!((turned.translation - q * base.translation).amax() < 1e-9);
    }

    #[test]
    fn rotation_is_proper(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_points(&mut rng, 5);
        let dst = random_points(&mut rng, 5);
        let s = umeyama_similarity(&src, &dst).unwrap();
        prop_assert!((s.rotation.determinant() - 1.0).abs() < 1e-9);
        prop_assert!(s.scale >= 0.0);
    }
}

fn landmark_set(pairs: &[(usize, usize)]) -> LandmarkSet {
    LandmarkSet::new(
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(template, fragment))| LandmarkPair {
                template,
                fragment,
                tag: format!("l{i}"),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn double_size_fragment_scales_template() {
    let t: TriangleMesh<f64> = primitives::icosphere(1.0, 2);
    let cap: Vec<usize> = (0..t.triangle_count()).filter(|&i| t.triangles()[i].iter().all(|&v| t.position(v).z > 0.2)).collect();
    let (piece, origin) = t.submesh(&cap).unwrap();
    let pose = SimilarityTransform {
        scale: 2.0,
        rotation: *Rotation3::new(Vector3::new(0.2, 0.5, -0.4)).matrix(),
        translation: Vector3::new(1.0, 2.0, 3.0),
    };
    let fragment = pose.apply_mesh(&piece);
    let lm = landmark_set(&[(origin[0], 0), (origin[5], 5), (origin[11], 11)]);
    let placement = rigid_place(&t, &fragment, &lm).unwrap();
    assert!((placement.template_scale - 2.0).abs() < 1e-9);
    assert!(placement.landmark_rms < 1e-9);
    let scaled = placement.scale_template(&t);
    let placed = placement.place_fragment(&fragment);
    for (f, &o) in placed.positions().iter().zip(&origin) {
        assert!((f - scaled.position(o)).norm() < 1e-9);
    }
    let again = rigid_place(&scaled, &placed, &lm).unwrap();
    assert!((again.template_scale - 1.0).abs() < 1e-9);
    assert!((again.fragment_pose.rotation - Matrix3::identity()).amax() < 1e-9);
    assert!(again.fragment_pose.translation.norm() < 1e-9);
}

#[test]
fn placed_fragment_is_a_no_op() {
    let t: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
    let lm = landmark_set(&[(0, 0), (3, 3), (7, 7), (9, 9)]);
    let p = rigid_place(&t, &t, &lm).unwrap();
    assert!((p.template_scale - 1.0).abs() < 1e-12);
    assert!((p.fragment_pose.rotation - Matrix3::identity()).amax() < 1e-12);
    assert!(p.fragment_pose.translation.norm() < 1e-12);
}

#[test]
fn noisy_landmarks_stay_near_the_least_squares_bound() {
    let t: TriangleMesh<f64> = primitives::icosphere(1.0, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sigma = 0.01;
    let picks = [0usize, 17, 40, 77, 120];
    let noisy = t.with_positions(
        t.positions()
            .iter()
            .map(|p| Point3::from(p.coords * 1.5 + Vector3::from_fn(|_, _| rng.random_range(-sigma..sigma))))
            .collect(),
    );
    let lm = landmark_set(&picks.map(|v| (v, v)));
    let placement = rigid_place(&t, &noisy, &lm).unwrap();
    let src: Vec<_> = picks.iter().map(|&v| *t.position(v)).collect();
    let dst: Vec<_> = picks.iter().map(|&v| *noisy.position(v)).collect();
    let oracle = (brute_force_proper(&src, &dst, &mut rng) / picks.len() as f64).sqrt();
    assert!(placement.landmark_rms <= oracle + 1e-9, "{} vs {oracle}", placement.landmark_rms);
    assert!(placement.landmark_rms <= sigma * 3f64.sqrt());
}

#[test]
fn untouched_region_needs_no_fit() {
    let fx = fit_fixture(2, 9, 0.0);
    let run = fit_pipeline(&fx, &FitOptions::default()).unwrap();
    assert_eq!(run.report.iterations, 0);
    assert!(run.report.converged);
    assert!(run.report.history[0].mean_distance < 1e-6);
}

#[test]
fn missing_tag_is_incompatible() {
    let mut fx = fit_fixture(2, 9, 0.0);
    fx.fragment_annotations[0].tag = "handle".into();
    assert!(matches!(fit_pipeline(&fx, &FitOptions::default()), Err(FitError::NoCompatibleAnnotation)));
    assert!(matches!(
        umeyama_similarity::<f64>(&[Point3::origin(); 2], &[Point3::origin(); 2]),
        Err(FitError::DegenerateConfiguration(_))
    ));
}

#[test]
fn synthetic_fragment_is_recovered() {
    let start = Instant::now();
    let fx = fit_fixture(3, 21, 0.06);
    let run = fit_pipeline(&fx, &FitOptions::default()).unwrap();
    let p = &run.placement;
    assert!((p.template_scale - fx.truth.scale).abs() < 1e-6);
    assert!((p.fragment_pose.rotation - fx.truth.rotation.transpose()).amax() < 1e-6);
    let h = &run.report.history;
    let (first, last) = (h[0].mean_distance, h.last().unwrap().mean_distance);
    assert!(last <= 0.1 * first, "{first} -> {last}");
    assert!(h.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-9), "{h:?}");
    assert!(start.elapsed().as_secs() < 60);
}
