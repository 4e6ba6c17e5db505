#![allow(dead_code)]

pub mod corpus;
pub mod oracle;

use std::collections::BTreeMap;

use cageforge_core::annotation::{region_loops, Annotation, Measure, SelectorSpec};
use cageforge_core::cage::generate::{generate_cage, CageOptions};
use cageforge_core::cage::{compute_mvc, CoordinateMatrix};
use cageforge_core::fitting::{match_landmarks, nonrigid_fit, rigid_place, FitError, FitOptions, FitReport, Placement, SimilarityTransform};
use cageforge_core::semgraph::RelationshipGraph;
use cageforge_core::solver::{build_session, SolverOptions};
use cageforge_core::mesh::{primitives, TriangleMesh};
use nalgebra::{DMatrix, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub struct Bound {
    pub cage: TriangleMesh<f64>,
    pub template: TriangleMesh<f64>,
    pub coords: CoordinateMatrix<f64>,
}

/// Unit icosphere inside a `[-1.5, 1.5]³` box, subdivided `levels` times.
pub fn sphere_in_box(levels: usize, sphere_levels: usize) -> Bound {
    let mut cage: TriangleMesh<f64> = primitives::boxed(Point3::new(-1.5, -1.5, -1.5), Point3::new(1.5, 1.5, 1.5));
    for _ in 0..levels {
        cage = primitives::midpoint_subdivide(&cage, |p| *p);
    }
    let template = primitives::icosphere(1.0, sphere_levels);
    let coords = compute_mvc(&template, &cage).unwrap();
    Bound { cage, template, coords }
}

pub fn point(mesh: &TriangleMesh<f64>, id: u64, v: usize) -> Annotation<f64> {
    Annotation::new(mesh, id, SelectorSpec::Point(vec![v]), format!("p{id}"), [200, 40, 40]).unwrap()
}

/// Template vertex closest to `p`.
pub fn nearest_vertex(mesh: &TriangleMesh<f64>, p: Point3<f64>) -> usize {
    mesh.positions()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - p).norm().total_cmp(&(b.1 - p).norm()))
        .unwrap()
        .0
}

/// Measure fixture: the equator point on +x and the south pole of the
/// sphere, with the box top dragged upward and its bottom held.
pub struct DragFixture {
    pub bound: Bound,
    pub anchors: [usize; 2],
    pub d0: f64,
    pub pins: Vec<usize>,
    pub targets: BTreeMap<usize, Point3<f64>>,
}

pub fn drag_fixture() -> DragFixture {
    let bound = sphere_in_box(2, 2);
    let a = nearest_vertex(&bound.template, Point3::new(1.0, 0.0, 0.0));
    let b = nearest_vertex(&bound.template, Point3::new(0.0, 0.0, -1.0));
    let d0 = (bound.template.position(a) - bound.template.position(b)).norm();
    let mut pins = Vec::new();
    let mut targets = BTreeMap::new();
    for (i, p) in bound.cage.positions().iter().enumerate() {
        if p.z > 1.4 {
            targets.insert(i, p + Vector3::new(0.0, 0.0, 1.2));
            pins.push(i);
        } else if p.z < -1.4 {
            pins.push(i);
        }
    }
    DragFixture {
        bound,
        anchors: [a, b],
        d0,
        pins,
        targets,
    }
}

pub struct FitFixture {
    pub bound: Bound,
    pub template_annotations: Vec<Annotation<f64>>,
    pub landmark_ids: Vec<u64>,
    pub fragment: TriangleMesh<f64>,
    pub fragment_annotations: Vec<Annotation<f64>>,
    /// Maps the deformed template frame onto the fragment.
    pub truth: SimilarityTransform<f64>,
    /// Ground-truth deformed template, in the template frame.
    pub deformed: Vec<Point3<f64>>,
    /// Template vertex behind every fragment vertex.
    pub origin: Vec<usize>,
}

/// Cap `z > 0.3` of a unit icosphere, deformed by a random cage displacement
/// that leaves the landmarks in place, then moved by a known similarity.
pub fn fit_fixture(sphere_levels: usize, seed: u64, amplitude: f64) -> FitFixture {
    let bound = sphere_in_box(1, sphere_levels);
    let t = &bound.template;
    let cap: Vec<usize> = (0..t.triangle_count())
        .filter(|&i| t.triangles()[i].iter().all(|&v| t.position(v).z > 0.3))
        .collect();
    let dirs = [
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.7, 0.0, 0.7),
        Vector3::new(0.0, 0.7, 0.7),
        Vector3::new(-0.55, -0.45, 0.7),
    ];
    let landmarks: Vec<usize> = dirs.iter().map(|d| nearest_vertex(t, Point3::from(d.normalize()))).collect();
    let tags = ["crown", "east", "north", "southwest"];

    let nc = bound.cage.vertex_count();
    let rows = DMatrix::from_fn(landmarks.len(), nc, |i, j| bound.coords.vertex[(landmarks[i], j)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(nc, 3, |_, _| rng.random_range(-1.0..1.0) * amplitude);
    let gram = (&rows * rows.transpose()).try_inverse().unwrap();
    let delta = &raw - rows.transpose() * (gram * (&rows * &raw));
    let cage_pts = DMatrix::from_fn(nc, 3, |i, k| bound.cage.position(i)[k]);
    let moved = &bound.coords.vertex * (cage_pts + delta);
    let deformed: Vec<Point3<f64>> = (0..t.vertex_count()).map(|i| Point3::new(moved[(i, 0)], moved[(i, 1)], moved[(i, 2)])).collect();

    let truth = SimilarityTransform {
        scale: 0.5,
        rotation: *Rotation3::new(Vector3::new(0.4, -0.9, 0.3)).matrix(),
        translation: Vector3::new(2.0, -1.0, 0.5),
    };
    let (piece, origin) = t.submesh(&cap).unwrap();
    let fragment = piece.with_positions(origin.iter().map(|&v| truth.apply(&deformed[v])).collect());

    let mut template_annotations = vec![Annotation::new(t, 0, SelectorSpec::Region(region_loops(t, &cap).unwrap()), "cap", [90, 160, 220]).unwrap()];
    let all: Vec<usize> = (0..fragment.triangle_count()).collect();
    let mut fragment_annotations =
        vec![Annotation::new(&fragment, 0, SelectorSpec::Region(region_loops(&fragment, &all).unwrap()), "cap", [90, 160, 220]).unwrap()];
    let mut landmark_ids = Vec::new();
    for (i, (&v, tag)) in landmarks.iter().zip(tags).enumerate() {
        let id = i as u64 + 1;
        landmark_ids.push(id);
        template_annotations.push(Annotation::new(t, id, SelectorSpec::Point(vec![v]), tag, [250, 200, 0]).unwrap());
        let f = origin.iter().position(|&o| o == v).expect("landmark inside the cap");
        fragment_annotations.push(Annotation::new(&fragment, id, SelectorSpec::Point(vec![f]), tag, [250, 200, 0]).unwrap());
    }
    FitFixture {
        bound,
        template_annotations,
        landmark_ids,
        fragment,
        fragment_annotations,
        truth,
        deformed,
        origin,
    }
}

pub struct FitRun {
    pub placement: Placement<f64>,
    pub placed_fragment: TriangleMesh<f64>,
    pub scaled_template: TriangleMesh<f64>,
    pub fitted: Vec<Point3<f64>>,
    pub report: FitReport,
}

/// Landmarks, rigid placement, then a non-rigid fit under landmark-holding
/// semantic constraints.
pub fn fit_pipeline(fx: &FitFixture, options: &FitOptions<f64>) -> Result<FitRun, FitError> {
    let b = &fx.bound;
    let landmarks = match_landmarks(&fx.template_annotations, &fx.fragment_annotations)?;
    let placement = rigid_place(&b.template, &fx.fragment, &landmarks)?;
    let scaled_template = placement.scale_template(&b.template);
    let scaled_cage = placement.scale_template(&b.cage);
    let placed_fragment = placement.place_fragment(&fx.fragment);

    let mut graph = RelationshipGraph::new(&fx.template_annotations);
    graph.add_relationship("Closeness", fx.landmark_ids.clone(), false, Some(&serde_json::json!({}))).unwrap();
    for w in landmarks.pairs.windows(2) {
        let d = (scaled_template.position(w[0].template) - scaled_template.position(w[1].template)).norm();
        let ids: Vec<u64> = w
            .iter()
            .map(|p| fx.template_annotations.iter().find(|a| a.tag == p.tag).unwrap().id)
            .collect();
        graph.add_relationship("Distance", ids, false, Some(&serde_json::json!({"minValue": d, "maxValue": d}))).unwrap();
    }
    let mut session = build_session(
        &scaled_cage,
        &b.coords,
        &scaled_template,
        &graph,
        &fx.template_annotations,
        &[],
        SolverOptions::default(),
    )?;
    let (fitted, report) = nonrigid_fit(
        &mut session,
        &b.coords,
        &scaled_template,
        &fx.template_annotations,
        &placed_fragment,
        &fx.fragment_annotations,
        options,
    )?;
    Ok(FitRun {
        placement,
        placed_fragment,
        scaled_template,
        fitted,
        report,
    })
}

pub fn scaled(mesh: &TriangleMesh<f64>, s: f64) -> TriangleMesh<f64> {
    mesh.with_positions(mesh.positions().iter().map(|p| Point3::from(p.coords * s)).collect())
}

/// Named template/cage pairs for coordinate checks.
pub fn coordinate_fixtures() -> Vec<(&'static str, TriangleMesh<f64>, TriangleMesh<f64>)> {
    let mut tetra: TriangleMesh<f64> = primitives::tetrahedron();
    for _ in 0..3 {
        tetra = primitives::midpoint_subdivide(&tetra, |p| *p);
    }
    let cube = primitives::boxed(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0));
    let boxed = primitives::midpoint_subdivide(&primitives::boxed(Point3::new(-1.5, -1.5, -1.5), Point3::new(1.5, 1.5, 1.5)), |p| *p);
    let torus: TriangleMesh<f64> = primitives::torus(1.0, 0.4, 48, 24);
    let torus_cage = generate_cage(&torus, &CageOptions { target_faces: 240, ..CageOptions::default() }).unwrap().cage;
    let sphere: TriangleMesh<f64> = primitives::icosphere(1.0, 3);
    let sphere_cage = generate_cage(&sphere, &CageOptions { target_faces: 100, ..CageOptions::default() }).unwrap().cage;
    vec![
        ("tetra-in-cube", scaled(&tetra, 0.8), cube),
        ("sphere-in-box", primitives::icosphere(1.0, 4), boxed),
        ("torus-in-offset-cage", torus, torus_cage),
        ("sphere-in-offset-cage", sphere, sphere_cage),
        ("uv-sphere-in-icosphere", primitives::uv_sphere(1.0, 24, 48), primitives::icosphere(2.0, 1)),
    ]
}

pub type SessionInputs = (Vec<Annotation<f64>>, RelationshipGraph<f64>, Vec<usize>, BTreeMap<usize, Point3<f64>>);

/// Random mix of every constraint kind on the small sphere-in-box binding.
pub fn random_session_inputs(seed: u64, b: &Bound) -> SessionInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = b.template.vertex_count();
    let mut anns = Vec::new();
    for id in 0..6u64 {
        let (p, q) = (rng.random_range(0..nt), rng.random_range(0..nt));
        let q = if p == q { (q + 1) % nt } else { q };
        let mut a = Annotation::new(&b.template, id, SelectorSpec::Point(vec![p, q]), format!("a{id}"), [0, 0, 0]).unwrap();
        a.add_measure(&b.template, "span", Measure::ruler(&b.template, p, q).unwrap());
        anns.push(a);
    }
    let mut g = RelationshipGraph::new(&anns);
    let scale = |rng: &mut ChaCha8Rng| rng.random_range(0.7..1.3);
    for _ in 0..rng.random_range(1..5) {
        let (i, j) = (rng.random_range(0..6u64), rng.random_range(0..6u64));
        let j = if i == j { (j + 1) % 6 } else { j };
        let w: f64 = rng.random_range(0.1..10.0);
        let directed = rng.random_bool(0.5);
        match rng.random_range(0..5) {
            0 => {
                let d = rng.random_range(0.5..2.0);
                g.add_relationship("Distance", vec![i, j], false, Some(&json!({"minValue": d, "maxValue": d * 1.1, "weight": w})))
            }
            1 => {
                let r = scale(&mut rng);
                g.add_relationship(
                    "Proportion",
                    vec![i, j],
                    directed,
                    Some(&json!({"measure1": 0, "measure2": 0, "minValue": r, "maxValue": r * 1.05, "weight": w})),
                )
            }
            2 => g.add_relationship("SameMeasure", vec![i, j], directed, Some(&json!({"measure1": 0, "measure2": 0, "weight": w}))),
            3 => {
                let e = b.cage.edges()[rng.random_range(0..b.cage.edge_count())];
                let s = scale(&mut rng);
                g.add_relationship(
                    "EdgeStrain",
                    vec![i, j],
                    false,
                    Some(&json!({"edge": e, "minValue": s, "maxValue": s, "weight": w})),
                )
            }
            _ => g.add_relationship("Closeness", vec![i, j], false, Some(&json!({"weight": w}))),
        }
        .unwrap();
    }
    let pins: Vec<usize> = (0..3).map(|_| rng.random_range(0..b.cage.vertex_count())).collect();
    let h = pins[0];
    let drag = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    let targets = BTreeMap::from([(h, b.cage.position(h) + drag)]);
    (anns, g, pins, targets)
}

/// Pairs bound with Green coordinates.
pub fn gc_fixtures() -> Vec<(&'static str, TriangleMesh<f64>, TriangleMesh<f64>)> {
    let cage = primitives::midpoint_subdivide(&primitives::boxed(Point3::new(-1.5, -1.5, -1.5), Point3::new(1.5, 1.5, 1.5)), |p| *p);
    vec![
        ("sphere-in-box", primitives::icosphere(1.0, 3), cage),
        ("sphere-in-icosphere", primitives::uv_sphere(1.0, 12, 24), primitives::icosphere(2.0, 1)),
    ]
}

/// Region of the triangles whose vertices all lie beyond `above` along `axis`.
pub fn cap_annotation(mesh: &TriangleMesh<f64>, axis: Vector3<f64>, above: f64, id: u64) -> Annotation<f64> {
    let tris: Vec<usize> = (0..mesh.triangle_count())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| mesh.position(v).coords.dot(&axis) > above))
        .collect();
    Annotation::new(mesh, id, SelectorSpec::Region(region_loops(mesh, &tris).unwrap()), "cap", [200, 40, 40]).unwrap()
}
