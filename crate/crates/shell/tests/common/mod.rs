#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use cageforge_core::annotation::{format as annotation_format, region_loops, Annotation, SelectorSpec};
use cageforge_core::fitting::SimilarityTransform;
use cageforge_core::mesh::io::save_mesh;
use cageforge_core::mesh::{primitives, TriangleMesh};
use cageforge_core::semgraph::{format as graph_format, RelationshipGraph};
use nalgebra::{Point3, Rotation3, Vector3};
use serde_json::json;
use tempfile::TempDir;

pub type Mesh = TriangleMesh<f64>;

pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    pub fn mesh(&self, name: &str, mesh: &Mesh) -> String {
        save_mesh(mesh, self.path(name), None).unwrap();
        self.arg(name)
    }

    pub fn text(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }

    pub fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    pub fn bytes(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap()
    }
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the built binary.
pub fn cageforge(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_cageforge")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn box_cage(levels: usize) -> Mesh {
    let mut cage = primitives::boxed(Point3::new(-1.5, -1.5, -1.5), Point3::new(1.5, 1.5, 1.5));
    for _ in 0..levels {
        cage = primitives::midpoint_subdivide(&cage, |p| *p);
    }
    cage
}

pub fn nearest_vertex(mesh: &Mesh, p: Point3<f64>) -> usize {
    (0..mesh.vertex_count())
        .min_by(|&a, &b| (mesh.position(a) - p).norm().total_cmp(&(mesh.position(b) - p).norm()))
        .unwrap()
}

pub fn point(mesh: &Mesh, id: u64, v: usize, tag: &str) -> Annotation<f64> {
    Annotation::new(mesh, id, SelectorSpec::Point(vec![v]), tag, [200, 40, 40]).unwrap()
}

/// Sphere in a box with two point annotations at odds: two Distance
/// constraints on the same pair with ranges symmetric about the rest
/// distance. The bottom cage layer is held; the top one is held too, or
/// dragged upward with `drag`.
pub struct Conflict {
    pub template: Mesh,
    pub cage: Mesh,
    pub annotations: String,
    pub graph: String,
    pub pins: String,
    pub d0: f64,
}

pub fn conflict(drag: bool) -> Conflict {
    let template: Mesh = primitives::icosphere(1.0, 2);
    let cage = box_cage(2);
    let a = nearest_vertex(&template, Point3::new(1.0, 0.0, 0.0));
    let b = nearest_vertex(&template, Point3::new(0.0, 0.0, -1.0));
    let d0 = (template.position(a) - template.position(b)).norm();
    let anns = vec![point(&template, 1, a, "a"), point(&template, 2, b, "b")];
    let mut g = RelationshipGraph::new(&anns);
    g.add_relationship("Distance", vec![1, 2], false, Some(&json!({"minValue": d0 * 0.6, "maxValue": d0 * 0.7})))
        .unwrap();
    g.add_relationship("Distance", vec![1, 2], false, Some(&json!({"minValue": d0 * 1.3, "maxValue": d0 * 1.4})))
        .unwrap();
    let mut handles = Vec::new();
    for (i, p) in cage.positions().iter().enumerate() {
        if drag && p.z > 1.4 {
            handles.push(json!({"vertex": i, "target": [p.x, p.y, p.z + 1.2]}));
        } else if p.z.abs() > 1.4 {
            handles.push(json!({"vertex": i}));
        }
    }
    Conflict {
        annotations: annotation_format::to_json(&anns),
        graph: graph_format::to_json(&g),
        pins: json!({ "handles": handles }).to_string(),
        template,
        cage,
        d0,
    }
}

/// A template sphere with four landmarks and a tagged cap, and a fragment
/// cut from the cap, bulged and moved by a known similarity.
pub struct FitCase {
    pub template: Mesh,
    pub cage: Mesh,
    pub annotations: String,
    pub fragment: Mesh,
    pub fragment_annotations: String,
    pub scale: f64,
}

pub fn fit_case() -> FitCase {
    let template: Mesh = primitives::icosphere(1.0, 3);
    let cage = box_cage(1);
    let cap: Vec<usize> = (0..template.triangle_count())
        .filter(|&t| template.triangles()[t].iter().all(|&v| template.position(v).z > 0.2))
        .collect();
    let spots = [
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.55, 0.0, 0.83),
        Point3::new(-0.3, 0.5, 0.8),
        Point3::new(0.0, -0.55, 0.83),
    ];
    let marks: Vec<usize> = spots.iter().map(|p| nearest_vertex(&template, *p)).collect();
    let mut t_anns: Vec<Annotation<f64>> = marks.iter().enumerate().map(|(i, &v)| point(&template, i as u64, v, &format!("l{i}"))).collect();
    t_anns.push(Annotation::new(&template, 10, SelectorSpec::Region(region_loops(&template, &cap).unwrap()), "cap", [0, 120, 200]).unwrap());

    let (piece, origin) = template.submesh(&cap).unwrap();
    let bulged = piece.with_positions(piece.positions().iter().map(|p| Point3::from(p.coords * (1.0 + 0.08 * p.z * p.z))).collect());
    let scale = 1.5;
    let pose = SimilarityTransform {
        scale,
        rotation: *Rotation3::new(Vector3::new(0.3, -0.2, 0.5)).matrix(),
        translation: Vector3::new(0.4, -1.0, 2.0),
    };
    let fragment = pose.apply_mesh(&bulged);
    let local = |v: usize| origin.iter().position(|&o| o == v).unwrap();
    let mut f_anns: Vec<Annotation<f64>> = marks.iter().enumerate().map(|(i, &v)| point(&fragment, i as u64, local(v), &format!("l{i}"))).collect();
    let all: Vec<usize> = (0..fragment.triangle_count()).collect();
    f_anns.push(Annotation::new(&fragment, 10, SelectorSpec::Region(region_loops(&fragment, &all).unwrap()), "cap", [0, 120, 200]).unwrap());
    FitCase {
        annotations: annotation_format::to_json(&t_anns),
        fragment_annotations: annotation_format::to_json(&f_anns),
        template,
        cage,
        fragment,
        scale,
    }
}
