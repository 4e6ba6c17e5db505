//! The golden file corpus and schema-violation fixtures.

use std::path::{Path, PathBuf};

use cageforge_core::annotation::{format as af, Annotation};
use cageforge_core::cage::io::{parse_coords, to_text};
use cageforge_core::mesh::{primitives, TriangleMesh};
use cageforge_core::semgraph::format as gf;
use serde_json::{json, Value};

/// Files whose bytes are not the writer's own output.
pub const HAND_EDITED: [&str; 4] = ["cube-corners.ann.json", "ico-lines.ann.json", "ico-regions-compact.graph.json", "tetra-in-cube.mvc.txt"];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

pub fn mesh_for(name: &str) -> TriangleMesh<f64> {
    match name.split(['-', '.']).next().unwrap() {
        "ico" | "empty" => primitives::icosphere(1.0, 2),
        "cube" => primitives::cube(),
        "torus" => primitives::torus(1.0, 0.4, 24, 12),
        other => panic!("no mesh for prefix {other}"),
    }
}

pub fn annotations_for_graph(name: &str) -> Vec<Annotation<f64>> {
    let base = name.trim_end_matches(".graph.json").trim_end_matches("-compact");
    let text = std::fs::read_to_string(golden_dir().join(format!("{base}.ann.json"))).unwrap();
    af::parse_annotations(&text, &mesh_for(base)).unwrap()
}

/// First and second canonical writes of a corpus file.
pub fn rewrite(name: &str, text: &str) -> (String, String) {
    if name.ends_with(".ann.json") {
        let mesh = mesh_for(name);
        let first = af::to_json(&af::parse_annotations(text, &mesh).unwrap());
        let second = af::to_json(&af::parse_annotations(&first, &mesh).unwrap());
        (first, second)
    } else if name.ends_with(".graph.json") {
        let anns = annotations_for_graph(name);
        let first = gf::to_json(&gf::parse_graph::<f64>(text, &anns).unwrap());
        let second = gf::to_json(&gf::parse_graph::<f64>(&first, &anns).unwrap());
        (first, second)
    } else {
        let first = to_text(&parse_coords::<f64>(text).unwrap());
        let second = to_text(&parse_coords::<f64>(&first).unwrap());
        (first, second)
    }
}

pub fn remove(doc: &mut Value, path: &[&str]) {
    let mut cur = doc;
    for (k, key) in path.iter().enumerate() {
        if k + 1 == path.len() {
            cur.as_object_mut().unwrap().shift_remove(*key).expect("field existed");
            return;
        }
        cur = match key.parse::<usize>() {
            Ok(i) => &mut cur[i],
            Err(_) => &mut cur[*key],
        };
    }
}

pub fn annotation_doc(mesh: &TriangleMesh<f64>) -> Value {
    let next = mesh.neighbors(0)[0];
    json!({"annotations": [
        {"id": 0, "tag": "body", "colour": [1, 2, 3], "attributes": [
            {"id": 0, "name": "fabric", "type": "semantic", "note": "clay"},
            {"id": 1, "name": "width", "type": "measure", "measure": {"tool": "ruler", "points": [0, 5]}},
            {"id": 2, "name": "extent", "type": "measure", "measure": {"tool": "bounding", "points": [0, 5, 7], "direction": [0.0, 0.0, 1.0]}}
        ], "type": "point", "points": [0, 5, 7]},
        {"id": 1, "tag": "seam", "colour": [0, 0, 0], "attributes": [], "type": "line", "polylines": [[0, next]]}
    ]})
}


pub fn graph_doc() -> Value {
    json!({"relationships": [
        {"id": 0, "type": "adjacency", "isDirected": false, "annotations": [0, 1], "isConstraint": false},
        {"id": 1, "type": "Distance", "isDirected": true, "annotations": [0, 1], "isConstraint": true, "weight": 2.0,
         "constraint": {"minValue": 0.5, "maxValue": 1.0}}
    ]})
}

/// Paths of every mandatory annotation field in [`annotation_doc`].
pub const ANNOTATION_FIELDS: &[&[&str]] = &[
    &["annotations"],
    &["annotations", "0", "id"],
    &["annotations", "0", "tag"],
    &["annotations", "0", "colour"],
    &["annotations", "0", "attributes"],
    &["annotations", "0", "type"],
    &["annotations", "0", "points"],
    &["annotations", "1", "polylines"],
    &["annotations", "0", "attributes", "0", "id"],
    &["annotations", "0", "attributes", "0", "name"],
    &["annotations", "0", "attributes", "0", "type"],
    &["annotations", "0", "attributes", "0", "note"],
    &["annotations", "0", "attributes", "1", "measure"],
    &["annotations", "0", "attributes", "1", "measure", "tool"],
    &["annotations", "0", "attributes", "1", "measure", "points"],
    &["annotations", "0", "attributes", "2", "measure", "direction"],
];

/// Paths of every mandatory graph field in [`graph_doc`].
pub const GRAPH_FIELDS: &[&[&str]] = &[
    &["relationships"],
    &["relationships", "0", "id"],
    &["relationships", "0", "type"],
    &["relationships", "0", "isDirected"],
    &["relationships", "0", "annotations"],
    &["relationships", "0", "isConstraint"],
    &["relationships", "1", "weight"],
    &["relationships", "1", "constraint"],
    &["relationships", "1", "constraint", "minValue"],
];
