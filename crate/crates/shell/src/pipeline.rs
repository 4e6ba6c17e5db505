//! Engine workflows shared by the command line and the service.

use std::collections::BTreeSet;

use cageforge_core::annotation::{AttributeKind, Selector};
use cageforge_core::cage::{self, annotation_to_cage_vertices, CoordinateMatrix, DEFAULT_INFLUENCE_THRESHOLD};
use cageforge_core::fitting::{match_landmarks, nonrigid_fit, rigid_place, FitOptions, FitReport, LandmarkSet, Placement};
use cageforge_core::mesh::medial::approximate_medial_axis;
use cageforge_core::mesh::obb::compute_obb;
use cageforge_core::mesh::slice::{slice_by_plane, slice_descriptors, Plane};
use cageforge_core::solver::{build_session, SolverOptions};
use cageforge_core::{Annotation, Graph, Mesh};
use nalgebra::Point3;
use serde_json::{json, Value};

use crate::error::{Result, ShellError};
use crate::ops::{LandmarkEntry, ScriptStep};

/// Template positions driven by `cage`; the rest template itself while the
/// cage sits at its rest positions.
pub fn deformed_positions(template: &Mesh, coords: &CoordinateMatrix<f64>, rest: &Mesh, cage: &Mesh) -> Result<Vec<Point3<f64>>> {
    if cage.positions() == rest.positions() {
        return Ok(template.positions().to_vec());
    }
    Ok(cage::apply_deformation(coords, rest, cage)?)
}

pub fn select_handles(
    coords: &CoordinateMatrix<f64>,
    template: &Mesh,
    annotations: &[Annotation],
    id: u64,
    threshold: Option<f64>,
) -> Result<Vec<usize>> {
    let a = annotations
        .iter()
        .find(|a| a.id == id)
        .ok_or_else(|| ShellError::invalid("UnknownAnnotation", format!("unknown annotation {id}")))?;
    Ok(annotation_to_cage_vertices(coords, template, a, threshold.unwrap_or(DEFAULT_INFLUENCE_THRESHOLD)))
}

/// Apply each script step to the cage in order.
pub fn run_script(
    cage: &Mesh,
    steps: &[ScriptStep],
    coords: &CoordinateMatrix<f64>,
    template: &Mesh,
    annotations: &[Annotation],
) -> Result<Mesh> {
    let mut current = cage.clone();
    for (i, step) in steps.iter().enumerate() {
        let selection = match step.annotation {
            Some(id) => select_handles(coords, template, annotations, id, step.threshold)?,
            None => step.handles.clone(),
        };
        let op = step.request().handle_op()?;
        current = cage::manipulate_handles(&current, &selection, &op).map_err(|e| {
            let mut e = ShellError::from(e);
            e.message = format!("step {i}: {}", e.message);
            e
        })?;
    }
    Ok(current)
}

pub fn mesh_summary(mesh: &Mesh) -> Value {
    json!({
        "vertices": mesh.vertex_count(),
        "triangles": mesh.triangle_count(),
        "edges": mesh.edge_count(),
        "components": mesh.component_count(),
        "closed": mesh.is_closed(),
        "boundaryEdges": mesh.boundary_edges().len(),
        "eulerCharacteristic": mesh.euler_characteristic(),
        "genus": mesh.genus(),
        "surfaceArea": mesh.surface_area(),
        "diagonal": mesh.diagonal(),
        "obb": compute_obb(mesh.positions()),
    })
}

pub fn annotation_summary(mesh: &Mesh, annotations: &[Annotation]) -> Value {
    Value::Array(
        annotations
            .iter()
            .map(|a| {
                json!({
                    "id": a.id,
                    "tag": a.tag,
                    "type": a.selector.type_name(),
                    "vertices": a.vertices(mesh).len(),
                    "triangles": a.selector.interior().map(<[usize]>::len),
                    "attributes": a.attributes.len(),
                })
            })
            .collect(),
    )
}

/// Stored and freshly evaluated value of every measure.
pub fn measure_report(mesh: &Mesh, annotations: &[Annotation]) -> Result<Value> {
    let mut out = Vec::new();
    for a in annotations {
        for attr in &a.attributes {
            if let AttributeKind::Measure(m) = &attr.kind {
                out.push(json!({
                    "annotation": a.id,
                    "attribute": attr.id,
                    "name": attr.name,
                    "tool": m.tool.name(),
                    "stored": m.value(),
                    "value": m.evaluate(mesh)?,
                }));
            }
        }
    }
    Ok(Value::Array(out))
}

/// Slice loops, their descriptors and the medial-axis skeleton.
pub fn slice_record(mesh: &Mesh, plane: Plane<f64>, step: Option<f64>, pruning_deg: f64) -> Result<Value> {
    let slice = slice_by_plane(mesh, &plane);
    let descriptors = slice_descriptors(&slice)?;
    let step = step.unwrap_or(mesh.diagonal() / 200.0);
    let skeleton = approximate_medial_axis(&slice, step, pruning_deg)?;
    let p3 = |p: &Point3<f64>| [p.x, p.y, p.z];
    Ok(json!({
        "plane": {"normal": [plane.normal.x, plane.normal.y, plane.normal.z], "offset": plane.offset},
        "loops": slice.loops.iter().map(|l| l.iter().map(p3).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "chains": slice.chains.iter().map(|l| l.iter().map(p3).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "descriptors": descriptors,
        "skeleton": skeleton.iter().map(|[a, b]| [[a.x, a.y], [b.x, b.y]]).collect::<Vec<_>>(),
    }))
}

pub struct FitInput<'a> {
    pub template: &'a Mesh,
    pub annotations: &'a [Annotation],
    pub graph: Option<&'a Graph>,
    pub cage: &'a Mesh,
    pub coords: &'a CoordinateMatrix<f64>,
    pub fragment: &'a Mesh,
    pub fragment_annotations: &'a [Annotation],
    pub landmarks: Option<LandmarkSet>,
    pub solver: SolverOptions<f64>,
    pub fit: FitOptions<f64>,
}

pub struct FitOutcome {
    pub landmarks: LandmarkSet,
    pub placement: Placement<f64>,
    pub scaled_template: Mesh,
    pub scaled_cage: Mesh,
    pub fitted_cage: Mesh,
    pub fitted: Mesh,
    pub placed_fragment: Mesh,
    pub report: FitReport,
}

impl FitOutcome {
    pub fn report_json(&self) -> Value {
        let pose = &self.placement.fragment_pose;
        let landmarks: Vec<LandmarkEntry> = self
            .landmarks
            .pairs
            .iter()
            .map(|p| LandmarkEntry {
                template: p.template,
                fragment: p.fragment,
                tag: p.tag.clone(),
            })
            .collect();
        json!({
            "landmarks": landmarks,
            "placement": {
                "templateScale": self.placement.template_scale,
                "landmarkRms": self.placement.landmark_rms,
                "fragmentPose": {
                    "scale": pose.scale,
                    "rotation": (0..3).map(|r| (0..3).map(|c| pose.rotation[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "translation": [pose.translation.x, pose.translation.y, pose.translation.z],
                },
            },
            "fit": self.report,
        })
    }
}

/// Closeness over the template point annotations that sit on landmarks.
fn landmark_anchor(annotations: &[Annotation], landmarks: &LandmarkSet) -> Result<Graph> {
    let on_landmark: BTreeSet<usize> = landmarks.pairs.iter().map(|p| p.template).collect();
    let ids: Vec<u64> = annotations
        .iter()
        .filter(|a| matches!(&a.selector, Selector::Point(p) if p.iter().any(|v| on_landmark.contains(v))))
        .map(|a| a.id)
        .collect();
    let mut graph = Graph::new(annotations);
    if !ids.is_empty() {
        graph.add_relationship("Closeness", ids, false, Some(&json!({})))?;
    }
    Ok(graph)
}

/// Rigid placement followed by the non-rigid fit of the template's cage.
///
/// Without constraint relationships the landmark point annotations are held
/// in place by a Closeness constraint.
pub fn fit(input: FitInput<'_>) -> Result<FitOutcome> {
    let landmarks = match input.landmarks {
        Some(l) => l,
        None => match_landmarks(input.annotations, input.fragment_annotations)?,
    };
    let placement = rigid_place(input.template, input.fragment, &landmarks)?;
    let scaled_template = placement.scale_template(input.template);
    let scaled_cage = placement.scale_template(input.cage);
    let placed_fragment = placement.place_fragment(input.fragment);
    let graph = match input.graph {
        Some(g) if g.relationships.iter().any(|r| r.is_constraint()) => g.clone(),
        _ => landmark_anchor(input.annotations, &landmarks)?,
    };
    let mut session = build_session(&scaled_cage, input.coords, &scaled_template, &graph, input.annotations, &[], input.solver)?;
    let (positions, report) = nonrigid_fit(
        &mut session,
        input.coords,
        &scaled_template,
        input.annotations,
        &placed_fragment,
        input.fragment_annotations,
        &input.fit,
    )?;
    Ok(FitOutcome {
        landmarks,
        placement,
        fitted: scaled_template.with_positions(positions),
        fitted_cage: session.cage(),
        scaled_template,
        scaled_cage,
        placed_fragment,
        report,
    })
}
