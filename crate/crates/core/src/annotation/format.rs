//! JSON annotation files.
//!
//! The writer is canonical: keys follow the schema order (`id`, `tag`,
//! `colour`, `attributes`, `type`, then the selector field) and output is
//! pretty-printed with two-space indentation. Region interiors and cached
//! measure values are derived and never written.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;
use serde_json::{Map, Value};

use super::{schema, Annotation, AnnotationError, Attribute, AttributeKind, Measure, MeasureTool, Selector, SelectorSpec};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

#[derive(Serialize)]
struct FileOut<'a> {
    annotations: Vec<AnnotationOut<'a>>,
}

#[derive(Serialize)]
struct AnnotationOut<'a> {
    id: u64,
    tag: &'a str,
    colour: [u8; 3],
    attributes: Vec<AttributeOut<'a>>,
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polylines: Option<&'a [Vec<usize>]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundaries: Option<&'a [Vec<usize>]>,
}

#[derive(Serialize)]
struct AttributeOut<'a> {
    id: u64,
    name: &'a str,
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<MeasureOut<'a>>,
}

#[derive(Serialize)]
struct MeasureOut<'a> {
    tool: &'static str,
    points: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<[f64; 3]>,
}

/// Canonical JSON text of an annotation list, newline-terminated.
pub fn to_json<T: Real>(annotations: &[Annotation<T>]) -> String {
    let file = FileOut {
        annotations: annotations
            .iter()
            .map(|a| {
                let (points, polylines, boundaries) = match &a.selector {
                    Selector::Point(p) => (Some(p.as_slice()), None, None),
                    Selector::Line(l) => (None, Some(l.as_slice()), None),
                    Selector::Region { boundaries, .. } => (None, None, Some(boundaries.as_slice())),
                };
                AnnotationOut {
                    id: a.id,
                    tag: &a.tag,
                    colour: a.colour,
                    attributes: a.attributes.iter().map(attribute_out).collect(),
                    kind: a.selector.type_name(),
                    points,
                    polylines,
                    boundaries,
                }
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("annotation serialization cannot fail");
    s.push('\n');
    s
}

fn attribute_out<T: Real>(a: &Attribute<T>) -> AttributeOut<'_> {
    match &a.kind {
        AttributeKind::Semantic { note } => AttributeOut {
            id: a.id,
            name: &a.name,
            kind: "semantic",
            note: Some(note),
            measure: None,
        },
        AttributeKind::Measure(m) => AttributeOut {
            id: a.id,
            name: &a.name,
            kind: "measure",
            note: None,
            measure: Some(MeasureOut {
                tool: m.tool.name(),
                points: &m.points,
                direction: match m.tool {
                    MeasureTool::Bounding { direction } => {
                        Some([direction.x.as_f64(), direction.y.as_f64(), direction.z.as_f64()])
                    }
                    _ => None,
                },
            }),
        },
    }
}

pub fn write_annotations<T: Real>(annotations: &[Annotation<T>], path: impl AsRef<Path>) -> Result<(), AnnotationError> {
    std::fs::write(path, to_json(annotations))?;
    Ok(())
}

pub fn read_annotations<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>) -> Result<Vec<Annotation<T>>, AnnotationError> {
    let text = std::fs::read_to_string(path)?;
    parse_annotations(&text, mesh)
}

/// Parse and validate an annotation file against `mesh`.
pub fn parse_annotations<T: Real>(text: &str, mesh: &TriangleMesh<T>) -> Result<Vec<Annotation<T>>, AnnotationError> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("$", format!("invalid JSON: {e}")))?;
    let root = root.as_object().ok_or_else(|| schema("$", "root must be an object"))?;
    let list = required(root, "annotations", "annotations")?
        .as_array()
        .ok_or_else(|| schema("annotations", "must be a list"))?;
    let mut out = Vec::with_capacity(list.len());
    let mut ids = HashSet::new();
    for (i, item) in list.iter().enumerate() {
        let base = format!("annotations[{i}]");
        let a = parse_annotation(item, &base, mesh)?;
        if !ids.insert(a.id) {
            return Err(schema(format!("{base}.id"), format!("duplicate annotation id {}", a.id)));
        }
        out.push(a);
    }
    Ok(out)
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, AnnotationError> {
    obj.get(key).ok_or_else(|| schema(path, "missing required field"))
}

fn forbid(obj: &Map<String, Value>, keys: &[&str], base: &str, why: &str) -> Result<(), AnnotationError> {
    for k in keys {
        if obj.contains_key(*k) {
            return Err(schema(format!("{base}.{k}"), why.to_string()));
        }
    }
    Ok(())
}

fn as_id(v: &Value, path: &str) -> Result<u64, AnnotationError> {
    v.as_u64().ok_or_else(|| schema(path, "must be a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, AnnotationError> {
    v.as_str().ok_or_else(|| schema(path, "must be a string"))
}

fn index_list<T: Real>(v: &Value, path: &str, mesh: &TriangleMesh<T>) -> Result<Vec<usize>, AnnotationError> {
    let arr = v.as_array().ok_or_else(|| schema(path, "must be a list of vertex indices"))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| {
            let field = format!("{path}[{k}]");
            let idx = x.as_u64().ok_or_else(|| schema(&field, "must be a non-negative integer"))? as usize;
            if idx >= mesh.vertex_count() {
                return Err(AnnotationError::IndexOutOfRange {
                    field,
                    index: idx,
                    count: mesh.vertex_count(),
                });
            }
            Ok(idx)
        })
        .collect()
}

fn index_lists<T: Real>(v: &Value, path: &str, mesh: &TriangleMesh<T>) -> Result<Vec<Vec<usize>>, AnnotationError> {
    let arr = v.as_array().ok_or_else(|| schema(path, "must be a list of lists"))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| index_list(x, &format!("{path}[{k}]"), mesh))
        .collect()
}

fn parse_annotation<T: Real>(v: &Value, base: &str, mesh: &TriangleMesh<T>) -> Result<Annotation<T>, AnnotationError> {
    let obj = v.as_object().ok_or_else(|| schema(base, "annotation must be an object"))?;
    let id = as_id(required(obj, "id", &format!("{base}.id"))?, &format!("{base}.id"))?;
    let tag = as_str(required(obj, "tag", &format!("{base}.tag"))?, &format!("{base}.tag"))?.to_string();

    let cpath = format!("{base}.colour");
    let colour_v = required(obj, "colour", &cpath)?
        .as_array()
        .ok_or_else(|| schema(&cpath, "must be a list of 3 integers"))?;
    if colour_v.len() != 3 {
        return Err(schema(&cpath, format!("must have 3 components, got {}", colour_v.len())));
    }
    let mut colour = [0u8; 3];
    for (k, c) in colour_v.iter().enumerate() {
        colour[k] = c
            .as_u64()
            .filter(|&x| x <= 255)
            .ok_or_else(|| schema(format!("{cpath}[{k}]"), "must be an integer in 0..=255"))? as u8;
    }

    let tpath = format!("{base}.type");
    let kind = as_str(required(obj, "type", &tpath)?, &tpath)?;
    let spec = match kind {
        "point" => {
            forbid(obj, &["polylines", "boundaries"], base, "only allowed for other selector types")?;
            let p = format!("{base}.points");
            SelectorSpec::Point(index_list(required(obj, "points", &p)?, &p, mesh)?)
        }
        "line" => {
            forbid(obj, &["points", "boundaries"], base, "only allowed for other selector types")?;
            let p = format!("{base}.polylines");
            SelectorSpec::Line(index_lists(required(obj, "polylines", &p)?, &p, mesh)?)
        }
        "region" => {
            forbid(obj, &["points", "polylines"], base, "only allowed for other selector types")?;
            let p = format!("{base}.boundaries");
            SelectorSpec::Region(index_lists(required(obj, "boundaries", &p)?, &p, mesh)?)
        }
        other => {
            return Err(schema(
                &tpath,
                format!("unknown selector type '{other}' (expected point, line or region)"),
            ))
        }
    };

    let mut annotation = Annotation::new(mesh, id, spec, tag, colour)?;
    let apath = format!("{base}.attributes");
    let list = required(obj, "attributes", &apath)?
        .as_array()
        .ok_or_else(|| schema(&apath, "must be a list"))?;
    let mut seen = HashSet::new();
    for (k, item) in list.iter().enumerate() {
        let path = format!("{apath}[{k}]");
        let attr = parse_attribute(item, &path, mesh)?;
        if !seen.insert(attr.id) {
            return Err(schema(format!("{path}.id"), format!("duplicate attribute id {}", attr.id)));
        }
        annotation.attributes.push(attr);
    }
    Ok(annotation)
}

fn parse_attribute<T: Real>(v: &Value, base: &str, mesh: &TriangleMesh<T>) -> Result<Attribute<T>, AnnotationError> {
    let obj = v.as_object().ok_or_else(|| schema(base, "attribute must be an object"))?;
    let id = as_id(required(obj, "id", &format!("{base}.id"))?, &format!("{base}.id"))?;
    let name = as_str(required(obj, "name", &format!("{base}.name"))?, &format!("{base}.name"))?.to_string();
    let tpath = format!("{base}.type");
    let kind = match as_str(required(obj, "type", &tpath)?, &tpath)? {
        "semantic" => {
            forbid(obj, &["measure"], base, "only allowed when type is 'measure'")?;
            let p = format!("{base}.note");
            AttributeKind::Semantic {
                note: as_str(required(obj, "note", &p)?, &p)?.to_string(),
            }
        }
        "measure" => {
            forbid(obj, &["note"], base, "only allowed when type is 'semantic'")?;
            let p = format!("{base}.measure");
            AttributeKind::Measure(parse_measure(required(obj, "measure", &p)?, &p, mesh)?)
        }
        other => {
            return Err(schema(
                &tpath,
                format!("unknown attribute type '{other}' (expected semantic or measure)"),
            ))
        }
    };
    Ok(Attribute { id, name, kind })
}

fn parse_measure<T: Real>(v: &Value, base: &str, mesh: &TriangleMesh<T>) -> Result<Measure<T>, AnnotationError> {
    let obj = v.as_object().ok_or_else(|| schema(base, "measure must be an object"))?;
    let tool_path = format!("{base}.tool");
    let tool_name = as_str(required(obj, "tool", &tool_path)?, &tool_path)?;
    let ppath = format!("{base}.points");
    let points = index_list(required(obj, "points", &ppath)?, &ppath, mesh)?;
    let dpath = format!("{base}.direction");
    let tool = match tool_name {
        "ruler" | "tape" => {
            if obj.contains_key("direction") {
                return Err(schema(&dpath, "only allowed when tool is 'bounding'"));
            }
            if tool_name == "ruler" {
                if points.len() != 2 {
                    return Err(schema(&ppath, format!("ruler needs exactly 2 points, got {}", points.len())));
                }
                MeasureTool::Ruler
            } else {
                if points.len() < 2 {
                    return Err(schema(&ppath, format!("tape needs at least 2 points, got {}", points.len())));
                }
                MeasureTool::Tape
            }
        }
        "bounding" => {
            let arr = required(obj, "direction", &dpath)?
                .as_array()
                .ok_or_else(|| schema(&dpath, "must be a list of 3 numbers"))?;
            if arr.len() != 3 {
                return Err(schema(&dpath, format!("must have 3 components, got {}", arr.len())));
            }
            let mut d = [0.0; 3];
            for (k, x) in arr.iter().enumerate() {
                d[k] = x.as_f64().ok_or_else(|| schema(format!("{dpath}[{k}]"), "must be a number"))?;
            }
            let dir = Vector3::new(T::lit(d[0]), T::lit(d[1]), T::lit(d[2]));
            if !(dir.norm() > T::zero()) {
                return Err(schema(&dpath, "must be nonzero"));
            }
            if points.is_empty() {
                return Err(schema(&ppath, "bounding needs at least 1 point"));
            }
            MeasureTool::Bounding { direction: dir }
        }
        other => {
            return Err(schema(
                &tool_path,
                format!("unknown tool '{other}' (expected ruler, tape or bounding)"),
            ))
        }
    };
    Measure::new(mesh, tool, points)
}
