//! JSON relationship-graph files.
//!
//! Root key `relationships`; each arc carries `id`, `type`, `isDirected`,
//! `annotations`, `isConstraint`, then `weight` and `constraint` only for
//! constraint arcs. Nodes are not stored; they come from the annotation file.

use std::collections::HashSet;
use std::path::Path;

use serde_json::{Map, Value};

use super::{registry, Constraint, GraphError, Relationship, RelationshipGraph};
use crate::annotation::Annotation;
use crate::scalar::Real;

fn schema(field: impl Into<String>, message: impl Into<String>) -> GraphError {
    GraphError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn relationship_json<T: Real>(r: &Relationship<T>) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), Value::from(r.id));
    m.insert("type".into(), Value::from(r.kind.clone()));
    m.insert("isDirected".into(), Value::from(r.is_directed));
    m.insert("annotations".into(), Value::from(r.annotations.clone()));
    m.insert("isConstraint".into(), Value::from(r.is_constraint()));
    if let Some(c) = &r.constraint {
        m.insert("weight".into(), Value::from(c.weight.as_f64()));
        m.insert("constraint".into(), c.params.to_json());
    }
    Value::Object(m)
}

/// Canonical JSON text of a graph, newline-terminated.
pub fn to_json<T: Real>(graph: &RelationshipGraph<T>) -> String {
    let mut root = Map::new();
    root.insert(
        "relationships".into(),
        Value::Array(graph.relationships.iter().map(relationship_json).collect()),
    );
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("graph JSON is serializable");
    s.push('\n');
    s
}

pub fn write_graph<T: Real>(graph: &RelationshipGraph<T>, path: impl AsRef<Path>) -> Result<(), GraphError> {
    std::fs::write(path, to_json(graph))?;
    Ok(())
}

pub fn read_graph<T: Real>(path: impl AsRef<Path>, annotations: &[Annotation<T>]) -> Result<RelationshipGraph<T>, GraphError> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, annotations)
}

/// Parse and validate a graph file against the annotations it refers to.
pub fn parse_graph<T: Real>(text: &str, annotations: &[Annotation<T>]) -> Result<RelationshipGraph<T>, GraphError> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("$", format!("invalid JSON: {e}")))?;
    let root = root.as_object().ok_or_else(|| schema("$", "root must be an object"))?;
    let list = root
        .get("relationships")
        .ok_or_else(|| schema("relationships", "missing required field"))?
        .as_array()
        .ok_or_else(|| schema("relationships", "must be a list"))?;
    let mut graph = RelationshipGraph::new(annotations);
    let known: HashSet<u64> = graph.nodes.iter().copied().collect();
    let mut ids = HashSet::new();
    for (i, v) in list.iter().enumerate() {
        let base = format!("relationships[{i}]");
        let r = parse_relationship::<T>(v, &base, &known)?;
        if !ids.insert(r.id) {
            return Err(schema(format!("{base}.id"), format!("duplicate relationship id {}", r.id)));
        }
        graph.relationships.push(r);
    }
    Ok(graph)
}

fn parse_relationship<T: Real>(v: &Value, base: &str, known: &HashSet<u64>) -> Result<Relationship<T>, GraphError> {
    let obj = v.as_object().ok_or_else(|| schema(base, "relationship must be an object"))?;
    let field = |k: &str| -> Result<&Value, GraphError> {
        obj.get(k).ok_or_else(|| schema(format!("{base}.{k}"), "missing required field"))
    };
    for k in obj.keys() {
        if !["id", "type", "isDirected", "annotations", "isConstraint", "weight", "constraint"].contains(&k.as_str()) {
            return Err(schema(format!("{base}.{k}"), "unknown field"));
        }
    }
    let id = field("id")?
        .as_u64()
        .ok_or_else(|| schema(format!("{base}.id"), "must be a non-negative integer"))?;
    let kind = field("type")?
        .as_str()
        .ok_or_else(|| schema(format!("{base}.type"), "must be a string"))?
        .to_string();
    let is_directed = field("isDirected")?
        .as_bool()
        .ok_or_else(|| schema(format!("{base}.isDirected"), "must be a boolean"))?;
    let apath = format!("{base}.annotations");
    let arr = field("annotations")?
        .as_array()
        .ok_or_else(|| schema(&apath, "must be a list of annotation ids"))?;
    let mut anns = Vec::with_capacity(arr.len());
    for (k, x) in arr.iter().enumerate() {
        let a = x
            .as_u64()
            .ok_or_else(|| schema(format!("{apath}[{k}]"), "must be a non-negative integer"))?;
        if !known.contains(&a) {
            return Err(GraphError::DanglingAnnotationRef {
                relationship: id,
                annotation: a,
            });
        }
        anns.push(a);
    }
    if anns.len() < 2 {
        return Err(schema(&apath, "must relate at least 2 annotations"));
    }
    let is_constraint = field("isConstraint")?
        .as_bool()
        .ok_or_else(|| schema(format!("{base}.isConstraint"), "must be a boolean"))?;
    let constraint = if is_constraint {
        let wpath = format!("{base}.weight");
        let weight = field("weight")?
            .as_f64()
            .ok_or_else(|| schema(&wpath, "must be a number"))?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(schema(&wpath, "must be positive"));
        }
        let cpath = format!("{base}.constraint");
        let raw = field("constraint")?;
        if let Some(c) = raw.as_object() {
            if let Some(k) = registry::required_keys(&kind).iter().find(|k| !c.contains_key(**k)) {
                return Err(schema(format!("{cpath}.{k}"), "missing required field"));
            }
        }
        let params = registry::validate::<T>(&kind, raw, anns.len())
            .map_err(|m| schema(&cpath, m))?;
        Some(Constraint {
            weight: T::lit(weight),
            params,
        })
    } else {
        for k in ["weight", "constraint"] {
            if obj.contains_key(k) {
                return Err(schema(format!("{base}.{k}"), "only allowed when isConstraint is true"));
            }
        }
        None
    };
    Ok(Relationship {
        id,
        kind,
        is_directed,
        annotations: anns,
        constraint,
    })
}
