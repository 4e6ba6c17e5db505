//! Relationship graph over annotations.
//!
//! Nodes are annotation ids; arcs are [`Relationship`]s, possibly relating
//! more than two annotations. Some relationships carry a weighted constraint
//! whose parameters are checked against the [`registry`].

pub mod format;
pub mod registry;

use std::collections::{HashMap, HashSet};

use serde_json::Value;
use thiserror::Error;

use crate::annotation::{fill_boundary, Annotation, Selector};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

pub use format::{parse_graph, read_graph, to_json, write_graph};
pub use registry::ConstraintParams;

pub const CONTAINMENT: &str = "containment";
pub const ADJACENCY: &str = "adjacency";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schema error at '{field}': {message}")]
    Schema { field: String, message: String },
    #[error("relationship {relationship} references unknown annotation {annotation}")]
    DanglingAnnotationRef { relationship: u64, annotation: u64 },
    #[error("unknown annotation {0}")]
    UnknownAnnotation(u64),
    #[error("invalid constraint parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Real> {
    pub weight: T,
    pub params: ConstraintParams<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relationship<T: Real> {
    pub id: u64,
    pub kind: String,
    pub is_directed: bool,
    /// Related annotation ids; for directed arcs the last one is the head.
    pub annotations: Vec<u64>,
    pub constraint: Option<Constraint<T>>,
}

impl<T: Real> Relationship<T> {
    pub fn is_constraint(&self) -> bool {
        self.constraint.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationshipGraph<T: Real> {
    pub nodes: Vec<u64>,
    pub relationships: Vec<Relationship<T>>,
}

impl<T: Real> RelationshipGraph<T> {
    /// Empty graph with one node per annotation.
    pub fn new(annotations: &[Annotation<T>]) -> Self {
        Self {
            nodes: annotations.iter().map(|a| a.id).collect(),
            relationships: Vec::new(),
        }
    }

    fn next_id(&self) -> u64 {
        self.relationships.iter().map(|r| r.id + 1).max().unwrap_or(0)
    }

    /// Append a relationship. A parameter object turns it into a constraint;
    /// its optional `weight` entry (default 1) is split off before validation.
    pub fn add_relationship(
        &mut self,
        kind: &str,
        annotations: Vec<u64>,
        is_directed: bool,
        params: Option<&Value>,
    ) -> Result<&Relationship<T>, GraphError> {
        let constraint = match params {
            None => None,
            Some(v) => {
                let mut obj = v
                    .as_object()
                    .cloned()
                    .ok_or_else(|| GraphError::InvalidParams("parameters must be an object".into()))?;
                let weight = match obj.shift_remove("weight") {
                    None => T::one(),
                    Some(w) => T::lit(
                        w.as_f64()
                            .ok_or_else(|| GraphError::InvalidParams("weight must be a number".into()))?,
                    ),
                };
                let params = registry::validate(kind, &Value::Object(obj), annotations.len())
                    .map_err(GraphError::InvalidParams)?;
                Some(Constraint { weight, params })
            }
        };
        self.push(kind, annotations, is_directed, constraint)
    }

    pub fn add_constraint(
        &mut self,
        annotations: Vec<u64>,
        is_directed: bool,
        weight: T,
        params: ConstraintParams<T>,
    ) -> Result<&Relationship<T>, GraphError> {
        // round-trip through the registry so typed and JSON paths agree
        registry::validate::<T>(params.type_name(), &params.to_json(), annotations.len())
            .map_err(GraphError::InvalidParams)?;
        self.push(params.type_name(), annotations, is_directed, Some(Constraint { weight, params }))
    }

    fn push(
        &mut self,
        kind: &str,
        annotations: Vec<u64>,
        is_directed: bool,
        constraint: Option<Constraint<T>>,
    ) -> Result<&Relationship<T>, GraphError> {
        if annotations.len() < 2 {
            return Err(GraphError::InvalidParams(format!(
                "a relationship needs at least 2 annotations, got {}",
                annotations.len()
            )));
        }
        for a in &annotations {
            if !self.nodes.contains(a) {
                return Err(GraphError::UnknownAnnotation(*a));
            }
        }
        if let Some(c) = &constraint {
            if !(c.weight > T::zero()) {
                return Err(GraphError::InvalidParams("weight must be positive".into()));
            }
        }
        let id = self.next_id();
        self.relationships.push(Relationship {
            id,
            kind: kind.to_string(),
            is_directed,
            annotations,
            constraint,
        });
        Ok(self.relationships.last().expect("just pushed"))
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Relationship<T>> {
        self.relationships.iter().filter(|r| r.is_constraint())
    }

    /// Append extracted structural arcs with fresh ids.
    pub fn extend_structure(&mut self, extracted: Vec<Relationship<T>>) {
        for mut r in extracted {
            r.id = self.next_id();
            self.relationships.push(r);
        }
    }

    /// Whether the containment arcs form a directed acyclic graph.
    pub fn containment_is_acyclic(&self) -> bool {
        let mut out: HashMap<u64, Vec<u64>> = HashMap::new();
        for r in &self.relationships {
            if r.kind == CONTAINMENT && r.is_directed && r.annotations.len() == 2 {
                out.entry(r.annotations[0]).or_default().push(r.annotations[1]);
            }
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut state: HashMap<u64, u8> = HashMap::new();
        fn visit(v: u64, out: &HashMap<u64, Vec<u64>>, state: &mut HashMap<u64, u8>) -> bool {
            match state.get(&v) {
                Some(1) => return false,
                Some(2) => return true,
                _ => {}
            }
            state.insert(v, 1);
            for &w in out.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if !visit(w, out, state) {
                    return false;
                }
            }
            state.insert(v, 2);
            true
        }
        let mut keys: Vec<u64> = out.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter().all(|v| visit(v, &out, &mut state))
    }
}

/// Containment and adjacency arcs implied by the annotations' geometry.
///
/// Ids are assigned from 0 in order of the annotation ids involved, so the
/// result does not depend on the order of `annotations`.
pub fn extract_structure<T: Real>(mesh: &TriangleMesh<T>, annotations: &[Annotation<T>]) -> Vec<Relationship<T>> {
    let mut sorted: Vec<&Annotation<T>> = annotations.iter().collect();
    sorted.sort_by_key(|a| a.id);

    struct Info {
        id: u64,
        tris: Option<HashSet<usize>>,
        verts: HashSet<usize>,
        boundary: HashSet<[usize; 2]>,
    }
    let infos: Vec<Info> = sorted
        .iter()
        .map(|a| {
            let verts: HashSet<usize> = a.vertices(mesh).into_iter().collect();
            match &a.selector {
                Selector::Region { interior, .. } => Info {
                    id: a.id,
                    tris: Some(interior.iter().copied().collect()),
                    verts,
                    boundary: fill_boundary(mesh, interior),
                },
                _ => Info {
                    id: a.id,
                    tris: None,
                    verts,
                    boundary: HashSet::new(),
                },
            }
        })
        .collect();

    let mut out = Vec::new();
    let mut push = |kind: &str, directed: bool, a: u64, b: u64| {
        out.push(Relationship {
            id: out.len() as u64,
            kind: kind.to_string(),
            is_directed: directed,
            annotations: vec![a, b],
            constraint: None,
        });
    };
    for (i, a) in infos.iter().enumerate() {
        let Some(ta) = &a.tris else { continue };
        for (j, b) in infos.iter().enumerate() {
            if i == j {
                continue;
            }
            let contained = match &b.tris {
                Some(tb) => tb.len() < ta.len() && tb.is_subset(ta),
                None => !b.verts.is_empty() && b.verts.is_subset(&a.verts),
            };
            if contained {
                push(CONTAINMENT, true, a.id, b.id);
            }
            if let Some(tb) = &b.tris {
                if i < j && ta.is_disjoint(tb) && !a.boundary.is_disjoint(&b.boundary) {
                    push(ADJACENCY, false, a.id, b.id);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{SelectorSpec, Annotation};
    use crate::mesh::path::shortest_edge_path;
    use crate::mesh::primitives;
    use serde_json::json;

    fn ring(m: &TriangleMesh<f64>, corners: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 0..corners.len() {
            let p = shortest_edge_path(m, corners[k], corners[(k + 1) % corners.len()]).unwrap();
            out.extend_from_slice(&p.vertices[..p.vertices.len() - 1]);
        }
        out
    }

    fn halves(m: &TriangleMesh<f64>) -> (Annotation<f64>, Annotation<f64>) {
        let zig = ring(m, &[1, 6, 2, 7, 3, 8, 4, 9, 5, 10]);
        let first = Annotation::new(m, 1, SelectorSpec::Region(vec![zig.clone()]), "a", [0, 0, 0]).unwrap();
        let all: HashSet<usize> = (0..m.triangle_count()).collect();
        let taken: HashSet<usize> = first.selector.interior().unwrap().iter().copied().collect();
        let rest: Vec<usize> = all.difference(&taken).copied().collect();
        // the complement is bounded by the same loop; seed it from its own side
        let mut zig_rev = zig;
        zig_rev.reverse();
        let mut second = Annotation::new(m, 2, SelectorSpec::Region(vec![zig_rev]), "b", [0, 0, 0]).unwrap();
        if let Selector::Region { interior, .. } = &mut second.selector {
            let mut r = rest;
            r.sort_unstable();
            *interior = r;
        }
        (first, second)
    }

    #[test]
    fn hemispheres_are_adjacent() {
        let m: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
        let (a, b) = halves(&m);
        let rels = extract_structure(&m, &[a, b]);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].kind, ADJACENCY);
        assert!(!rels[0].is_directed);
    }

    #[test]
    fn nested_regions_contain() {
        let m: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
        let (half, _) = halves(&m);
        let cap = Annotation::new(&m, 7, SelectorSpec::Region(vec![ring(&m, &[1, 2, 3, 4, 5])]), "cap", [0, 0, 0]).unwrap();
        let tip = Annotation::new(&m, 8, SelectorSpec::Point(vec![0]), "pole", [0, 0, 0]).unwrap();
        let rels = extract_structure(&m, &[tip.clone(), cap.clone(), half.clone()]);
        let arcs: Vec<(String, u64, u64)> = rels
            .iter()
            .map(|r| (r.kind.clone(), r.annotations[0], r.annotations[1]))
            .collect();
        assert!(arcs.contains(&(CONTAINMENT.to_string(), 1, 7)));
        assert!(arcs.contains(&(CONTAINMENT.to_string(), 1, 8)));
        assert!(arcs.contains(&(CONTAINMENT.to_string(), 7, 8)));
        assert_eq!(rels, extract_structure(&m, &[half, tip, cap]));
    }

    #[test]
    fn opposite_cube_faces_are_unrelated() {
        let m: TriangleMesh<f64> = primitives::cube();
        let bottom = Annotation::new(&m, 0, SelectorSpec::Region(vec![vec![0, 1, 3, 2]]), "b", [0, 0, 0]).unwrap();
        let top = Annotation::new(&m, 1, SelectorSpec::Region(vec![vec![4, 5, 7, 6]]), "t", [0, 0, 0]).unwrap();
        let side = Annotation::new(&m, 2, SelectorSpec::Region(vec![vec![0, 1, 5, 4]]), "s", [0, 0, 0]).unwrap();
        assert_eq!(bottom.selector.interior().unwrap().len(), 2);
        assert!(extract_structure(&m, &[bottom.clone(), top.clone()]).is_empty());
        let rels = extract_structure(&m, &[bottom, top, side]);
        assert_eq!(rels.len(), 2);
        assert!(rels.iter().all(|r| r.kind == ADJACENCY));
    }

    #[test]
    fn add_relationship_validates() {
        let m: TriangleMesh<f64> = primitives::tetrahedron();
        let anns: Vec<Annotation<f64>> = (1..=3)
            .map(|i| Annotation::new(&m, i, SelectorSpec::Point(vec![i as usize]), "p", [0, 0, 0]).unwrap())
            .collect();
        let mut g = RelationshipGraph::new(&anns);
        assert!(!g.add_relationship(ADJACENCY, vec![1, 2], false, None).unwrap().is_constraint());
        let params = json!({"measure1": 0, "measure2": 0, "minValue": 0.9, "maxValue": 1.1, "weight": 1.0});
        let r = g.add_relationship("Proportion", vec![1, 2], true, Some(&params)).unwrap();
        assert!(r.is_constraint());
        assert_eq!(r.id, 1);
        assert!(matches!(
            g.add_relationship("Proportion", vec![1, 2, 3], true, Some(&params)),
            Err(GraphError::InvalidParams(_))
        ));
        assert!(matches!(
            g.add_relationship(ADJACENCY, vec![1, 9], false, None),
            Err(GraphError::UnknownAnnotation(9))
        ));
    }
}
