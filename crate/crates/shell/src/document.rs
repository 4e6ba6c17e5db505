//! The single annotated-mesh document held by the service.

use std::collections::BTreeMap;
use std::sync::Arc;

use cageforge_core::annotation::format as annotation_format;
use cageforge_core::cage::generate::{generate_cage, CageOptions};
use cageforge_core::cage::{self, CoordinateMatrix, CoordinateMethod};
use cageforge_core::fitting::{FitOptions, LandmarkSet};
use cageforge_core::semgraph::format as graph_format;
use cageforge_core::solver::{build_session, ResidualReport, SolverOptions, SolverSession};
use cageforge_core::{Annotation, Graph, Mesh};
use serde::Serialize;
use serde_json::{json, Value};

use crate::buffer::encode_vertices;
use crate::error::{Result, ShellError};
use crate::ops::MoveRequest;
use crate::pipeline::{self, deformed_positions, FitInput};

#[derive(Debug, Clone)]
pub struct Binding {
    pub coords: CoordinateMatrix<f64>,
    /// Cage positions the coordinates were computed against.
    pub rest: Mesh,
}

#[derive(Debug, Clone)]
pub struct Fragment {
    pub mesh: Mesh,
    pub annotations: Vec<Annotation>,
}

/// Streamed geometry of one revision.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Frame {
    pub revision: u64,
    pub vertex_count: usize,
    pub vertices: String,
    pub cage_vertices: Option<String>,
    pub residuals: Option<ResidualReport>,
}

/// Immutable view of a document revision.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub revision: u64,
    pub summary: Value,
    pub template: Option<Arc<Mesh>>,
    pub frame: Frame,
    pub annotations: Value,
    pub graph: Value,
}

#[derive(Default)]
pub struct Document {
    revision: u64,
    template: Option<Mesh>,
    annotations: Vec<Annotation>,
    graph: Graph,
    cage: Option<Mesh>,
    binding: Option<Binding>,
    session: Option<SolverSession<f64>>,
    residuals: Option<ResidualReport>,
    selection: Vec<usize>,
    fragments: Vec<Fragment>,
    /// Template geometry at the current cage.
    deformed: Option<Mesh>,
}

fn missing(what: &str) -> ShellError {
    ShellError::invalid("MissingState", format!("the document has no {what}"))
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn template(&self) -> Option<&Mesh> {
        self.deformed.as_ref()
    }

    pub fn cage(&self) -> Option<&Mesh> {
        self.cage.as_ref()
    }

    pub fn selection(&self) -> &[usize] {
        &self.selection
    }

    pub fn has_session(&self) -> bool {
        self.session.is_some()
    }

    fn rest_template(&self) -> Result<&Mesh> {
        self.template.as_ref().ok_or_else(|| missing("template"))
    }

    fn current_cage(&self) -> Result<&Mesh> {
        self.cage.as_ref().ok_or_else(|| missing("cage"))
    }

    fn binding(&self) -> Result<&Binding> {
        self.binding.as_ref().ok_or_else(|| missing("binding"))
    }

    fn refresh(&mut self) -> Result<()> {
        self.deformed = match (&self.template, &self.binding, &self.cage) {
            (Some(t), Some(b), Some(c)) => Some(t.with_positions(deformed_positions(t, &b.coords, &b.rest, c)?)),
            (t, _, _) => t.clone(),
        };
        Ok(())
    }

    fn commit(&mut self) -> Result<u64> {
        self.refresh()?;
        self.revision += 1;
        Ok(self.revision)
    }

    fn drop_session(&mut self) {
        self.session = None;
        self.residuals = None;
    }

    fn drop_binding(&mut self) {
        self.drop_session();
        self.binding = None;
        self.selection.clear();
    }

    /// Replace the template; annotations, graph and binding are discarded.
    pub fn set_template(&mut self, mesh: Mesh) -> Result<u64> {
        self.drop_binding();
        self.annotations.clear();
        self.graph = Graph::default();
        self.template = Some(mesh);
        self.commit()
    }

    pub fn set_cage(&mut self, mesh: Mesh) -> Result<u64> {
        if !mesh.is_closed() {
            return Err(ShellError::invalid("Precondition", "cage must be a closed manifold"));
        }
        self.drop_binding();
        self.cage = Some(mesh);
        self.commit()
    }

    /// Generate a cage around the template; returns the non-enclosed vertices.
    pub fn generate_cage(&mut self, options: &CageOptions<f64>) -> Result<(u64, Vec<usize>)> {
        let generated = generate_cage(self.rest_template()?, options)?;
        let r = self.set_cage(generated.cage)?;
        Ok((r, generated.violations))
    }

    pub fn set_annotations(&mut self, text: &str) -> Result<u64> {
        let annotations = annotation_format::parse_annotations(text, self.rest_template()?)?;
        self.drop_session();
        self.graph = Graph::new(&annotations);
        self.annotations = annotations;
        self.commit()
    }

    pub fn set_graph(&mut self, text: &str) -> Result<u64> {
        self.rest_template()?;
        let graph = graph_format::parse_graph(text, &self.annotations)?;
        self.drop_session();
        self.graph = graph;
        self.commit()
    }

    pub fn bind(&mut self, method: CoordinateMethod) -> Result<u64> {
        let template = self.deformed.as_ref().ok_or_else(|| missing("template"))?;
        let cage = self.current_cage()?;
        let coords = cage::compute_coords(method, template, cage)?;
        self.drop_binding();
        self.template = self.deformed.clone();
        self.binding = Some(Binding {
            coords,
            rest: self.cage.clone().expect("checked above"),
        });
        self.commit()
    }

    /// Compile the graph's constraints into a solver session at the current cage.
    pub fn build_session(&mut self, pins: Option<Vec<usize>>, options: SolverOptions<f64>) -> Result<u64> {
        let binding = self.binding()?;
        let template = self.deformed.as_ref().ok_or_else(|| missing("template"))?;
        let pins = pins.unwrap_or_else(|| self.selection.clone());
        let session = build_session(self.current_cage()?, &binding.coords, template, &self.graph, &self.annotations, &pins, options)?;
        self.drop_session();
        self.session = Some(session);
        self.commit()
    }

    /// Discard the session and return the cage to where it was when the
    /// session was built. Returns `None` when there was no session.
    pub fn withdraw(&mut self) -> Result<Option<u64>> {
        match self.session.take() {
            None => Ok(None),
            Some(s) => {
                self.residuals = None;
                self.cage = Some(s.rest_cage().clone());
                self.commit().map(Some)
            }
        }
    }

    pub fn select(&mut self, indices: Vec<usize>) -> Result<u64> {
        let n = self.current_cage()?.vertex_count();
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(ShellError::from(cage::CageError::HandleOutOfRange { index, count: n }));
        }
        let mut indices = indices;
        indices.sort_unstable();
        indices.dedup();
        self.selection = indices;
        self.commit()
    }

    pub fn select_annotation(&mut self, id: u64, threshold: Option<f64>) -> Result<u64> {
        let b = self.binding()?;
        let indices = pipeline::select_handles(&b.coords, self.rest_template()?, &self.annotations, id, threshold)?;
        self.select(indices)
    }

    /// Edit the selected handles: through the solver when a session exists,
    /// geometrically otherwise.
    pub fn move_handles(&mut self, request: &MoveRequest) -> Result<u64> {
        let op = request.handle_op()?;
        let cage = self.current_cage()?;
        let moved = cage::manipulate_handles(cage, &self.selection, &op)?;
        match &mut self.session {
            Some(session) => {
                let targets: BTreeMap<usize, _> = self.selection.iter().map(|&v| (v, *moved.position(v))).collect();
                let (solved, report) = session.solve(&targets)?;
                self.cage = Some(solved);
                self.residuals = Some(report);
            }
            None => self.cage = Some(moved),
        }
        self.commit()
    }

    /// Fit the bound template to a fragment. The template and cage are
    /// rescaled, the fitted cage becomes current and any session is withdrawn.
    pub fn fit(
        &mut self,
        fragment: Fragment,
        landmarks: Option<LandmarkSet>,
        solver: SolverOptions<f64>,
        options: FitOptions<f64>,
    ) -> Result<(u64, Value)> {
        let binding = self.binding()?;
        let template = self.deformed.as_ref().ok_or_else(|| missing("template"))?;
        let outcome = pipeline::fit(FitInput {
            template,
            annotations: &self.annotations,
            graph: Some(&self.graph),
            cage: self.current_cage()?,
            coords: &binding.coords,
            fragment: &fragment.mesh,
            fragment_annotations: &fragment.annotations,
            landmarks,
            solver,
            fit: options,
        })?;
        let report = outcome.report_json();
        let coords = binding.coords.clone();
        self.drop_session();
        self.template = Some(outcome.scaled_template);
        self.binding = Some(Binding {
            coords,
            rest: outcome.scaled_cage,
        });
        self.cage = Some(outcome.fitted_cage);
        self.fragments.push(Fragment {
            mesh: outcome.placed_fragment,
            annotations: fragment.annotations,
        });
        Ok((self.commit()?, report))
    }

    pub fn parse_fragment(text: &str, mesh: Mesh) -> Result<Fragment> {
        let annotations = annotation_format::parse_annotations(text, &mesh)?;
        Ok(Fragment { mesh, annotations })
    }

    pub fn frame(&self) -> Frame {
        let template = self.deformed.as_ref();
        Frame {
            revision: self.revision,
            vertex_count: template.map_or(0, Mesh::vertex_count),
            vertices: template.map(|t| encode_vertices(t.positions())).unwrap_or_default(),
            cage_vertices: self.cage.as_ref().map(|c| encode_vertices(c.positions())),
            residuals: self.residuals.clone(),
        }
    }

    pub fn summary(&self) -> Value {
        let counts = |m: &Mesh| json!({"vertices": m.vertex_count(), "triangles": m.triangle_count(), "edges": m.edge_count()});
        json!({
            "revision": self.revision,
            "template": self.template.as_ref().map(counts),
            "annotations": self.annotations.len(),
            "relationships": self.graph.relationships.len(),
            "constraints": self.graph.relationships.iter().filter(|r| r.is_constraint()).count(),
            "cage": self.cage.as_ref().map(counts),
            "binding": self.binding.as_ref().map(|b| b.coords.method.title()),
            "session": self.session.as_ref().map(|s| json!({"pins": s.pinned(), "solved": s.residuals().is_ok()})),
            "selection": self.selection,
            "fragments": self.fragments.iter().map(|f| json!({
                "vertices": f.mesh.vertex_count(),
                "triangles": f.mesh.triangle_count(),
                "annotations": f.annotations.len(),
            })).collect::<Vec<_>>(),
            "residuals": self.residuals,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        let parse = |s: String| serde_json::from_str(&s).expect("engine writers emit valid JSON");
        Snapshot {
            revision: self.revision,
            summary: self.summary(),
            template: self.deformed.clone().map(Arc::new),
            frame: self.frame(),
            annotations: parse(annotation_format::to_json(&self.annotations)),
            graph: parse(graph_format::to_json(&self.graph)),
        }
    }
}
