//! Constrained cage deformation by local-global iteration.
//!
//! Variables are the cage vertex positions `X` (n × 3). Every constraint is a
//! small linear operator `A` (k × n) mapping `X` to k 3D vectors, together with
//! a projection onto its feasible set. Template anchors enter through their
//! coordinate rows, so constraints follow the template under any cage motion.
//!
//! Each iteration projects the current `A X` of every constraint (local step)
//! and then solves the prefactored normal equations
//! `(Σ w AᵀA + ρ LᵀL) X = Σ w Aᵀ P + ρ LᵀL X₀` (global step), where `L` maps
//! the cage to its edge vectors and `ρ` is a small shape-keeping weight.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Point3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::annotation::Annotation;
use crate::cage::{CoordinateMatrix, CoordinateMethod};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::semgraph::{ConstraintParams, RelationshipGraph};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Green coordinate bindings cannot drive the constrained solver")]
    GreenCoordsUnsupported,
    #[error("relationship {relationship}: annotation {annotation} has no measure {index}")]
    UnresolvableMeasure {
        relationship: u64,
        annotation: u64,
        index: usize,
    },
    #[error("relationship {relationship} references unknown annotation {annotation}")]
    UnknownAnnotation { relationship: u64, annotation: u64 },
    #[error("relationship {relationship}: {message}")]
    InvalidConstraint { relationship: u64, message: String },
    #[error("cage component {0} has no anchoring constraint")]
    Unanchored(usize),
    #[error("global system is not positive definite")]
    Singular,
    #[error("handle {index} out of range ({count} cage vertices)")]
    HandleOutOfRange { index: usize, count: usize },
    #[error("coordinate matrix does not match the cage or template: {0}")]
    BindingMismatch(String),
    #[error("session has not been solved yet")]
    NeverSolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintKind {
    Closeness,
    EdgeStrain,
    DistanceRange,
    Proportion,
    SameMeasure,
}

/// Where a constraint instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase", tag = "source", content = "id")]
pub enum ConstraintSource {
    Relationship(u64),
    /// A pinned cage vertex.
    Pin(usize),
    /// A fitting correspondence on a template vertex.
    Correspondence(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Projection<T: Real> {
    Target(Vector3<T>),
    /// Length of the single operator output clamped into `[min, max]`.
    Length { min: T, max: T, fallback: Vector3<T> },
    /// Ratio of the two operator output lengths clamped into `[min, max]`.
    Ratio { min: T, max: T, directed: bool },
}

impl<T: Real> Projection<T> {
    fn apply(&self, current: &[Vector3<T>]) -> Vec<Vector3<T>> {
        match self {
            Projection::Target(t) => vec![*t],
            Projection::Length { min, max, fallback } => {
                let u = current[0];
                let d = u.norm();
                let goal = d.max(*min).min(*max);
                if d > T::zero() {
                    vec![u * (goal / d)]
                } else {
                    vec![fallback * goal]
                }
            }
            Projection::Ratio { min, max, directed } => {
                let (u1, u2) = (current[0], current[1]);
                let (d1, d2) = (u1.norm(), u2.norm());
                if !(d1 > T::zero() && d2 > T::zero()) {
                    return current.to_vec();
                }
                let r = d1 / d2;
                let goal = r.max(*min).min(*max);
                let g = goal.ln() - r.ln();
                let two = T::lit(2.0);
                let (s1, s2) = if *directed {
                    (T::one(), (-g).exp())
                } else {
                    ((g / two).exp(), (-g / two).exp())
                };
                vec![u1 * s1, u2 * s2]
            }
        }
    }
}

/// One compiled constraint: weighted operator rows and a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintInstance<T: Real> {
    pub source: ConstraintSource,
    pub kind: ConstraintKind,
    pub weight: T,
    rows: Vec<DVector<T>>,
    projection: Projection<T>,
}

impl<T: Real> ConstraintInstance<T> {
    /// Operator outputs `A X` for cage positions `x` (n × 3).
    fn outputs(&self, x: &DMatrix<T>) -> Vec<Vector3<T>> {
        self.rows
            .iter()
            .map(|r| {
                let v = x.tr_mul(r);
                Vector3::new(v[0], v[1], v[2])
            })
            .collect()
    }

    fn gap(&self, outputs: &[Vector3<T>], projected: &[Vector3<T>]) -> T {
        outputs
            .iter()
            .zip(projected)
            .fold(T::zero(), |a, (o, p)| a + (o - p).norm_squared())
            .sqrt()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T: Real> {
    pub max_iterations: usize,
    /// Convergence threshold on the largest vertex step, relative to the cage diagonal.
    pub tolerance: T,
    /// Pin weight as a multiple of the largest constraint weight.
    pub pin_weight_factor: T,
    /// Shape-keeping weight as a multiple of the largest constraint weight.
    pub shape_weight_factor: T,
    /// A constraint is satisfied when its residual is below this times the cage diagonal.
    pub satisfied_tolerance: T,
    /// Number of past iterates mixed by Anderson acceleration (0 disables it).
    pub acceleration_depth: usize,
    /// Extend each step by doubling while the energy keeps falling.
    pub line_search: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: T::lit(1e-7),
            pin_weight_factor: T::lit(1e4),
            shape_weight_factor: T::lit(1e-5),
            satisfied_tolerance: T::lit(1e-6),
            acceleration_depth: 5,
            line_search: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstraintResidual {
    #[serde(flatten)]
    pub source: ConstraintSource,
    pub kind: ConstraintKind,
    pub weight: f64,
    pub residual: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualReport {
    pub constraints: Vec<ConstraintResidual>,
    /// Σ weight × residual² over the constraints.
    pub total_energy: f64,
    /// Energy of the shape-keeping term, not included in `total_energy`.
    pub shape_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Full objective (constraints plus shape term) after each iteration, starting at the initial state.
    pub energy_history: Vec<f64>,
}

/// Anderson extrapolation of the fixed-point map `x ↦ global(project(x))`.
/// Extrapolated iterates are only accepted by the caller when they do not
/// increase the energy.
#[derive(Debug, Clone)]
struct Anderson<T: Real> {
    depth: usize,
    last: Option<(DVector<T>, DVector<T>)>,
    dg: Vec<DVector<T>>,
    df: Vec<DVector<T>>,
}

impl<T: Real> Anderson<T> {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            last: None,
            dg: Vec::new(),
            df: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.last = None;
        self.dg.clear();
        self.df.clear();
    }

    /// Record `g = G(x)` and return an extrapolated iterate when history allows.
    fn step(&mut self, x: &DMatrix<T>, g: &DMatrix<T>) -> Option<DMatrix<T>> {
        if self.depth == 0 {
            return None;
        }
        let gv = DVector::from_column_slice(g.as_slice());
        let fv = &gv - DVector::from_column_slice(x.as_slice());
        if let Some((g0, f0)) = self.last.take() {
            self.dg.push(&gv - g0);
            self.df.push(&fv - f0);
            if self.dg.len() > self.depth {
                self.dg.remove(0);
                self.df.remove(0);
            }
        }
        self.last = Some((gv.clone(), fv.clone()));
        if self.df.is_empty() {
            return None;
        }
        let df = DMatrix::from_columns(&self.df);
        let dg = DMatrix::from_columns(&self.dg);
        let theta = df.svd(true, true).solve(&fv, T::lit(1e-14)).ok()?;
        let out = gv - dg * theta;
        if out.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(DMatrix::from_column_slice(g.nrows(), g.ncols(), out.as_slice()))
    }
}

/// Compiled constraint state for one cage binding.
#[derive(Debug, Clone)]
pub struct SolverSession<T: Real> {
    rest: TriangleMesh<T>,
    x: DMatrix<T>,
    constraints: Vec<ConstraintInstance<T>>,
    pins: BTreeMap<usize, Point3<T>>,
    correspondences: Vec<ConstraintInstance<T>>,
    pin_weight: T,
    shape_weight: T,
    edges: Vec<[usize; 2]>,
    options: SolverOptions<T>,
    factor: Option<(BTreeSet<usize>, Cholesky<T, Dyn>)>,
    report: Option<ResidualReport>,
}

fn positions_matrix<T: Real>(points: &[Point3<T>]) -> DMatrix<T> {
    DMatrix::from_fn(points.len(), 3, |i, k| points[i][k])
}

fn indicator<T: Real>(n: usize, v: usize) -> DVector<T> {
    let mut r = DVector::zeros(n);
    r[v] = T::one();
    r
}

/// Mean of the coordinate rows of `vertices`.
fn mean_row<T: Real>(coords: &CoordinateMatrix<T>, vertices: &[usize]) -> DVector<T> {
    let n = coords.cage_vertex_count();
    let mut r = DVector::zeros(n);
    for &v in vertices {
        for j in 0..n {
            r[j] += coords.vertex[(v, j)];
        }
    }
    r / T::from_count(vertices.len().max(1))
}

fn coord_row<T: Real>(coords: &CoordinateMatrix<T>, v: usize) -> DVector<T> {
    DVector::from_iterator(coords.cage_vertex_count(), coords.vertex.row(v).iter().copied())
}

/// Compile the constraint relationships of `graph` into a session over `cage`.
///
/// `pins` lists cage vertices held at their current positions until
/// [`SolverSession::solve`] supplies targets for them.
pub fn build_session<T: Real>(
    cage: &TriangleMesh<T>,
    coords: &CoordinateMatrix<T>,
    template: &TriangleMesh<T>,
    graph: &RelationshipGraph<T>,
    annotations: &[Annotation<T>],
    pins: &[usize],
    options: SolverOptions<T>,
) -> Result<SolverSession<T>, SolverError> {
    if coords.method == CoordinateMethod::Green {
        return Err(SolverError::GreenCoordsUnsupported);
    }
    let n = cage.vertex_count();
    if coords.cage_vertex_count() != n || coords.template_count() != template.vertex_count() {
        return Err(SolverError::BindingMismatch(format!(
            "matrix is {}x{}, template has {} vertices, cage has {n}",
            coords.template_count(),
            coords.cage_vertex_count(),
            template.vertex_count()
        )));
    }
    let x = positions_matrix(cage.positions());
    let find = |rel: u64, id: u64| {
        annotations
            .iter()
            .find(|a| a.id == id)
            .ok_or(SolverError::UnknownAnnotation {
                relationship: rel,
                annotation: id,
            })
    };
    let measure_row = |rel: u64, id: u64, index: usize| -> Result<DVector<T>, SolverError> {
        let ann = find(rel, id)?;
        let m = ann.measure(index).ok_or(SolverError::UnresolvableMeasure {
            relationship: rel,
            annotation: id,
            index,
        })?;
        let (a, b) = m.anchor_pair(template);
        Ok(coord_row(coords, b) - coord_row(coords, a))
    };

    let mut relationships: Vec<_> = graph.constraints().collect();
    relationships.sort_by_key(|r| r.id);
    let mut constraints = Vec::with_capacity(relationships.len());
    for rel in relationships {
        let c = rel.constraint.as_ref().expect("filtered to constraints");
        let invalid = |message: String| SolverError::InvalidConstraint {
            relationship: rel.id,
            message,
        };
        let two = || -> Result<(u64, u64), SolverError> {
            match rel.annotations.as_slice() {
                [a, b] => Ok((*a, *b)),
                other => Err(invalid(format!("expected exactly 2 annotations, got {}", other.len()))),
            }
        };
        let (kind, rows, projection) = match &c.params {
            ConstraintParams::Closeness { target } => {
                let mut verts = BTreeSet::new();
                for &id in &rel.annotations {
                    verts.extend(find(rel.id, id)?.vertices(template));
                }
                let verts: Vec<usize> = verts.into_iter().collect();
                if verts.is_empty() {
                    return Err(invalid("annotations have no vertices".into()));
                }
                let row = mean_row(coords, &verts);
                let goal = match target {
                    Some(t) => Vector3::new(t[0], t[1], t[2]),
                    None => {
                        let v = x.tr_mul(&row);
                        Vector3::new(v[0], v[1], v[2])
                    }
                };
                (ConstraintKind::Closeness, vec![row], Projection::Target(goal))
            }
            ConstraintParams::EdgeStrain { edge, min, max } => {
                let [a, b] = *edge;
                if a >= n || b >= n || !cage.is_edge(a, b) {
                    return Err(invalid(format!("({a}, {b}) is not a cage edge")));
                }
                let rest = cage.position(b) - cage.position(a);
                let len = rest.norm();
                let row = indicator::<T>(n, b) - indicator::<T>(n, a);
                (
                    ConstraintKind::EdgeStrain,
                    vec![row],
                    Projection::Length {
                        min: *min * len,
                        max: *max * len,
                        fallback: rest / len,
                    },
                )
            }
            ConstraintParams::Distance { min, max } => {
                let (a, b) = two()?;
                let ra = mean_row(coords, &find(rel.id, a)?.vertices(template));
                let rb = mean_row(coords, &find(rel.id, b)?.vertices(template));
                let row = rb - ra;
                let v = x.tr_mul(&row);
                let rest = Vector3::new(v[0], v[1], v[2]);
                let fallback = rest.try_normalize(T::zero()).unwrap_or_else(Vector3::x);
                (
                    ConstraintKind::DistanceRange,
                    vec![row],
                    Projection::Length {
                        min: *min,
                        max: *max,
                        fallback,
                    },
                )
            }
            ConstraintParams::Proportion {
                measure1,
                measure2,
                min,
                max,
            } => {
                let (a, b) = two()?;
                let rows = vec![measure_row(rel.id, a, *measure1)?, measure_row(rel.id, b, *measure2)?];
                (
                    ConstraintKind::Proportion,
                    rows,
                    Projection::Ratio {
                        min: *min,
                        max: *max,
                        directed: rel.is_directed,
                    },
                )
            }
            ConstraintParams::SameMeasure { measure1, measure2 } => {
                let (a, b) = two()?;
                let rows = vec![measure_row(rel.id, a, *measure1)?, measure_row(rel.id, b, *measure2)?];
                (
                    ConstraintKind::SameMeasure,
                    rows,
                    Projection::Ratio {
                        min: T::one(),
                        max: T::one(),
                        directed: rel.is_directed,
                    },
                )
            }
        };
        constraints.push(ConstraintInstance {
            source: ConstraintSource::Relationship(rel.id),
            kind,
            weight: c.weight,
            rows,
            projection,
        });
    }

    let max_weight = constraints.iter().map(|c| c.weight).fold(T::zero(), |a, b| a.max(b));
    let base = if max_weight > T::zero() { max_weight } else { T::one() };
    let mut session = SolverSession {
        rest: cage.clone(),
        x,
        constraints,
        pins: BTreeMap::new(),
        correspondences: Vec::new(),
        pin_weight: options.pin_weight_factor * base,
        shape_weight: options.shape_weight_factor * base,
        edges: cage.edges().to_vec(),
        options,
        factor: None,
        report: None,
    };
    for &p in pins {
        if p >= n {
            return Err(SolverError::HandleOutOfRange { index: p, count: n });
        }
        session.pins.insert(p, *cage.position(p));
    }
    session.check_anchored()?;
    session.refactor()?;
    Ok(session)
}

impl<T: Real> SolverSession<T> {
    pub fn rest_cage(&self) -> &TriangleMesh<T> {
        &self.rest
    }

    /// Current cage positions.
    pub fn cage(&self) -> TriangleMesh<T> {
        let pts = (0..self.x.nrows())
            .map(|i| Point3::new(self.x[(i, 0)], self.x[(i, 1)], self.x[(i, 2)]))
            .collect();
        self.rest.with_positions(pts)
    }

    pub fn constraints(&self) -> &[ConstraintInstance<T>] {
        &self.constraints
    }

    /// All instances in report order: relationship constraints, pins, then correspondences.
    pub fn instances(&self) -> Vec<ConstraintInstance<T>> {
        let n = self.rest.vertex_count();
        let mut out = self.constraints.clone();
        for (&v, t) in &self.pins {
            out.push(ConstraintInstance {
                source: ConstraintSource::Pin(v),
                kind: ConstraintKind::Closeness,
                weight: self.pin_weight,
                rows: vec![indicator(n, v)],
                projection: Projection::Target(t.coords),
            });
        }
        out.extend(self.correspondences.iter().cloned());
        out
    }

    pub fn pin_weight(&self) -> T {
        self.pin_weight
    }

    /// Replace the fitting correspondences: each pulls the template point with
    /// coordinate row `row` toward `target` with `weight`.
    pub fn set_correspondences(&mut self, items: Vec<(usize, DVector<T>, Point3<T>)>, weight: T) {
        self.correspondences = items
            .into_iter()
            .map(|(v, row, target)| ConstraintInstance {
                source: ConstraintSource::Correspondence(v),
                kind: ConstraintKind::Closeness,
                weight,
                rows: vec![row],
                projection: Projection::Target(target.coords),
            })
            .collect();
        self.factor = None;
    }

    pub fn clear_correspondences(&mut self) {
        if !self.correspondences.is_empty() {
            self.correspondences.clear();
            self.factor = None;
        }
    }

    pub fn shape_weight(&self) -> T {
        self.shape_weight
    }

    pub fn pinned(&self) -> Vec<usize> {
        self.pins.keys().copied().collect()
    }

    /// Anchor vectors `A X` of the instance at `index` (in [`Self::instances`] order).
    pub fn anchor_vectors(&self, index: usize) -> Vec<Vector3<T>> {
        self.instances()[index].outputs(&self.x)
    }

    fn check_anchored(&self) -> Result<(), SolverError> {
        let labels = self.rest.component_labels();
        let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
        let instances = self.instances();
        for c in 0..count {
            let anchored = instances.iter().flat_map(|i| &i.rows).any(|row| {
                let mut sum = T::zero();
                let mut scale = T::zero();
                for (v, l) in labels.iter().enumerate() {
                    if *l == Some(c) {
                        sum += row[v];
                        scale = scale.max(row[v].abs());
                    }
                }
                sum.abs() > T::lit(1e-9) * scale && scale > T::zero()
            });
            if !anchored {
                return Err(SolverError::Unanchored(c));
            }
        }
        Ok(())
    }

    fn normal_matrix(&self, instances: &[ConstraintInstance<T>]) -> DMatrix<T> {
        let n = self.rest.vertex_count();
        let mut m = DMatrix::zeros(n, n);
        for inst in instances {
            for r in &inst.rows {
                m.ger(inst.weight, r, r, T::one());
            }
        }
        for &[a, b] in &self.edges {
            m[(a, a)] += self.shape_weight;
            m[(b, b)] += self.shape_weight;
            m[(a, b)] -= self.shape_weight;
            m[(b, a)] -= self.shape_weight;
        }
        m
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let key: BTreeSet<usize> = self.pins.keys().copied().collect();
        if matches!(&self.factor, Some((k, _)) if *k == key) {
            return Ok(());
        }
        let m = self.normal_matrix(&self.instances());
        let chol = Cholesky::new(m).ok_or(SolverError::Singular)?;
        self.factor = Some((key, chol));
        Ok(())
    }

    /// Edge-vector targets of the shape term, `L X₀` folded into `Lᵀ L X₀`.
    fn shape_rhs(&self) -> DMatrix<T> {
        let n = self.rest.vertex_count();
        let rest = positions_matrix(self.rest.positions());
        let mut out = DMatrix::zeros(n, 3);
        for &[a, b] in &self.edges {
            for k in 0..3 {
                let d = (rest[(a, k)] - rest[(b, k)]) * self.shape_weight;
                out[(a, k)] += d;
                out[(b, k)] -= d;
            }
        }
        out
    }

    fn shape_energy(&self, x: &DMatrix<T>) -> T {
        let rest = self.rest.positions();
        self.edges.iter().fold(T::zero(), |acc, &[a, b]| {
            let cur = Vector3::new(x[(a, 0)] - x[(b, 0)], x[(a, 1)] - x[(b, 1)], x[(a, 2)] - x[(b, 2)]);
            acc + (cur - (rest[a] - rest[b])).norm_squared() * self.shape_weight
        })
    }

    /// Move pinned handles to `targets` (cage vertex → position; unpinned
    /// vertices become pinned) and iterate to convergence.
    pub fn solve(&mut self, targets: &BTreeMap<usize, Point3<T>>) -> Result<(TriangleMesh<T>, ResidualReport), SolverError> {
        let n = self.rest.vertex_count();
        for (&v, t) in targets {
            if v >= n {
                return Err(SolverError::HandleOutOfRange { index: v, count: n });
            }
            self.pins.insert(v, *t);
        }
        self.refactor()?;
        let instances = self.instances();
        let shape_rhs = self.shape_rhs();
        let tol = self.options.tolerance * self.rest.diagonal();

        let objective = |x: &DMatrix<T>, proj: &[Vec<Vector3<T>>]| -> T {
            instances.iter().zip(proj).fold(T::zero(), |acc, (inst, p)| {
                let g = inst.gap(&inst.outputs(x), p);
                acc + inst.weight * g * g
            }) + self.shape_energy(x)
        };

        let reproject = |x: &DMatrix<T>, old: &[Vec<Vector3<T>>]| -> Vec<Vec<Vector3<T>>> {
            instances
                .iter()
                .zip(old)
                .map(|(inst, p)| {
                    let out = inst.outputs(x);
                    let candidate = inst.projection.apply(&out);
                    // keep the previous feasible projection when the new one is farther
                    if inst.gap(&out, &candidate) <= inst.gap(&out, p) {
                        candidate
                    } else {
                        p.clone()
                    }
                })
                .collect()
        };

        let mut x = self.x.clone();
        let mut proj: Vec<Vec<Vector3<T>>> = instances.iter().map(|i| i.projection.apply(&i.outputs(&x))).collect();
        let mut energy = objective(&x, &proj);
        let mut history = vec![energy.as_f64()];
        let mut converged = false;
        let mut iterations = 0;
        let chol = &self.factor.as_ref().expect("factored above").1;
        let depth = self.options.acceleration_depth;
        let mut accel = Anderson::new(depth);
        while iterations < self.options.max_iterations {
            iterations += 1;
            let mut rhs = shape_rhs.clone();
            for (inst, p) in instances.iter().zip(&proj) {
                for (r, target) in inst.rows.iter().zip(p) {
                    for k in 0..3 {
                        rhs.column_mut(k).axpy(inst.weight * target[k], r, T::one());
                    }
                }
            }
            let plain = chol.solve(&rhs);
            let mut next_proj = reproject(&plain, &proj);
            let mut next_energy = objective(&plain, &next_proj);
            let mut next = plain.clone();
            if let Some(extrapolated) = accel.step(&x, &plain) {
                let p = reproject(&extrapolated, &proj);
                let e = objective(&extrapolated, &p);
                if e <= next_energy {
                    next = extrapolated;
                    next_proj = p;
                    next_energy = e;
                } else {
                    accel.reset();
                }
            }
            if self.options.line_search {
                // stretch the step while the energy keeps falling; slow modes dominate the direction
                let dir = &next - &x;
                let mut alpha = T::lit(2.0);
                while alpha < T::lit(1e6) {
                    let trial = &x + &dir * alpha;
                    let p = reproject(&trial, &proj);
                    let e = objective(&trial, &p);
                    if !(e < next_energy) {
                        break;
                    }
                    next = trial;
                    next_proj = p;
                    next_energy = e;
                    alpha *= T::lit(2.0);
                }
            }
            let step = (0..n)
                .map(|i| (next.row(i) - x.row(i)).norm())
                .fold(T::zero(), |a, b| a.max(b));
            x = next;
            proj = next_proj;
            energy = next_energy;
            history.push(energy.as_f64());
            if step < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("solver stopped after {iterations} iterations without converging");
        }

        let diag = self.rest.diagonal();
        let mut rows = Vec::with_capacity(instances.len());
        let mut total = T::zero();
        for inst in &instances {
            let out = inst.outputs(&x);
            let r = inst.gap(&out, &inst.projection.apply(&out));
            total += inst.weight * r * r;
            rows.push(ConstraintResidual {
                source: inst.source,
                kind: inst.kind,
                weight: inst.weight.as_f64(),
                residual: r.as_f64(),
                satisfied: r < self.options.satisfied_tolerance * diag,
            });
        }
        let report = ResidualReport {
            constraints: rows,
            total_energy: total.as_f64(),
            shape_energy: self.shape_energy(&x).as_f64(),
            iterations,
            converged,
            energy_history: history,
        };
        self.x = x;
        self.report = Some(report.clone());
        Ok((self.cage(), report))
    }

    /// Report of the most recent solve.
    pub fn residuals(&self) -> Result<&ResidualReport, SolverError> {
        self.report.as_ref().ok_or(SolverError::NeverSolved)
    }
}
