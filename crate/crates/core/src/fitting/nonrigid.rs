use std::collections::BTreeSet;

use nalgebra::{DVector, Point3};
use serde::Serialize;

use super::FitError;
use crate::annotation::Annotation;
use crate::cage::{apply_deformation, par_rows, CoordinateMatrix};
use crate::mesh::{SurfaceIndex, TriangleMesh};
use crate::scalar::Real;
use crate::solver::{ResidualReport, SolverSession};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T: Real> {
    /// Weight of every correspondence constraint.
    pub fit_weight: T,
    /// Correspondence distance cap as a fraction of the fragment diagonal.
    pub distance_cap: T,
    /// Largest admissible angle between template and fragment normals, in degrees.
    pub normal_degrees: T,
    pub max_outer_iterations: usize,
    /// Stop once the correspondence energy falls by less than this fraction.
    pub relative_decrease: T,
    /// Template vertices sampled per iteration; larger selections are strided.
    pub max_samples: usize,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            fit_weight: T::one(),
            distance_cap: T::lit(0.1),
            normal_degrees: T::lit(60.0),
            max_outer_iterations: 20,
            relative_decrease: T::lit(1e-4),
            max_samples: 10_000,
        }
    }
}

/// Correspondence statistics of one template state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitIteration {
    pub correspondences: usize,
    pub mean_distance: f64,
    pub max_distance: f64,
    /// Sum of squared correspondence distances over the sample count.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    /// Statistics before the first solve and after every solve.
    pub history: Vec<FitIteration>,
    /// Number of deformation solves.
    pub iterations: usize,
    pub converged: bool,
    /// Residuals of the last solve, if any.
    pub residuals: Option<ResidualReport>,
}

struct Matched<T: Real> {
    vertex: usize,
    target: Point3<T>,
    distance: T,
}

/// Deform the session's cage so that the compatible template annotations
/// approach the fragment regions of equal tag.
///
/// `template` is the rest template bound by `coords` to the session cage.
/// Correspondences stay in the session afterwards; clear them with
/// [`SolverSession::clear_correspondences`].
pub fn nonrigid_fit<T: Real>(
    session: &mut SolverSession<T>,
    coords: &CoordinateMatrix<T>,
    template: &TriangleMesh<T>,
    template_annotations: &[Annotation<T>],
    fragment: &TriangleMesh<T>,
    fragment_annotations: &[Annotation<T>],
    options: &FitOptions<T>,
) -> Result<(Vec<Point3<T>>, FitReport), FitError> {
    let mut tags = BTreeSet::new();
    let mut region = BTreeSet::new();
    for f in fragment_annotations {
        if let Some(interior) = f.selector.interior() {
            if template_annotations.iter().any(|t| t.tag == f.tag) {
                tags.insert(f.tag.as_str());
                region.extend(interior.iter().copied());
            }
        }
    }
    if region.is_empty() {
        return Err(FitError::NoCompatibleAnnotation);
    }
    let mut samples = BTreeSet::new();
    for t in template_annotations.iter().filter(|t| tags.contains(t.tag.as_str())) {
        samples.extend(t.vertices(template));
    }
    let mut samples: Vec<usize> = samples.into_iter().collect();
    if samples.len() > options.max_samples {
        let stride = samples.len().div_ceil(options.max_samples);
        samples = samples.into_iter().step_by(stride).collect();
    }
    if samples.is_empty() {
        return Err(FitError::NoCompatibleAnnotation);
    }

    let index = SurfaceIndex::from_triangles(fragment, region);
    let cap = options.distance_cap * fragment.diagonal();
    let min_dot = (options.normal_degrees * T::pi() / T::lit(180.0)).cos();
    let tiny = T::lit(1e-9) * fragment.diagonal();
    let rest_cage = session.rest_cage().clone();

    let correspond = |positions: &[Point3<T>]| -> Result<(Vec<Matched<T>>, FitIteration), FitError> {
        let normals = template.with_positions(positions.to_vec()).vertex_normals();
        let found = par_rows(samples.len(), |i| {
            let v = samples[i];
            let p = positions[v];
            Ok(index.closest_point(&p).and_then(|hit| {
                let agree = normals[v].dot(&index.triangle_normal(hit.triangle)) >= min_dot;
                (hit.distance <= cap && agree).then_some(Matched {
                    vertex: v,
                    target: hit.point,
                    distance: hit.distance,
                })
            }))
        })?;
        let matched: Vec<Matched<T>> = found.into_iter().flatten().collect();
        let count = matched.len();
        let sum = matched.iter().fold(T::zero(), |a, m| a + m.distance);
        let sq = matched.iter().fold(T::zero(), |a, m| a + m.distance * m.distance);
        let max = matched.iter().fold(T::zero(), |a, m| a.max(m.distance));
        let stats = FitIteration {
            correspondences: count,
            mean_distance: if count > 0 { (sum / T::from_count(count)).as_f64() } else { 0.0 },
            max_distance: max.as_f64(),
            energy: (sq / T::from_count(samples.len())).as_f64(),
        };
        Ok((matched, stats))
    };

    let mut positions = apply_deformation(coords, &rest_cage, &session.cage())?;
    let (mut matched, first) = correspond(&positions)?;
    let mut history = vec![first];
    let mut residuals = None;
    let mut converged = false;
    let mut solves = 0;
    loop {
        let last = history.last().expect("non-empty");
        if last.correspondences == 0 || last.max_distance <= tiny.as_f64() {
            converged = true;
            break;
        }
        if history.len() >= 2 {
            let prev = history[history.len() - 2].energy;
            if prev - last.energy <= options.relative_decrease.as_f64() * prev {
                converged = true;
                break;
            }
        }
        if solves == options.max_outer_iterations {
            break;
        }
        let items = matched
            .iter()
            .map(|m| {
                let row = DVector::from_iterator(coords.cage_vertex_count(), coords.vertex.row(m.vertex).iter().copied());
                (m.vertex, row, m.target)
            })
            .collect();
        session.set_correspondences(items, options.fit_weight);
        let (cage, report) = session.solve(&Default::default())?;
        solves += 1;
        residuals = Some(report);
        positions = apply_deformation(coords, &rest_cage, &cage)?;
        let (next, stats) = correspond(&positions)?;
        matched = next;
        history.push(stats);
    }
    Ok((
        positions,
        FitReport {
            history,
            iterations: solves,
            converged,
            residuals,
        },
    ))
}
