//! Fragment placement: landmark matching, similarity alignment and
//! non-rigid template fitting.

mod nonrigid;

use std::collections::{BTreeMap, HashSet};

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::annotation::{Annotation, Selector};
use crate::cage::CageError;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::solver::SolverError;

pub use nonrigid::{nonrigid_fit, FitIteration, FitOptions, FitReport};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("only {0} landmarks in common, at least 3 are needed")]
    InsufficientLandmarks(usize),
    #[error("landmark tag '{0}' is used by more than one point annotation")]
    DuplicateTag(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point sets differ in size ({0} and {1})")]
    CountMismatch(usize, usize),
    #[error("landmark {index} out of range ({count} vertices)")]
    LandmarkOutOfRange { index: usize, count: usize },
    #[error("no fragment region shares a tag with a template annotation")]
    NoCompatibleAnnotation,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cage(#[from] CageError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LandmarkPair {
    pub template: usize,
    pub fragment: usize,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LandmarkSet {
    pub pairs: Vec<LandmarkPair>,
}

impl LandmarkSet {
    /// Explicit pairs, e.g. picked by hand when tags do not match.
    pub fn new(pairs: Vec<LandmarkPair>) -> Result<Self, FitError> {
        let mut seen = HashSet::new();
        for p in &pairs {
            if !seen.insert(p.tag.as_str()) {
                return Err(FitError::DuplicateTag(p.tag.clone()));
            }
        }
        if pairs.len() < 3 {
            return Err(FitError::InsufficientLandmarks(pairs.len()));
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn points<T: Real>(&self, mesh: &TriangleMesh<T>, pick: impl Fn(&LandmarkPair) -> usize) -> Result<Vec<Point3<T>>, FitError> {
        self.pairs
            .iter()
            .map(|p| {
                let v = pick(p);
                if v >= mesh.vertex_count() {
                    return Err(FitError::LandmarkOutOfRange {
                        index: v,
                        count: mesh.vertex_count(),
                    });
                }
                Ok(*mesh.position(v))
            })
            .collect()
    }
}

fn point_tags<T: Real>(annotations: &[Annotation<T>]) -> Result<BTreeMap<&str, usize>, FitError> {
    let mut out = BTreeMap::new();
    for a in annotations {
        if let Selector::Point(points) = &a.selector {
            let Some(&first) = points.first() else { continue };
            if out.insert(a.tag.as_str(), first).is_some() {
                return Err(FitError::DuplicateTag(a.tag.clone()));
            }
        }
    }
    Ok(out)
}

/// Pair the point annotations of both meshes by equal tag, in template
/// annotation order.
pub fn match_landmarks<T: Real>(template: &[Annotation<T>], fragment: &[Annotation<T>]) -> Result<LandmarkSet, FitError> {
    let ft = point_tags(fragment)?;
    point_tags(template)?;
    let mut pairs = Vec::new();
    for a in template {
        if let Selector::Point(points) = &a.selector {
            if let (Some(&t), Some(&f)) = (points.first(), ft.get(a.tag.as_str())) {
                pairs.push(LandmarkPair {
                    template: t,
                    fragment: f,
                    tag: a.tag.clone(),
                });
            }
        }
    }
    LandmarkSet::new(pairs)
}

/// `x ↦ scale · rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform<T: Real> {
    pub scale: T,
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> SimilarityTransform<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
        mesh.with_positions(mesh.positions().iter().map(|p| self.apply(p)).collect())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let s = T::one() / self.scale;
        Self {
            scale: s,
            rotation: rt,
            translation: -(rt * self.translation) * s,
        }
    }
}

/// Least-squares similarity mapping `source` onto `target`, restricted to
/// proper rotations.
pub fn umeyama_similarity<T: Real>(source: &[Point3<T>], target: &[Point3<T>]) -> Result<SimilarityTransform<T>, FitError> {
    if source.len() != target.len() {
        return Err(FitError::CountMismatch(source.len(), target.len()));
    }
    let n = source.len();
    if n < 3 {
        return Err(FitError::DegenerateConfiguration(format!("{n} points")));
    }
    let inv_n = T::one() / T::from_count(n);
    let mu_x = source.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv_n;
    let mu_y = target.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv_n;
    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_x = T::zero();
    for (x, y) in source.iter().zip(target) {
        let (xc, yc) = (x.coords - mu_x, y.coords - mu_y);
        cov += yc * xc.transpose() * inv_n;
        scatter += xc * xc.transpose() * inv_n;
        var_x += xc.norm_squared() * inv_n;
    }
    let mut ev: Vec<T> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if !(ev[0] > T::zero()) || ev[1] <= T::lit(1e-12) * ev[0] {
        return Err(FitError::DegenerateConfiguration("source points are collinear or coincident".into()));
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V"));
    let d = svd.singular_values;
    let smallest = (0..3).min_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal)).expect("3 values");
    let mut s = Vector3::repeat(T::one());
    if u.determinant() * vt.determinant() < T::zero() {
        s[smallest] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&s) * vt;
    let scale = d.component_mul(&s).sum() / var_x;
    let translation = mu_y - rotation * mu_x * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Outcome of [`rigid_place`]: scale the template by `template_scale` about
/// the origin and move the fragment by `fragment_pose` (unit scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement<T: Real> {
    pub template_scale: T,
    pub fragment_pose: SimilarityTransform<T>,
    /// RMS distance between paired landmarks after placement.
    pub landmark_rms: T,
}

impl<T: Real> Placement<T> {
    pub fn scale_template(&self, mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
        mesh.with_positions(mesh.positions().iter().map(|p| Point3::from(p.coords * self.template_scale)).collect())
    }

    pub fn place_fragment(&self, mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
        self.fragment_pose.apply_mesh(mesh)
    }
}

/// Size the template to the fragment and pose the fragment on it.
pub fn rigid_place<T: Real>(
    template: &TriangleMesh<T>,
    fragment: &TriangleMesh<T>,
    landmarks: &LandmarkSet,
) -> Result<Placement<T>, FitError> {
    let p = landmarks.points(template, |l| l.template)?;
    let f = landmarks.points(fragment, |l| l.fragment)?;
    let sim = umeyama_similarity(&p, &f)?;
    let rt = sim.rotation.transpose();
    let pose = SimilarityTransform {
        scale: T::one(),
        rotation: rt,
        translation: -(rt * sim.translation),
    };
    let sum = p.iter().zip(&f).fold(T::zero(), |acc, (a, b)| {
        acc + (a.coords * sim.scale - pose.apply(b).coords).norm_squared()
    });
    Ok(Placement {
        template_scale: sim.scale,
        fragment_pose: pose,
        landmark_rms: (sum / T::from_count(p.len())).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::SelectorSpec;
    use crate::geom::axis_angle;
    use crate::mesh::primitives;

    fn tagged(mesh: &TriangleMesh<f64>, tags: &[(&str, usize)]) -> Vec<Annotation<f64>> {
        tags.iter()
            .enumerate()
            .map(|(i, (t, v))| Annotation::new(mesh, i as u64, SelectorSpec::Point(vec![*v]), *t, [0, 0, 0]).unwrap())
            .collect()
    }

    #[test]
    fn landmarks_by_tag() {
        let m: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
        let t = tagged(&m, &[("noseTip", 0), ("chinLeft", 1), ("chinRight", 2)]);
        let f = tagged(&m, &[("chinRight", 5), ("noseTip", 3), ("chinLeft", 4), ("ear", 9)]);
        let set = match_landmarks(&t, &f).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.pairs[0], LandmarkPair { template: 0, fragment: 3, tag: "noseTip".into() });
        assert!(matches!(match_landmarks(&t[..2], &f), Err(FitError::InsufficientLandmarks(2))));
        let dup = tagged(&m, &[("noseTip", 0), ("noseTip", 1), ("chinRight", 2)]);
        assert!(matches!(match_landmarks(&dup, &f), Err(FitError::DuplicateTag(t)) if t == "noseTip"));
    }

    #[test]
    fn identity_alignment() {
        let pts: [Point3<f64>; 4] = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.2, 0.0), Point3::new(0.3, 1.0, 0.5), Point3::new(0.1, 0.4, 2.0)];
        let s = umeyama_similarity(&pts, &pts).unwrap();
        assert!((s.scale - 1.0).abs() < 1e-12);
        assert!((s.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(s.translation.norm() < 1e-12);
    }

    #[test]
    fn collinear_sources_are_degenerate() {
        let pts: Vec<Point3<f64>> = (0..4).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(umeyama_similarity(&pts, &pts), Err(FitError::DegenerateConfiguration(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let s = SimilarityTransform {
            scale: 2.5,
            rotation: axis_angle(&Vector3::new(1.0, 2.0, 0.5), 0.7).into_inner(),
            translation: Vector3::new(0.1, -3.0, 2.0),
        };
        let p = Point3::new(0.3, 0.4, -1.0);
        assert!((s.inverse().apply(&s.apply(&p)) - p).norm() < 1e-12);
    }
}
