//! Cages, generalized barycentric coordinates and cage-driven deformation.
//!
//! A cage is a closed manifold [`TriangleMesh`] around the template. Binding
//! computes a [`CoordinateMatrix`] (mean value or Green coordinates); moving
//! cage vertices and calling [`apply_deformation`] then moves the template.

pub mod gc;
pub mod generate;
pub mod io;
pub mod mvc;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Point3, Vector3};
use thiserror::Error;

use crate::annotation::Annotation;
use crate::geom;
use crate::mesh::{MeshError, SurfaceIndex, TriangleMesh};
use crate::scalar::Real;

pub use generate::{generate_cage, CageOptions};
pub use io::{parse_coords, read_coords, to_text, write_coords};

#[derive(Debug, Error)]
pub enum CageError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cage genus {cage} differs from template genus {template}")]
    TopologyChange { template: usize, cage: usize },
    #[error("cannot decimate to the requested size: {0}")]
    TargetTooCoarse(String),
    #[error("numerical breakdown at template vertex {vertex} (norm {norm:e})")]
    NumericalBreakdown { vertex: usize, norm: f64 },
    #[error("template vertex {0} lies outside the cage; Green coordinates are interior-only")]
    ExteriorPoint(usize),
    #[error("connectivity mismatch: {0}")]
    ConnectivityMismatch(String),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("rotation needs at least 2 selected vertices")]
    RotateSingleVertex,
    #[error("empty handle selection")]
    EmptySelection,
    #[error("handle index {index} out of range ({count} cage vertices)")]
    HandleOutOfRange { index: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordinateMethod {
    MeanValue,
    Green,
}

impl CoordinateMethod {
    /// Header line of the coordinate file.
    pub fn title(self) -> &'static str {
        match self {
            CoordinateMethod::MeanValue => "Mean Value Coordinates",
            CoordinateMethod::Green => "Green Coordinates",
        }
    }

    pub fn from_title(s: &str) -> Option<Self> {
        match s {
            "Mean Value Coordinates" => Some(CoordinateMethod::MeanValue),
            "Green Coordinates" => Some(CoordinateMethod::Green),
            _ => None,
        }
    }
}

impl std::str::FromStr for CoordinateMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mvc" | "mean-value" => Ok(CoordinateMethod::MeanValue),
            "gc" | "green" => Ok(CoordinateMethod::Green),
            other => Err(format!("unknown coordinate method '{other}' (expected mvc or gc)")),
        }
    }
}

/// Binding of template vertices to a cage.
///
/// `vertex` has one row per template vertex and one column per cage vertex.
/// `face` holds the Green face coordinates (one column per cage triangle, in
/// cage triangle order) and has no columns for mean value coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMatrix<T: Real> {
    pub method: CoordinateMethod,
    pub vertex: DMatrix<T>,
    pub face: DMatrix<T>,
}

impl<T: Real> CoordinateMatrix<T> {
    pub fn template_count(&self) -> usize {
        self.vertex.nrows()
    }

    pub fn cage_vertex_count(&self) -> usize {
        self.vertex.ncols()
    }

    pub fn cage_face_count(&self) -> usize {
        self.face.ncols()
    }

    /// Vertex-coordinate row of template vertex `i`.
    pub fn row(&self, i: usize) -> Vec<T> {
        self.vertex.row(i).iter().copied().collect()
    }
}

/// Evaluate `f` for every index in `0..n`, splitting the range over threads.
/// Results are in index order and independent of the thread count.
pub(crate) fn par_rows<R, F>(n: usize, f: F) -> Result<Vec<R>, CageError>
where
    R: Send,
    F: Fn(usize) -> Result<R, CageError> + Sync,
{
    let threads = std::thread::available_parallelism().map(|t| t.get()).unwrap_or(1).min(16);
    if threads <= 1 || n < 256 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                scope.spawn(move || {
                    let lo = (k * chunk).min(n);
                    let hi = ((k + 1) * chunk).min(n);
                    (lo..hi).map(f).collect::<Result<Vec<R>, CageError>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for h in handles {
            out.extend(h.join().expect("coordinate worker panicked")?);
        }
        Ok(out)
    })
}

fn require_closed<T: Real>(cage: &TriangleMesh<T>) -> Result<(), CageError> {
    if !cage.is_closed() {
        return Err(CageError::Precondition("cage must be a closed manifold".into()));
    }
    Ok(())
}

/// Template vertices that are not strictly inside `cage`: outside by winding
/// number, or closer to the cage surface than `1e-6` times the cage diagonal.
pub fn enclosure_violations<T: Real>(cage: &TriangleMesh<T>, template: &TriangleMesh<T>) -> Vec<usize> {
    let index = SurfaceIndex::new(cage);
    let tol = T::lit(1e-6) * cage.diagonal();
    let half = T::lit(0.5);
    template
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let near = index.closest_point(p).map(|s| s.distance <= tol).unwrap_or(true);
            near || cage.winding_number(p) < half
        })
        .map(|(i, _)| i)
        .collect()
}

/// Mean value coordinates of every template vertex.
pub fn compute_mvc<T: Real>(template: &TriangleMesh<T>, cage: &TriangleMesh<T>) -> Result<CoordinateMatrix<T>, CageError> {
    require_closed(cage)?;
    let outside: Vec<usize> = template
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, p)| cage.winding_number(p) < T::lit(0.5))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        log::warn!("{} template vertices lie outside the cage: {:?}", outside.len(), outside);
    }
    let rows = par_rows(template.vertex_count(), |i| mvc::mvc_row(cage, template.position(i), i))?;
    let nc = cage.vertex_count();
    let vertex = DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]);
    Ok(CoordinateMatrix {
        method: CoordinateMethod::MeanValue,
        vertex,
        face: DMatrix::zeros(rows.len(), 0),
    })
}

/// Green coordinates of every template vertex; all vertices must be inside the cage.
pub fn compute_gc<T: Real>(template: &TriangleMesh<T>, cage: &TriangleMesh<T>) -> Result<CoordinateMatrix<T>, CageError> {
    require_closed(cage)?;
    let rows = par_rows(template.vertex_count(), |i| {
        let p = template.position(i);
        if cage.winding_number(p) < T::lit(0.5) {
            return Err(CageError::ExteriorPoint(i));
        }
        gc::gc_row(cage, p, i)
    })?;
    let (nc, nf) = (cage.vertex_count(), cage.triangle_count());
    Ok(CoordinateMatrix {
        method: CoordinateMethod::Green,
        vertex: DMatrix::from_fn(rows.len(), nc, |i, j| rows[i].0[j]),
        face: DMatrix::from_fn(rows.len(), nf, |i, t| rows[i].1[t]),
    })
}

pub fn compute_coords<T: Real>(
    method: CoordinateMethod,
    template: &TriangleMesh<T>,
    cage: &TriangleMesh<T>,
) -> Result<CoordinateMatrix<T>, CageError> {
    match method {
        CoordinateMethod::MeanValue => compute_mvc(template, cage),
        CoordinateMethod::Green => compute_gc(template, cage),
    }
}

fn positions_matrix<T: Real>(points: &[Point3<T>]) -> DMatrix<T> {
    DMatrix::from_fn(points.len(), 3, |i, k| points[i][k])
}

/// Template positions induced by `deformed`, a moved copy of the `rest` cage.
pub fn apply_deformation<T: Real>(
    coords: &CoordinateMatrix<T>,
    rest: &TriangleMesh<T>,
    deformed: &TriangleMesh<T>,
) -> Result<Vec<Point3<T>>, CageError> {
    if rest.triangles() != deformed.triangles() {
        return Err(CageError::ConnectivityMismatch("deformed cage triangles differ from the bound cage".into()));
    }
    if coords.cage_vertex_count() != deformed.vertex_count() {
        return Err(CageError::ConnectivityMismatch(format!(
            "coordinates reference {} cage vertices, cage has {}",
            coords.cage_vertex_count(),
            deformed.vertex_count()
        )));
    }
    let mut out = &coords.vertex * positions_matrix(deformed.positions());
    if coords.method == CoordinateMethod::Green {
        if coords.cage_face_count() != deformed.triangle_count() {
            return Err(CageError::ConnectivityMismatch(format!(
                "coordinates reference {} cage faces, cage has {}",
                coords.cage_face_count(),
                deformed.triangle_count()
            )));
        }
        let scaled: Vec<Vector3<T>> = (0..deformed.triangle_count())
            .map(|t| deformed.triangle_normal(t) * gc::stretch_factor(rest.triangle_points(t), deformed.triangle_points(t)))
            .collect();
        let normals = DMatrix::from_fn(scaled.len(), 3, |t, k| scaled[t][k]);
        out += &coords.face * normals;
    }
    Ok((0..out.nrows()).map(|i| Point3::new(out[(i, 0)], out[(i, 1)], out[(i, 2)])).collect())
}

/// Edits applied to a set of selected cage vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HandleOp<T: Real> {
    Translate(Vector3<T>),
    /// Rotation by an angle in radians about an axis through the selection barycentre.
    Rotate { axis: Vector3<T>, angle: T },
    /// Move each vertex by `amount` along `direction`, away from the barycentre.
    Stretch { direction: Vector3<T>, amount: T },
}

/// Apply `op` to the selected vertices of `cage`.
pub fn manipulate_handles<T: Real>(
    cage: &TriangleMesh<T>,
    selection: &[usize],
    op: &HandleOp<T>,
) -> Result<TriangleMesh<T>, CageError> {
    let selected: BTreeSet<usize> = selection.iter().copied().collect();
    if selected.is_empty() {
        return Err(CageError::EmptySelection);
    }
    if let Some(&index) = selected.iter().find(|&&i| i >= cage.vertex_count()) {
        return Err(CageError::HandleOutOfRange {
            index,
            count: cage.vertex_count(),
        });
    }
    let mut positions = cage.positions().to_vec();
    let bary = selected.iter().fold(Vector3::zeros(), |a, &i| a + positions[i].coords) / T::from_count(selected.len());
    match *op {
        HandleOp::Translate(d) => {
            for &i in &selected {
                positions[i] += d;
            }
        }
        HandleOp::Rotate { axis, angle } => {
            if selected.len() < 2 {
                return Err(CageError::RotateSingleVertex);
            }
            if axis.norm() == T::zero() {
                return Err(CageError::Precondition("rotation axis must be nonzero".into()));
            }
            let r = geom::axis_angle(&axis, angle);
            for &i in &selected {
                positions[i] = Point3::from(bary + r * (positions[i].coords - bary));
            }
        }
        HandleOp::Stretch { direction, amount } => {
            let d = direction
                .try_normalize(T::zero())
                .ok_or_else(|| CageError::Precondition("stretch direction must be nonzero".into()))?;
            for &i in &selected {
                let side = (positions[i].coords - bary).dot(&d);
                let sign = if side > T::zero() {
                    T::one()
                } else if side < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                };
                positions[i] += d * (amount * sign);
            }
        }
    }
    Ok(cage.with_positions(positions))
}

/// Cage vertices whose summed absolute weight over `vertices` exceeds
/// `threshold` times the largest such sum. Green face coordinates are ignored.
pub fn influencing_cage_vertices<T: Real>(coords: &CoordinateMatrix<T>, vertices: &[usize], threshold: T) -> Vec<usize> {
    let nc = coords.cage_vertex_count();
    let mut total = vec![T::zero(); nc];
    for &i in vertices {
        if i >= coords.template_count() {
            continue;
        }
        for (j, t) in total.iter_mut().enumerate() {
            *t += coords.vertex[(i, j)].abs();
        }
    }
    let max = total.iter().fold(T::zero(), |a, &b| a.max(b));
    if max == T::zero() {
        log::warn!("annotation has no cage influence");
        return Vec::new();
    }
    let out: Vec<usize> = (0..nc).filter(|&j| total[j] > threshold * max).collect();
    if out.is_empty() {
        log::warn!("no cage vertex exceeds the influence threshold");
    }
    out
}

pub const DEFAULT_INFLUENCE_THRESHOLD: f64 = 0.05;

/// Cage handles that chiefly govern an annotated part of the template.
pub fn annotation_to_cage_vertices<T: Real>(
    coords: &CoordinateMatrix<T>,
    template: &TriangleMesh<T>,
    annotation: &Annotation<T>,
    threshold: T,
) -> Vec<usize> {
    influencing_cage_vertices(coords, &annotation.vertices(template), threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn centered_cube(h: f64) -> TriangleMesh<f64> {
        let c: TriangleMesh<f64> = primitives::cube();
        c.with_positions(c.positions().iter().map(|p| Point3::from((p.coords * 2.0 - Vector3::repeat(1.0)) * h)).collect())
    }

    #[test]
    fn rest_identity_both_methods() {
        let cage = centered_cube(2.0);
        let template: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
        for method in [CoordinateMethod::MeanValue, CoordinateMethod::Green] {
            let coords = compute_coords(method, &template, &cage).unwrap();
            let out = apply_deformation(&coords, &cage, &cage).unwrap();
            for (a, b) in out.iter().zip(template.positions()) {
                assert!((a - b).norm() < 1e-10, "{method:?}");
            }
        }
    }

    #[test]
    fn gc_rejects_exterior() {
        let cage = centered_cube(0.5);
        let template: TriangleMesh<f64> = primitives::icosphere(1.0, 0);
        assert!(matches!(compute_gc(&template, &cage), Err(CageError::ExteriorPoint(0))));
    }

    #[test]
    fn handle_ops() {
        let cage = centered_cube(1.0);
        let same = manipulate_handles(&cage, &[0, 1], &HandleOp::Translate(Vector3::zeros())).unwrap();
        assert_eq!(same.positions(), cage.positions());
        let full = manipulate_handles(
            &cage,
            &[0, 1, 2],
            &HandleOp::Rotate {
                axis: Vector3::new(1.0, 2.0, 3.0),
                angle: 2.0 * std::f64::consts::PI,
            },
        )
        .unwrap();
        for (a, b) in full.positions().iter().zip(cage.positions()) {
            assert!((a - b).norm() < 1e-9);
        }
        // vertices 0 and 1 differ only in x
        let s = manipulate_handles(
            &cage,
            &[0, 1],
            &HandleOp::Stretch {
                direction: Vector3::x(),
                amount: 0.25,
            },
        )
        .unwrap();
        let before = (cage.position(1) - cage.position(0)).norm();
        let after = (s.position(1) - s.position(0)).norm();
        assert!((after - before - 0.5).abs() < 1e-12);
        assert!(matches!(
            manipulate_handles(&cage, &[3], &HandleOp::Rotate { axis: Vector3::z(), angle: 1.0 }),
            Err(CageError::RotateSingleVertex)
        ));
        assert!(matches!(
            manipulate_handles(&cage, &[], &HandleOp::Translate(Vector3::x())),
            Err(CageError::EmptySelection)
        ));
    }

    #[test]
    fn point_on_cage_vertex_selects_it() {
        let cage = centered_cube(1.0);
        let template = TriangleMesh::new(
            vec![*cage.position(6), Point3::new(0.1, 0.0, 0.0), Point3::new(0.0, 0.1, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let coords = compute_mvc(&template, &cage).unwrap();
        assert_eq!(influencing_cage_vertices(&coords, &[0], 0.05), vec![6]);
        assert_eq!(influencing_cage_vertices(&coords, &[0, 1, 2], 0.0).len(), 8);
    }
}
