//! Part annotations over a mesh: point, line and region selectors with
//! semantic notes and measured attributes.

pub mod format;
pub mod transfer;

use std::collections::{BTreeSet, HashSet};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::mesh::path::shortest_edge_path;
use crate::mesh::{edge_key, MeshError, TriangleMesh};
use crate::scalar::Real;

pub use format::{parse_annotations, read_annotations, to_json, write_annotations};
pub use transfer::transfer_annotations;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("open loop: {0}")]
    OpenLoop(String),
    #[error("region {0} has an empty interior")]
    EmptyRegion(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("schema error at '{field}': {message}")]
    Schema { field: String, message: String },
    #[error("index {index} at '{field}' is out of range for a mesh with {count} vertices")]
    IndexOutOfRange { field: String, index: usize, count: usize },
    #[error("boundary loop {loop_index} of annotation {annotation} collapsed to {distinct} distinct vertices")]
    LoopCollapse {
        annotation: u64,
        loop_index: usize,
        distinct: usize,
    },
    #[error("duplicate annotation id {0}")]
    DuplicateId(u64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// Which mesh elements an annotation selects.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Point(Vec<usize>),
    Line(Vec<Vec<usize>>),
    /// Closed boundary loops with the derived interior (sorted triangle indices).
    Region {
        boundaries: Vec<Vec<usize>>,
        interior: Vec<usize>,
    },
}

impl Selector {
    pub fn type_name(&self) -> &'static str {
        match self {
            Selector::Point(_) => "point",
            Selector::Line(_) => "line",
            Selector::Region { .. } => "region",
        }
    }

    pub fn interior(&self) -> Option<&[usize]> {
        match self {
            Selector::Region { interior, .. } => Some(interior),
            _ => None,
        }
    }
}

/// Selector as supplied by a caller, before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectorSpec {
    Point(Vec<usize>),
    Line(Vec<Vec<usize>>),
    Region(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureTool<T: Real> {
    Ruler,
    Tape,
    Bounding { direction: Vector3<T> },
}

impl<T: Real> MeasureTool<T> {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureTool::Ruler => "ruler",
            MeasureTool::Tape => "tape",
            MeasureTool::Bounding { .. } => "bounding",
        }
    }
}

/// A measured quantity. `value` is a cache recomputed from the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure<T: Real> {
    pub tool: MeasureTool<T>,
    pub points: Vec<usize>,
    value: T,
}

impl<T: Real> Measure<T> {
    pub fn ruler(mesh: &TriangleMesh<T>, a: usize, b: usize) -> Result<Self, AnnotationError> {
        Self::new(mesh, MeasureTool::Ruler, vec![a, b])
    }

    pub fn tape(mesh: &TriangleMesh<T>, picks: Vec<usize>) -> Result<Self, AnnotationError> {
        Self::new(mesh, MeasureTool::Tape, picks)
    }

    pub fn bounding(mesh: &TriangleMesh<T>, points: Vec<usize>, direction: Vector3<T>) -> Result<Self, AnnotationError> {
        Self::new(mesh, MeasureTool::Bounding { direction }, points)
    }

    pub fn new(mesh: &TriangleMesh<T>, tool: MeasureTool<T>, points: Vec<usize>) -> Result<Self, AnnotationError> {
        let tool = match tool {
            MeasureTool::Ruler if points.len() != 2 => {
                return Err(AnnotationError::InvalidIndex(format!(
                    "ruler needs exactly 2 points, got {}",
                    points.len()
                )))
            }
            MeasureTool::Tape if points.len() < 2 => {
                return Err(AnnotationError::InvalidIndex(format!(
                    "tape needs at least 2 points, got {}",
                    points.len()
                )))
            }
            MeasureTool::Bounding { direction } => {
                if points.is_empty() {
                    return Err(AnnotationError::InvalidIndex("bounding needs at least 1 point".into()));
                }
                let unit = direction
                    .try_normalize(T::zero())
                    .ok_or_else(|| AnnotationError::InvalidIndex("bounding direction is zero".into()))?;
                MeasureTool::Bounding { direction: unit }
            }
            other => other,
        };
        for &p in &points {
            mesh.check_vertex(p)?;
        }
        let mut m = Self {
            tool,
            points,
            value: T::zero(),
        };
        m.recompute(mesh)?;
        Ok(m)
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn recompute(&mut self, mesh: &TriangleMesh<T>) -> Result<T, AnnotationError> {
        self.value = self.evaluate(mesh)?;
        Ok(self.value)
    }

    /// Value on `mesh` without touching the cache.
    pub fn evaluate(&self, mesh: &TriangleMesh<T>) -> Result<T, AnnotationError> {
        Ok(match self.tool {
            MeasureTool::Ruler => measure_ruler(mesh, self.points[0], self.points[1]),
            MeasureTool::Tape => measure_tape(mesh, &self.points)?,
            MeasureTool::Bounding { direction } => {
                let pts: Vec<Point3<T>> = self.points.iter().map(|&i| mesh.positions()[i]).collect();
                measure_bounding(&pts, &direction).length
            }
        })
    }

    /// The two vertices whose distance stands for this measure in constraints:
    /// the ruler endpoints, the tape's first and last pick, or the extreme
    /// projections of a bounding measure on `mesh`.
    pub fn anchor_pair(&self, mesh: &TriangleMesh<T>) -> (usize, usize) {
        match self.tool {
            MeasureTool::Ruler | MeasureTool::Tape => (self.points[0], self.points[self.points.len() - 1]),
            MeasureTool::Bounding { direction } => {
                let proj = |i: usize| direction.dot(&mesh.positions()[i].coords);
                let mut lo = self.points[0];
                let mut hi = self.points[0];
                for &p in &self.points {
                    let s = proj(p);
                    if s < proj(lo) || (s == proj(lo) && p < lo) {
                        lo = p;
                    }
                    if s > proj(hi) || (s == proj(hi) && p < hi) {
                        hi = p;
                    }
                }
                (lo, hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeKind<T: Real> {
    Semantic { note: String },
    Measure(Measure<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute<T: Real> {
    pub id: u64,
    pub name: String,
    pub kind: AttributeKind<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation<T: Real> {
    pub id: u64,
    pub tag: String,
    pub colour: [u8; 3],
    pub selector: Selector,
    pub attributes: Vec<Attribute<T>>,
}

impl<T: Real> Annotation<T> {
    /// Validate a selector against `mesh` and build the annotation.
    pub fn new(
        mesh: &TriangleMesh<T>,
        id: u64,
        selector: SelectorSpec,
        tag: impl Into<String>,
        colour: [u8; 3],
    ) -> Result<Self, AnnotationError> {
        Ok(Self {
            id,
            tag: tag.into(),
            colour,
            selector: build_selector(mesh, selector)?,
            attributes: Vec::new(),
        })
    }

    /// Sorted vertex set touched by the selector.
    pub fn vertices(&self, mesh: &TriangleMesh<T>) -> Vec<usize> {
        let set: BTreeSet<usize> = match &self.selector {
            Selector::Point(p) => p.iter().copied().collect(),
            Selector::Line(lines) => lines.iter().flatten().copied().collect(),
            Selector::Region { interior, .. } => interior.iter().flat_map(|&t| mesh.triangles()[t]).collect(),
        };
        set.into_iter().collect()
    }

    /// Measure attributes in stored order.
    pub fn measures(&self) -> impl Iterator<Item = &Measure<T>> {
        self.attributes.iter().filter_map(|a| match &a.kind {
            AttributeKind::Measure(m) => Some(m),
            AttributeKind::Semantic { .. } => None,
        })
    }

    pub fn measure(&self, index: usize) -> Option<&Measure<T>> {
        self.measures().nth(index)
    }

    fn next_attribute_id(&self) -> u64 {
        self.attributes.iter().map(|a| a.id + 1).max().unwrap_or(0)
    }

    pub fn add_note(&mut self, name: impl Into<String>, note: impl Into<String>) -> u64 {
        let id = self.next_attribute_id();
        self.attributes.push(Attribute {
            id,
            name: name.into(),
            kind: AttributeKind::Semantic { note: note.into() },
        });
        id
    }

    /// Attach a measure; endpoints outside the annotation are accepted with a warning.
    pub fn add_measure(&mut self, mesh: &TriangleMesh<T>, name: impl Into<String>, measure: Measure<T>) -> u64 {
        let own: HashSet<usize> = self.vertices(mesh).into_iter().collect();
        if measure.points.iter().any(|p| !own.contains(p)) {
            log::warn!("measure on annotation {} uses vertices outside the annotation", self.id);
        }
        let id = self.next_attribute_id();
        self.attributes.push(Attribute {
            id,
            name: name.into(),
            kind: AttributeKind::Measure(measure),
        });
        id
    }

    /// Refresh every cached measure value against `mesh`.
    pub fn recompute_measures(&mut self, mesh: &TriangleMesh<T>) -> Result<(), AnnotationError> {
        for a in &mut self.attributes {
            if let AttributeKind::Measure(m) = &mut a.kind {
                m.recompute(mesh)?;
            }
        }
        Ok(())
    }

    pub fn area(&self, mesh: &TriangleMesh<T>) -> T {
        self.selector
            .interior()
            .map_or(T::zero(), |tris| tris.iter().fold(T::zero(), |acc, &t| acc + mesh.triangle_area(t)))
    }
}

/// An annotated mesh's annotation list with fresh-id allocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet<T: Real> {
    pub annotations: Vec<Annotation<T>>,
}

impl<T: Real> AnnotationSet<T> {
    pub fn new(annotations: Vec<Annotation<T>>) -> Result<Self, AnnotationError> {
        let mut seen = HashSet::new();
        for a in &annotations {
            if !seen.insert(a.id) {
                return Err(AnnotationError::DuplicateId(a.id));
            }
        }
        Ok(Self { annotations })
    }

    pub fn next_id(&self) -> u64 {
        self.annotations.iter().map(|a| a.id + 1).max().unwrap_or(0)
    }

    pub fn create(
        &mut self,
        mesh: &TriangleMesh<T>,
        selector: SelectorSpec,
        tag: impl Into<String>,
        colour: [u8; 3],
    ) -> Result<&mut Annotation<T>, AnnotationError> {
        let a = Annotation::new(mesh, self.next_id(), selector, tag, colour)?;
        self.annotations.push(a);
        Ok(self.annotations.last_mut().expect("just pushed"))
    }

    pub fn get(&self, id: u64) -> Option<&Annotation<T>> {
        self.annotations.iter().find(|a| a.id == id)
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut Annotation<T>> {
        self.annotations.iter_mut().find(|a| a.id == id)
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Annotation<T>> {
        self.annotations.iter()
    }

    pub fn recompute_measures(&mut self, mesh: &TriangleMesh<T>) -> Result<(), AnnotationError> {
        for a in &mut self.annotations {
            a.recompute_measures(mesh)?;
        }
        Ok(())
    }
}

pub fn build_selector<T: Real>(mesh: &TriangleMesh<T>, spec: SelectorSpec) -> Result<Selector, AnnotationError> {
    let n = mesh.vertex_count();
    let check = |v: usize| {
        if v < n {
            Ok(())
        } else {
            Err(AnnotationError::InvalidIndex(format!("vertex {v} out of range ({n} vertices)")))
        }
    };
    match spec {
        SelectorSpec::Point(points) => {
            if points.is_empty() {
                return Err(AnnotationError::InvalidIndex("point selector is empty".into()));
            }
            points.iter().try_for_each(|&v| check(v))?;
            Ok(Selector::Point(points))
        }
        SelectorSpec::Line(lines) => {
            if lines.is_empty() {
                return Err(AnnotationError::InvalidIndex("line selector has no polyline".into()));
            }
            for (li, line) in lines.iter().enumerate() {
                if line.len() < 2 {
                    return Err(AnnotationError::InvalidIndex(format!("polyline {li} has fewer than 2 vertices")));
                }
                line.iter().try_for_each(|&v| check(v))?;
                for w in line.windows(2) {
                    if !mesh.is_edge(w[0], w[1]) {
                        return Err(AnnotationError::InvalidIndex(format!(
                            "polyline {li}: vertices {} and {} are not joined by an edge",
                            w[0], w[1]
                        )));
                    }
                }
            }
            Ok(Selector::Line(lines))
        }
        SelectorSpec::Region(loops) => {
            let boundaries: Vec<Vec<usize>> = loops.into_iter().map(normalize_loop).collect();
            for l in &boundaries {
                l.iter().try_for_each(|&v| check(v))?;
            }
            let interior = region_fill(mesh, &boundaries)?;
            Ok(Selector::Region { boundaries, interior })
        }
    }
}

/// Drop an explicit closing repetition of the first vertex.
fn normalize_loop(mut l: Vec<usize>) -> Vec<usize> {
    if l.len() > 1 && l.first() == l.last() {
        l.pop();
    }
    l
}

/// Edge keys of a set of closed loops; errors if a step is not a mesh edge.
pub fn loop_edges<T: Real>(mesh: &TriangleMesh<T>, loops: &[Vec<usize>]) -> Result<HashSet<[usize; 2]>, AnnotationError> {
    let mut edges = HashSet::new();
    for (li, l) in loops.iter().enumerate() {
        let distinct: HashSet<usize> = l.iter().copied().collect();
        if distinct.len() < 3 {
            return Err(AnnotationError::OpenLoop(format!(
                "loop {li} has {} distinct vertices",
                distinct.len()
            )));
        }
        for k in 0..l.len() {
            let (a, b) = (l[k], l[(k + 1) % l.len()]);
            if !mesh.is_edge(a, b) {
                return Err(AnnotationError::OpenLoop(format!(
                    "loop {li}: vertices {a} and {b} are not joined by an edge"
                )));
            }
            edges.insert(edge_key(a, b));
        }
    }
    Ok(edges)
}

/// Edges bounding a triangle set: edges with exactly one incident triangle in the set.
pub fn fill_boundary<T: Real>(mesh: &TriangleMesh<T>, tris: &[usize]) -> HashSet<[usize; 2]> {
    let inside: HashSet<usize> = tris.iter().copied().collect();
    let mut out = HashSet::new();
    for &t in tris {
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            let key = edge_key(tri[k], tri[(k + 1) % 3]);
            let count = mesh
                .edge_triangles(key[0], key[1])
                .map_or(0, |ts| ts.iter().filter(|x| inside.contains(x)).count());
            if count == 1 {
                out.insert(key);
            }
        }
    }
    out
}

/// Boundary loops of a triangle set, each starting at its smallest vertex.
pub fn region_loops<T: Real>(mesh: &TriangleMesh<T>, tris: &[usize]) -> Result<Vec<Vec<usize>>, AnnotationError> {
    let edges: BTreeSet<[usize; 2]> = fill_boundary(mesh, tris).into_iter().collect();
    let mut next: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for &[a, b] in &edges {
        next.entry(a).or_default().push(b);
        next.entry(b).or_default().push(a);
    }
    if let Some((v, _)) = next.iter().find(|(_, n)| n.len() != 2) {
        return Err(AnnotationError::OpenLoop(format!("boundary is pinched at vertex {v}")));
    }
    let mut used = HashSet::new();
    let mut loops = Vec::new();
    for &start in next.keys() {
        if used.contains(&start) {
            continue;
        }
        let mut l = vec![start];
        used.insert(start);
        let (mut prev, mut cur) = (start, next[&start][0]);
        while cur != start {
            l.push(cur);
            used.insert(cur);
            let n = &next[&cur];
            let step = if n[0] == prev { n[1] } else { n[0] };
            prev = cur;
            cur = step;
        }
        loops.push(l);
    }
    Ok(loops)
}

fn flood<T: Real>(mesh: &TriangleMesh<T>, seed: usize, walls: &HashSet<[usize; 2]>) -> Vec<usize> {
    let mut seen = vec![false; mesh.triangle_count()];
    let mut stack = vec![seed];
    seen[seed] = true;
    let mut out = Vec::new();
    while let Some(t) = stack.pop() {
        out.push(t);
        for (o, key) in mesh.triangle_neighbors(t) {
            if !seen[o] && !walls.contains(&key) {
                seen[o] = true;
                stack.push(o);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Interior triangles of a region bounded by `loops`.
///
/// Both sides of the first loop edge are flooded; a side qualifies only if
/// its boundary is exactly the union of the loops. The smaller qualifying
/// side wins, ties going to the side holding the lowest triangle index.
pub fn region_fill<T: Real>(mesh: &TriangleMesh<T>, loops: &[Vec<usize>]) -> Result<Vec<usize>, AnnotationError> {
    if loops.is_empty() {
        return Err(AnnotationError::EmptyRegion("no boundary loops".into()));
    }
    let walls = loop_edges(mesh, loops)?;
    let (a, b) = (loops[0][0], loops[0][1]);
    let seeds = mesh
        .edge_triangles(a, b)
        .ok_or_else(|| AnnotationError::OpenLoop(format!("({a}, {b}) is not an edge")))?;
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for &s in seeds {
        let fill = flood(mesh, s, &walls);
        if fill_boundary(mesh, &fill) == walls && !candidates.contains(&fill) {
            candidates.push(fill);
        }
    }
    candidates.sort_by(|x, y| x.len().cmp(&y.len()).then(x[0].cmp(&y[0])));
    match candidates.into_iter().next() {
        Some(fill) if !fill.is_empty() => Ok(fill),
        Some(_) => Err(AnnotationError::EmptyRegion("region fill is empty".into())),
        None => Err(AnnotationError::OpenLoop(
            "the loops do not enclose a region bounded exactly by them".into(),
        )),
    }
}

/// Euclidean distance between two vertices.
pub fn measure_ruler<T: Real>(mesh: &TriangleMesh<T>, a: usize, b: usize) -> T {
    mesh.edge_length(a, b)
}

/// Summed edge-graph shortest path lengths between successive picks.
pub fn measure_tape<T: Real>(mesh: &TriangleMesh<T>, picks: &[usize]) -> Result<T, AnnotationError> {
    let mut total = T::zero();
    for w in picks.windows(2) {
        total += shortest_edge_path(mesh, w[0], w[1])?.length;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingExtent<T: Real> {
    pub length: T,
    /// Signed offsets of the two clipping planes from the barycentre along the direction.
    pub min_offset: T,
    pub max_offset: T,
    pub barycentre: Point3<T>,
}

/// Extent of the projections of `points` on the line through their barycentre.
///
/// # Panics
/// If `points` is empty.
pub fn measure_bounding<T: Real>(points: &[Point3<T>], direction: &Vector3<T>) -> BoundingExtent<T> {
    assert!(!points.is_empty(), "bounding measure needs a point");
    let dir = direction.try_normalize(T::zero()).unwrap_or_else(Vector3::x);
    let bary = Point3::from(points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / T::from_count(points.len()));
    let mut lo = dir.dot(&(points[0] - bary));
    let mut hi = lo;
    for p in points {
        let s = dir.dot(&(p - bary));
        lo = lo.min(s);
        hi = hi.max(s);
    }
    BoundingExtent {
        length: hi - lo,
        min_offset: lo,
        max_offset: hi,
        barycentre: bary,
    }
}
