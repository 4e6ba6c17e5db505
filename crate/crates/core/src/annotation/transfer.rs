//! Moving annotations between two meshes of the same shape.

use super::{build_selector, Annotation, AnnotationError, AttributeKind, Measure, Selector, SelectorSpec};
use crate::mesh::path::shortest_edge_path;
use crate::mesh::{PointIndex, TriangleMesh};
use crate::scalar::Real;

/// Re-anchor `annotations` from `source` onto `target` by nearest-vertex
/// mapping, re-chaining lines and loops with edge shortest paths.
pub fn transfer_annotations<T: Real>(
    source: &TriangleMesh<T>,
    annotations: &[Annotation<T>],
    target: &TriangleMesh<T>,
) -> Result<Vec<Annotation<T>>, AnnotationError> {
    if !source.bounding_box().overlaps(&target.bounding_box()) {
        log::warn!("transfer target does not overlap the source bounding box");
    }
    let index = PointIndex::new(target.positions());
    let map = |v: usize| -> usize { index.nearest(&source.positions()[v]).expect("target mesh has vertices") };

    let mut out = Vec::with_capacity(annotations.len());
    for a in annotations {
        let spec = match &a.selector {
            Selector::Point(points) => {
                let mut mapped = Vec::with_capacity(points.len());
                for &p in points {
                    let q = map(p);
                    if !mapped.contains(&q) {
                        mapped.push(q);
                    }
                }
                SelectorSpec::Point(mapped)
            }
            Selector::Line(lines) => {
                let mut mapped = Vec::with_capacity(lines.len());
                for line in lines {
                    let images: Vec<usize> = line.iter().map(|&v| map(v)).collect();
                    let mut chained = rechain(target, &images, false)?;
                    if chained.len() == 1 {
                        // a polyline that collapsed onto one vertex keeps a single edge
                        let v = chained[0];
                        chained.push(target.neighbors(v)[0]);
                    }
                    mapped.push(chained);
                }
                SelectorSpec::Line(mapped)
            }
            Selector::Region { boundaries, .. } => {
                let mut loops = Vec::with_capacity(boundaries.len());
                for (li, l) in boundaries.iter().enumerate() {
                    let images: Vec<usize> = l.iter().map(|&v| map(v)).collect();
                    let chained = remove_spikes(rechain(target, &images, true)?);
                    let mut distinct = chained.clone();
                    distinct.sort_unstable();
                    distinct.dedup();
                    if distinct.len() < 3 {
                        return Err(AnnotationError::LoopCollapse {
                            annotation: a.id,
                            loop_index: li,
                            distinct: distinct.len(),
                        });
                    }
                    loops.push(chained);
                }
                SelectorSpec::Region(loops)
            }
        };
        let selector = build_selector(target, spec)?;
        let mut attributes = a.attributes.clone();
        for attr in &mut attributes {
            if let AttributeKind::Measure(m) = &attr.kind {
                let mut points: Vec<usize> = m.points.iter().map(|&v| map(v)).collect();
                if matches!(m.tool, super::MeasureTool::Bounding { .. }) {
                    points.sort_unstable();
                    points.dedup();
                }
                attr.kind = AttributeKind::Measure(Measure::new(target, m.tool, points)?);
            }
        }
        out.push(Annotation {
            id: a.id,
            tag: a.tag.clone(),
            colour: a.colour,
            selector,
            attributes,
        });
    }
    Ok(out)
}

/// Join successive vertices with shortest edge paths, dropping consecutive duplicates.
/// For closed input the closing segment is included and the result has no repeated end.
fn rechain<T: Real>(mesh: &TriangleMesh<T>, images: &[usize], closed: bool) -> Result<Vec<usize>, AnnotationError> {
    let mut out: Vec<usize> = Vec::new();
    let n = images.len();
    let steps = if closed { n } else { n.saturating_sub(1) };
    if n == 1 || steps == 0 {
        return Ok(images.to_vec());
    }
    for k in 0..steps {
        let (a, b) = (images[k], images[(k + 1) % n]);
        let path = shortest_edge_path(mesh, a, b)?;
        for v in path.vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
    }
    if closed && out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    Ok(out)
}

/// Remove back-and-forth excursions `a b a` from a closed loop.
fn remove_spikes(mut l: Vec<usize>) -> Vec<usize> {
    loop {
        let n = l.len();
        if n < 3 {
            return l;
        }
        let hit = (0..n).find(|&i| l[i] == l[(i + 2) % n]);
        match hit {
            Some(i) => {
                // drop the tip and one copy of the repeated vertex
                let tip = (i + 1) % n;
                let again = (i + 2) % n;
                let (first, second) = if tip > again { (tip, again) } else { (again, tip) };
                l.remove(first);
                l.remove(second);
            }
            None => {
                let mut dedup: Vec<usize> = Vec::with_capacity(n);
                for &v in &l {
                    if dedup.last() != Some(&v) {
                        dedup.push(v);
                    }
                }
                if dedup.len() > 1 && dedup.first() == dedup.last() {
                    dedup.pop();
                }
                if dedup.len() == n {
                    return l;
                }
                l = dedup;
            }
        }
    }
}
