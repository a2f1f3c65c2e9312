use std::collections::{HashMap, HashSet};

use super::geometry::{MultiPolygon, Point};
use super::{Edge, EdgeProvenance, NodeInfo, SpatialGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AdjacencyOptions {
    /// Maximum perpendicular offset (meters) for two boundary segments to be
    /// considered collinear, and the minimum shared length for adjacency.
    pub tolerance: f64,
}

impl Default for AdjacencyOptions {
    fn default() -> Self {
        AdjacencyOptions { tolerance: 1e-6 }
    }
}

/// Rook contiguity: two nodes are adjacent when their boundaries share a
/// segment of positive length. Touching at a single point does not count.
///
/// The result is not repaired for connectivity; see [`super::repair_connectivity`].
pub fn build_adjacency_from_polygons(
    geometries: &[(String, MultiPolygon)],
    options: AdjacencyOptions,
) -> Result<SpatialGraph> {
    let tol = options.tolerance.max(0.0);
    let mut seen = HashSet::with_capacity(geometries.len());
    let mut nodes = Vec::with_capacity(geometries.len());
    for (id, geom) in geometries {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateNode(id.clone()));
        }
        geom.validate(id)?;
        nodes.push(NodeInfo {
            id: id.clone(),
            centroid: geom.centroid(),
            land_area: geom.area(),
        });
    }

    let mut segments: Vec<(usize, Point, Point)> = Vec::new();
    for (owner, (_, geom)) in geometries.iter().enumerate() {
        segments.extend(
            geom.segments()
                .filter(|(p, q)| p != q)
                .map(|(p, q)| (owner, p, q)),
        );
    }
    let pairs = shared_border_pairs(&segments, tol);
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            provenance: EdgeProvenance::SharedBorder,
        })
        .collect();
    SpatialGraph::new(nodes, edges)
}

/// Uniform-grid spatial hash over segments; candidate pairs within a cell are
/// tested exactly.
fn shared_border_pairs(segments: &[(usize, Point, Point)], tol: f64) -> Vec<(usize, usize)> {
    if segments.is_empty() {
        return Vec::new();
    }
    let mut lengths: Vec<f64> = segments.iter().map(|(_, p, q)| p.distance(q)).collect();
    let mid = lengths.len() / 2;
    lengths.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let cell = (lengths[mid] * 2.0).max(tol * 4.0).max(f64::MIN_POSITIVE);

    let key = |v: f64| (v / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (s, (_, p, q)) in segments.iter().enumerate() {
        let (x0, x1) = (key(p.x.min(q.x) - tol), key(p.x.max(q.x) + tol));
        let (y0, y1) = (key(p.y.min(q.y) - tol), key(p.y.max(q.y) + tol));
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                grid.entry((gx, gy)).or_default().push(s as u32);
            }
        }
    }

    let mut found: HashSet<(usize, usize)> = HashSet::new();
    for bucket in grid.values() {
        for (k, &s) in bucket.iter().enumerate() {
            let (oa, pa, qa) = segments[s as usize];
            for &t in &bucket[k + 1..] {
                let (ob, pb, qb) = segments[t as usize];
                if oa == ob {
                    continue;
                }
                let pair = (oa.min(ob), oa.max(ob));
                if found.contains(&pair) {
                    continue;
                }
                if collinear_overlap(pa, qa, pb, qb, tol) {
                    found.insert(pair);
                }
            }
        }
    }
    let mut pairs: Vec<_> = found.into_iter().collect();
    pairs.sort_unstable();
    pairs
}

/// True when the two segments lie on a common line (within `tol`) and overlap
/// by more than `tol` along it.
pub(crate) fn collinear_overlap(p0: Point, p1: Point, q0: Point, q1: Point, tol: f64) -> bool {
    let (a0, a1, b0, b1) = if p0.distance(&p1) >= q0.distance(&q1) {
        (p0, p1, q0, q1)
    } else {
        (q0, q1, p0, p1)
    };
    let len = a0.distance(&a1);
    if len <= tol {
        return false;
    }
    let (ux, uy) = ((a1.x - a0.x) / len, (a1.y - a0.y) / len);
    let perp = |p: Point| (ux * (p.y - a0.y) - uy * (p.x - a0.x)).abs();
    if perp(b0) > tol || perp(b1) > tol {
        return false;
    }
    let along = |p: Point| ux * (p.x - a0.x) + uy * (p.y - a0.y);
    let (t0, t1) = (along(b0), along(b1));
    let overlap = t0.max(t1).min(len) - t0.min(t1).max(0.0);
    overlap > tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::geometry::Polygon;

    fn square(id: &str, x: f64, y: f64) -> (String, MultiPolygon) {
        (
            id.to_string(),
            Polygon::rectangle(x, y, x + 1.0, y + 1.0).into(),
        )
    }

    #[test]
    fn two_by_two_grid_is_rook() {
        let geoms = vec![
            square("a", 0.0, 0.0),
            square("b", 1.0, 0.0),
            square("c", 0.0, 1.0),
            square("d", 1.0, 1.0),
        ];
        let g = build_adjacency_from_polygons(&geoms, AdjacencyOptions::default()).unwrap();
        assert_eq!(g.edges().len(), 4);
        // diagonal pairs only touch at a corner
        assert!(!g.is_adjacent(0, 3));
        assert!(!g.is_adjacent(1, 2));
        assert!(g.is_adjacent(0, 1) && g.is_adjacent(0, 2));
    }

    #[test]
    fn single_polygon() {
        let g = build_adjacency_from_polygons(&[square("x", 0.0, 0.0)], Default::default())
            .unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.edges().is_empty());
        assert!((g.land_area(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_junction_partial_border() {
        // A wide rectangle under two unit squares: borders overlap without
        // sharing vertices.
        let geoms = vec![
            ("base".to_string(), Polygon::rectangle(0.0, 0.0, 2.0, 1.0).into()),
            square("l", 0.0, 1.0),
            square("r", 1.0, 1.0),
        ];
        let g = build_adjacency_from_polygons(&geoms, Default::default()).unwrap();
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn duplicate_and_invalid_geometry() {
        let dup = vec![square("a", 0.0, 0.0), square("a", 1.0, 0.0)];
        assert!(matches!(
            build_adjacency_from_polygons(&dup, Default::default()),
            Err(Error::DuplicateNode(_))
        ));
        let bad = vec![
            square("ok", 0.0, 0.0),
            ("broken".to_string(), MultiPolygon::new(vec![])),
        ];
        match build_adjacency_from_polygons(&bad, Default::default()) {
            Err(Error::InvalidGeometry { id, .. }) => assert_eq!(id, "broken"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlap_predicate() {
        let p = |x, y| Point::new(x, y);
        assert!(collinear_overlap(p(0., 0.), p(2., 0.), p(1., 0.), p(3., 0.), 1e-9));
        assert!(!collinear_overlap(p(0., 0.), p(1., 0.), p(1., 0.), p(2., 0.), 1e-9));
        assert!(!collinear_overlap(p(0., 0.), p(1., 0.), p(0., 0.1), p(1., 0.1), 1e-9));
        assert!(!collinear_overlap(p(0., 0.), p(1., 1.), p(1., 1.), p(2., 0.), 1e-9));
    }
}
