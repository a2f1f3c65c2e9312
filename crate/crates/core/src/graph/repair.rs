use super::{Edge, EdgeProvenance, SpatialGraph};
use crate::error::Result;
use crate::unionfind::UnionFind;

/// Bridges disconnected components with minimum centroid-distance edges.
///
/// Components are merged greedily, closest pair first, which is Kruskal's
/// algorithm on the component graph weighted by the closest node pair. Added
/// edges are tagged [`EdgeProvenance::ConnectivityRepair`]. Connected input is
/// returned unchanged.
pub fn repair_connectivity(graph: &SpatialGraph) -> Result<SpatialGraph> {
    let (label, count) = graph.components();
    if count <= 1 {
        return Ok(graph.clone());
    }

    // closest node pair between every pair of components
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; count * count];
    let n = graph.len();
    for i in 0..n {
        let ci = graph.centroid(i);
        for j in (i + 1)..n {
            let (a, b) = (label[i], label[j]);
            if a == b {
                continue;
            }
            let d = ci.distance(&graph.centroid(j));
            let slot = &mut best[a.min(b) * count + a.max(b)];
            if slot.map_or(true, |(bd, _, _)| d < bd) {
                *slot = Some((d, i, j));
            }
        }
    }

    let mut candidates: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    for a in 0..count {
        for b in (a + 1)..count {
            if let Some((d, i, j)) = best[a * count + b] {
                candidates.push((d, i, j, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut uf = UnionFind::new(count);
    let mut edges = graph.edges().to_vec();
    for (_, i, j, a, b) in candidates {
        if uf.union(a, b) {
            edges.push(Edge {
                a: i,
                b: j,
                provenance: EdgeProvenance::ConnectivityRepair,
            });
        }
    }
    SpatialGraph::new(graph.nodes().to_vec(), edges)
}
