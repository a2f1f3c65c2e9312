//! Spatial network construction: polygon contiguity, geohash grids,
//! connectivity repair and graph serialization.

mod adjacency;
pub mod geohash;
pub mod geojson;
pub mod geometry;
mod repair;

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adjacency::{build_adjacency_from_polygons, AdjacencyOptions};
pub use geometry::{MultiPolygon, Point, Polygon};
pub use repair::repair_connectivity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeProvenance {
    SharedBorder,
    ConnectivityRepair,
}

impl fmt::Display for EdgeProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeProvenance::SharedBorder => "shared-border",
            EdgeProvenance::ConnectivityRepair => "connectivity-repair",
        })
    }
}

impl FromStr for EdgeProvenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-border" => Ok(EdgeProvenance::SharedBorder),
            "connectivity-repair" => Ok(EdgeProvenance::ConnectivityRepair),
            other => Err(Error::parse("edge provenance", other)),
        }
    }
}

/// Undirected edge stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub provenance: EdgeProvenance,
}

/// Per-node attributes carried by the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeInfo {
    pub id: String,
    pub centroid: Point,
    pub land_area: f64,
}

/// An immutable, symmetric, loop-free spatial network.
///
/// Neighbor lists are kept in compressed sparse row form since the samplers
/// sweep them millions of times.
#[derive(Clone, Debug)]
pub struct SpatialGraph {
    nodes: Vec<NodeInfo>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    index: HashMap<String, usize>,
}

impl SpatialGraph {
    pub fn new(nodes: Vec<NodeInfo>, edges: Vec<Edge>) -> Result<Self> {
        let n = nodes.len();
        let mut index = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let (a, b) = (e.a.min(e.b), e.a.max(e.b));
            if b >= n {
                return Err(Error::IndexOutOfBounds { index: b, len: n });
            }
            if a == b {
                return Err(Error::InvalidConfig(format!(
                    "self-loop at node `{}`",
                    nodes[a].id
                )));
            }
            normalized.push(Edge {
                a,
                b,
                provenance: e.provenance,
            });
        }
        normalized.sort_by_key(|e| (e.a, e.b));
        normalized.dedup_by_key(|e| (e.a, e.b));

        let mut degree = vec![0usize; n];
        for e in &normalized {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for e in &normalized {
            neighbors[fill[e.a]] = e.b;
            fill[e.a] += 1;
            neighbors[fill[e.b]] = e.a;
            fill[e.b] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(SpatialGraph {
            nodes,
            edges: normalized,
            offsets,
            neighbors,
            index,
        })
    }

    /// Graph over `n` abstract nodes (ids `"0"`, `"1"`, ...) placed at the origin.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let nodes = (0..n)
            .map(|i| NodeInfo {
                id: i.to_string(),
                centroid: Point::new(0.0, 0.0),
                land_area: 1.0,
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(a, b)| Edge {
                a,
                b,
                provenance: EdgeProvenance::SharedBorder,
            })
            .collect();
        SpatialGraph::new(nodes, edges)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edge_list(n, &edges).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edge_list(n, &edges).expect("valid cycle")
    }

    /// Star with node 0 at the center and `n - 1` leaves.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edge_list(n, &edges).expect("valid star")
    }

    /// Rook lattice with unit spacing; node `r * cols + c` sits at `(c, r)`.
    pub fn lattice(rows: usize, cols: usize) -> Self {
        let mut nodes = Vec::with_capacity(rows * cols);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                nodes.push(NodeInfo {
                    id: i.to_string(),
                    centroid: Point::new(c as f64, r as f64),
                    land_area: 1.0,
                });
                if c + 1 < cols {
                    edges.push(Edge {
                        a: i,
                        b: i + 1,
                        provenance: EdgeProvenance::SharedBorder,
                    });
                }
                if r + 1 < rows {
                    edges.push(Edge {
                        a: i,
                        b: i + cols,
                        provenance: EdgeProvenance::SharedBorder,
                    });
                }
            }
        }
        SpatialGraph::new(nodes, edges).expect("valid lattice")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn centroid(&self, i: usize) -> Point {
        self.nodes[i].centroid
    }

    pub fn land_area(&self, i: usize) -> f64 {
        self.nodes[i].land_area
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Component label per node (labels are dense, ordered by first node) and
    /// the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn is_connected(&self) -> bool {
        self.len() <= 1 || self.components().1 == 1
    }

    /// Induced subgraph on `keep` (in the given order).
    pub fn subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.len() {
                return Err(Error::IndexOutOfBounds {
                    index: old,
                    len: self.len(),
                });
            }
            remap[old] = new;
        }
        let nodes = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| remap[e.a] != usize::MAX && remap[e.b] != usize::MAX)
            .map(|e| Edge {
                a: remap[e.a],
                b: remap[e.b],
                provenance: e.provenance,
            })
            .collect();
        SpatialGraph::new(nodes, edges)
    }

    /// Writes `id,centroid_x,centroid_y,land_area`.
    pub fn write_nodes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["id", "centroid_x", "centroid_y", "land_area"])?;
        for n in &self.nodes {
            wtr.write_record([
                n.id.clone(),
                n.centroid.x.to_string(),
                n.centroid.y.to_string(),
                n.land_area.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `src,dst,provenance` using node ids.
    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["src", "dst", "provenance"])?;
        for e in &self.edges {
            wtr.write_record([
                self.nodes[e.a].id.as_str(),
                self.nodes[e.b].id.as_str(),
                &e.provenance.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R1: Read, R2: Read>(nodes: R1, edges: R2) -> Result<Self> {
        #[derive(Deserialize)]
        struct NodeRow {
            id: String,
            centroid_x: f64,
            centroid_y: f64,
            land_area: f64,
        }
        #[derive(Deserialize)]
        struct EdgeRow {
            src: String,
            dst: String,
            provenance: String,
        }
        let mut infos = Vec::new();
        for row in csv::Reader::from_reader(nodes).deserialize() {
            let row: NodeRow = row?;
            infos.push(NodeInfo {
                id: row.id,
                centroid: Point::new(row.centroid_x, row.centroid_y),
                land_area: row.land_area,
            });
        }
        let index: HashMap<&str, usize> = infos
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut list = Vec::new();
        for row in csv::Reader::from_reader(edges).deserialize() {
            let row: EdgeRow = row?;
            let a = *index
                .get(row.src.as_str())
                .ok_or_else(|| Error::UnknownNode(row.src.clone()))?;
            let b = *index
                .get(row.dst.as_str())
                .ok_or_else(|| Error::UnknownNode(row.dst.clone()))?;
            list.push(Edge {
                a,
                b,
                provenance: row.provenance.parse()?,
            });
        }
        drop(index);
        SpatialGraph::new(infos, list)
    }
}
