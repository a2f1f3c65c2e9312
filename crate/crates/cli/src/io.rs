//! File formats shared by several commands.

use std::path::Path;

use underreport::dataset::{read_dataset_csv, DatasetTable};
use underreport::graph::geojson::{read_features, Feature};
use underreport::graph::MultiPolygon;
use underreport::SpatialGraph;

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub const NODES: &str = "nodes.csv";
pub const EDGES: &str = "edges.csv";
pub const GEOJSON: &str = "graph.geojson";
/// Property holding the node id in GeoJSON files written by this tool.
pub const ID_PROPERTY: &str = "node_id";

pub fn load_graph(run: &mut Run, dir: &Path) -> CliResult<SpatialGraph> {
    let nodes = run.read(&dir.join(NODES))?;
    let edges = run.read(&dir.join(EDGES))?;
    Ok(SpatialGraph::read_csv(nodes.as_slice(), edges.as_slice())?)
}

/// The graph's polygons, if `build-graph` wrote them.
pub fn load_graph_features(run: &mut Run, dir: &Path) -> CliResult<Option<Vec<Feature>>> {
    let path = dir.join(GEOJSON);
    if !path.exists() {
        return Ok(None);
    }
    let bytes = run.read(&path)?;
    Ok(Some(read_features(bytes.as_slice(), ID_PROPERTY)?))
}

pub fn polygons(features: &[Feature]) -> Vec<(String, MultiPolygon)> {
    features.iter().map(|f| (f.id.clone(), f.geometry.clone())).collect()
}

/// Dataset rows in graph order.
pub fn load_dataset(run: &mut Run, path: &Path, graph: &SpatialGraph) -> CliResult<DatasetTable> {
    let bytes = run.read(path)?;
    Ok(read_dataset_csv(bytes.as_slice())?.align(graph)?)
}

/// Reads `node_id,score` (extra columns ignored) in graph order. Every graph
/// node must be scored.
pub fn read_scores(run: &mut Run, path: &Path, graph: &SpatialGraph) -> CliResult<Vec<f64>> {
    let bytes = run.read(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::new("parse", format!("{}: no `{name}` column", path.display())))
    };
    let (id, score) = (col("node_id")?, col("score")?);
    let mut out = vec![f64::NAN; graph.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let node = rec.get(id).unwrap_or("");
        let i = graph
            .index_of(node)
            .ok_or_else(|| CliError::new("unknown_node", format!("{}: node `{node}`", path.display())))?;
        let raw = rec.get(score).unwrap_or("");
        out[i] = raw
            .trim()
            .parse()
            .map_err(|_| CliError::new("parse", format!("{}: score `{raw}`", path.display())))?;
    }
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        return Err(CliError::new(
            "unknown_node",
            format!("{}: no score for node `{}`", path.display(), graph.node_id(i)),
        ));
    }
    Ok(out)
}

pub fn write_scores(run: &mut Run, name: &str, graph: &SpatialGraph, scores: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create(name)?);
    w.write_record(["node_id", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([graph.node_id(i), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
