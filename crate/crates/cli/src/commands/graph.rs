use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use toml::Value;

use underreport::graph::geohash::{
    build_geohash_grid, decode_bbox, GeohashFilters, LocalEquirectangular, LonLatBounds, Projection, TractLayer,
};
use underreport::graph::geojson::{read_features, write_features, Feature};
use underreport::graph::geometry::BoundingBox;
use underreport::graph::{
    build_adjacency_from_polygons, repair_connectivity, AdjacencyOptions, EdgeProvenance, MultiPolygon, Point, Polygon,
};
use underreport::synthetic::SyntheticCity;
use underreport::{RawCovariates, SpatialGraph};

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{EDGES, GEOJSON, ID_PROPERTY, NODES};
use crate::manifest::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Geojson,
    Geohash,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crs {
    /// Longitude/latitude degrees, projected about the layer's center.
    Lonlat,
    /// Already in meters.
    Planar,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeohashSettings {
    /// `[min_lon, min_lat, max_lon, max_lat]`.
    pub bounds: Vec<f64>,
    pub resolution: u8,
    /// Tract polygons (lon/lat) whose population and covariates are
    /// apportioned to cells by area.
    pub tracts: Option<PathBuf>,
    pub tract_id_property: String,
    pub population_property: String,
    pub feature_properties: Vec<String>,
    pub water: Option<PathBuf>,
    pub water_id_property: String,
    pub max_water_fraction: Option<f64>,
    pub min_population: Option<f64>,
}

impl Default for GeohashSettings {
    fn default() -> Self {
        GeohashSettings {
            bounds: Vec::new(),
            resolution: 6,
            tracts: None,
            tract_id_property: "GEOID".into(),
            population_property: "population".into(),
            feature_properties: Vec::new(),
            water: None,
            water_id_property: "id".into(),
            max_water_fraction: None,
            min_population: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub rows: usize,
    pub cols: usize,
    /// Tract side in meters.
    pub cell: f64,
    pub jitter: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        SyntheticSettings {
            rows: 16,
            cols: 16,
            cell: 500.0,
            jitter: 0.3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSettings {
    pub out: PathBuf,
    pub source: Source,
    pub seed: u64,
    /// Polygon layer for `source = "geojson"`.
    pub geometry: Option<PathBuf>,
    pub id_property: String,
    pub crs: Crs,
    /// Meters.
    pub tolerance: f64,
    /// Join disconnected components by their closest centroids.
    pub repair: bool,
    pub geohash: GeohashSettings,
    pub synthetic: SyntheticSettings,
}

impl Default for GraphSettings {
    fn default() -> Self {
        GraphSettings {
            out: "graph".into(),
            source: Source::Synthetic,
            seed: 0,
            geometry: None,
            id_property: "GEOID".into(),
            crs: Crs::Lonlat,
            tolerance: 0.01,
            repair: true,
            geohash: GeohashSettings::default(),
            synthetic: SyntheticSettings::default(),
        }
    }
}

settings_out!(GraphSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("build-graph", file, sets, flags, execute)
}

fn execute(s: &GraphSettings, run: &mut Run) -> CliResult<()> {
    let (graph, features, covariates) = match s.source {
        Source::Geojson => from_geojson(s, run)?,
        Source::Geohash => from_geohash(s, run)?,
        Source::Synthetic => {
            let c = &s.synthetic;
            let city = SyntheticCity::jittered_grid(c.rows, c.cols, c.cell, c.jitter, s.seed)?;
            let features = city
                .polygons
                .iter()
                .map(|(id, mp)| feature(id, mp.clone(), Map::new()))
                .collect();
            (city.graph, features, Some(city.raw))
        }
    };
    let graph = if s.repair && !graph.is_connected() {
        repair_connectivity(&graph)?
    } else {
        graph
    };
    graph.write_nodes_csv(run.create(NODES)?)?;
    graph.write_edges_csv(run.create(EDGES)?)?;
    write_features(run.create(GEOJSON)?, &features)?;
    if let Some(raw) = covariates {
        raw.write_csv(run.create("covariates.csv")?, ID_PROPERTY)?;
    }
    let (_, components) = graph.components();
    run.write_json(
        "graph_summary.json",
        &serde_json::json!({
            "nodes": graph.len(),
            "edges": graph.edges().len(),
            "repair_edges": graph.edges().iter().filter(|e| e.provenance == EdgeProvenance::ConnectivityRepair).count(),
            "components": components,
        }),
    )
}

/// A feature keyed by [`ID_PROPERTY`], keeping other properties.
fn feature(id: &str, geometry: MultiPolygon, mut properties: Map<String, Json>) -> Feature {
    properties.insert(ID_PROPERTY.into(), Json::String(id.to_string()));
    Feature {
        id: id.to_string(),
        geometry,
        properties,
    }
}

fn project_mp<P: Projection>(mp: &MultiPolygon, proj: &P) -> MultiPolygon {
    let ring = |r: &[Point]| r.iter().map(|p| proj.project(p.x, p.y)).collect::<Vec<_>>();
    MultiPolygon::new(
        mp.parts
            .iter()
            .map(|p| Polygon::with_holes(ring(&p.exterior), p.holes.iter().map(|h| ring(h)).collect()))
            .collect(),
    )
}

fn layer_bounds(features: &[Feature]) -> LonLatBounds {
    let mut bb = BoundingBox::empty();
    for f in features {
        bb.merge(&f.geometry.bbox());
    }
    LonLatBounds {
        min_lon: bb.min_x,
        min_lat: bb.min_y,
        max_lon: bb.max_x,
        max_lat: bb.max_y,
    }
}

type Built = (SpatialGraph, Vec<Feature>, Option<RawCovariates>);

fn from_geojson(s: &GraphSettings, run: &mut Run) -> CliResult<Built> {
    let path = s
        .geometry
        .as_deref()
        .ok_or_else(|| CliError::config("source `geojson` needs `geometry`"))?;
    let input = read_features(run.read(path)?.as_slice(), &s.id_property)?;
    let planar: Vec<(String, MultiPolygon)> = match s.crs {
        Crs::Planar => input.iter().map(|f| (f.id.clone(), f.geometry.clone())).collect(),
        Crs::Lonlat => {
            let proj = layer_bounds(&input).center();
            input.iter().map(|f| (f.id.clone(), project_mp(&f.geometry, &proj))).collect()
        }
    };
    let graph = build_adjacency_from_polygons(&planar, AdjacencyOptions { tolerance: s.tolerance })?;
    let features = input
        .into_iter()
        .map(|f| feature(&f.id, f.geometry, f.properties))
        .collect();
    Ok((graph, features, None))
}

fn from_geohash(s: &GraphSettings, run: &mut Run) -> CliResult<Built> {
    let g = &s.geohash;
    let bounds = match g.bounds.as_slice() {
        &[min_lon, min_lat, max_lon, max_lat] => LonLatBounds {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        },
        _ => return Err(CliError::config("geohash.bounds needs [min_lon, min_lat, max_lon, max_lat]")),
    };
    let tracts = match &g.tracts {
        Some(p) => {
            let features = read_features(run.read(p)?.as_slice(), &g.tract_id_property)?;
            let number = |f: &Feature, key: &str| -> CliResult<f64> {
                f.properties.get(key).and_then(Json::as_f64).ok_or_else(|| {
                    CliError::new("missing_feature", format!("tract `{}` lacks numeric `{key}`", f.id))
                })
            };
            let mut layer = TractLayer {
                feature_names: g.feature_properties.clone(),
                ..TractLayer::default()
            };
            for f in &features {
                layer.population.push(number(f, &g.population_property)?);
                layer.covariates.push(
                    g.feature_properties
                        .iter()
                        .map(|k| number(f, k))
                        .collect::<CliResult<Vec<_>>>()?,
                );
                layer.polygons.push(f.geometry.clone());
            }
            Some(layer)
        }
        None => None,
    };
    let water: Vec<MultiPolygon> = match &g.water {
        Some(p) => read_features(run.read(p)?.as_slice(), &g.water_id_property)?
            .into_iter()
            .map(|f| f.geometry)
            .collect(),
        None => Vec::new(),
    };
    let proj: LocalEquirectangular = bounds.center();
    let filters = GeohashFilters {
        max_water_fraction: g.max_water_fraction,
        min_population: g.min_population,
    };
    let grid = build_geohash_grid(bounds, g.resolution, &proj, tracts.as_ref(), &water, filters)?;
    let features = grid
        .graph
        .node_ids()
        .map(|id| {
            let bb = decode_bbox(id)?;
            let mp = MultiPolygon::new(vec![Polygon::rectangle(bb.min_x, bb.min_y, bb.max_x, bb.max_y)]);
            Ok(feature(id, mp, Map::new()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let covariates = match (&grid.population, &grid.covariates) {
        (Some(pop), Some(cov)) => {
            let mut columns = grid.feature_names.clone();
            columns.push("population".into());
            let rows = cov
                .iter()
                .zip(pop)
                .map(|(row, &p)| {
                    row.iter()
                        .chain(std::iter::once(&p))
                        .map(|v| v.is_finite().then_some(*v))
                        .collect()
                })
                .collect();
            Some(RawCovariates {
                node_ids: grid.graph.node_ids().map(str::to_string).collect(),
                columns,
                rows,
            })
        }
        _ => None,
    };
    Ok((grid.graph, features, covariates))
}
