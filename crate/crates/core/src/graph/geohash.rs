//! Geohash grids as an alternative spatial network.
//!
//! Cells at a fixed resolution form a regular lon/lat lattice, so adjacency is
//! computed from integer cell coordinates. Tract-level covariates are carried
//! onto cells by areal interpolation of tract population, and every cell
//! attribute is then the population-weighted mean over intersecting tracts.

use super::geometry::{intersection_area, BoundingBox, MultiPolygon, Point, Polygon};
use super::{repair_connectivity, Edge, EdgeProvenance, NodeInfo, SpatialGraph};
use crate::error::{Error, Result};

const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Number of (longitude, latitude) bits at a resolution.
fn bit_split(resolution: u8) -> (u32, u32) {
    let bits = 5 * resolution as u32;
    (bits.div_ceil(2), bits / 2)
}

/// Width and height in degrees of a cell.
pub fn cell_size(resolution: u8) -> (f64, f64) {
    let (lon_bits, lat_bits) = bit_split(resolution);
    (
        360.0 / (1u64 << lon_bits) as f64,
        180.0 / (1u64 << lat_bits) as f64,
    )
}

/// Geohash of the cell at integer lattice coordinates.
pub fn cell_hash(col: u64, row: u64, resolution: u8) -> String {
    let (lon_bits, lat_bits) = bit_split(resolution);
    let (mut lon_left, mut lat_left) = (lon_bits, lat_bits);
    let mut out = String::with_capacity(resolution as usize);
    let mut chunk = 0u8;
    for k in 0..(lon_bits + lat_bits) {
        let bit = if k % 2 == 0 {
            lon_left -= 1;
            (col >> lon_left) & 1
        } else {
            lat_left -= 1;
            (row >> lat_left) & 1
        };
        chunk = (chunk << 1) | bit as u8;
        if k % 5 == 4 {
            out.push(BASE32[chunk as usize] as char);
            chunk = 0;
        }
    }
    out
}

fn lattice_coords(lon: f64, lat: f64, resolution: u8) -> (u64, u64) {
    let (lon_bits, lat_bits) = bit_split(resolution);
    let (w, h) = cell_size(resolution);
    let col = (((lon + 180.0) / w).floor() as i64).clamp(0, (1i64 << lon_bits) - 1);
    let row = (((lat + 90.0) / h).floor() as i64).clamp(0, (1i64 << lat_bits) - 1);
    (col as u64, row as u64)
}

pub fn encode(lon: f64, lat: f64, resolution: u8) -> String {
    let (col, row) = lattice_coords(lon, lat, resolution);
    cell_hash(col, row, resolution)
}

/// Bounding box (lon/lat degrees) of a geohash.
pub fn decode_bbox(hash: &str) -> Result<BoundingBox> {
    let (mut lon_lo, mut lon_hi, mut lat_lo, mut lat_hi) = (-180.0, 180.0, -90.0, 90.0);
    let mut even = true;
    for ch in hash.bytes() {
        let v = BASE32
            .iter()
            .position(|&b| b == ch)
            .ok_or_else(|| Error::parse("geohash", hash))?;
        for shift in (0..5).rev() {
            let bit = (v >> shift) & 1 == 1;
            if even {
                let mid = (lon_lo + lon_hi) / 2.0;
                if bit {
                    lon_lo = mid
                } else {
                    lon_hi = mid
                }
            } else {
                let mid = (lat_lo + lat_hi) / 2.0;
                if bit {
                    lat_lo = mid
                } else {
                    lat_hi = mid
                }
            }
            even = !even;
        }
    }
    Ok(BoundingBox {
        min_x: lon_lo,
        min_y: lat_lo,
        max_x: lon_hi,
        max_y: lat_hi,
    })
}

/// Maps lon/lat degrees to planar meters.
pub trait Projection {
    fn project(&self, lon: f64, lat: f64) -> Point;
}

impl<F: Fn(f64, f64) -> Point> Projection for F {
    fn project(&self, lon: f64, lat: f64) -> Point {
        self(lon, lat)
    }
}

/// Equirectangular projection about a reference point; adequate at city scale.
#[derive(Clone, Copy, Debug)]
pub struct LocalEquirectangular {
    pub lon0: f64,
    pub lat0: f64,
}

impl Projection for LocalEquirectangular {
    fn project(&self, lon: f64, lat: f64) -> Point {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        Point::new(
            k * (lon - self.lon0) * self.lat0.to_radians().cos(),
            k * (lat - self.lat0),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LonLatBounds {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl LonLatBounds {
    pub fn center(&self) -> LocalEquirectangular {
        LocalEquirectangular {
            lon0: (self.min_lon + self.max_lon) / 2.0,
            lat0: (self.min_lat + self.max_lat) / 2.0,
        }
    }
}

/// Tract polygons (lon/lat) with population and raw covariate rows.
#[derive(Clone, Debug, Default)]
pub struct TractLayer {
    pub polygons: Vec<MultiPolygon>,
    pub population: Vec<f64>,
    pub feature_names: Vec<String>,
    pub covariates: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GeohashFilters {
    /// Drop cells whose water-covered share of area exceeds this value.
    pub max_water_fraction: Option<f64>,
    /// Drop cells with less assumed population than this.
    pub min_population: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GeohashGrid {
    pub graph: SpatialGraph,
    pub water_fraction: Vec<f64>,
    /// Present when a tract layer was supplied.
    pub population: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
    /// Population-weighted tract covariates per cell (NaN where no tract
    /// population intersects the cell).
    pub covariates: Option<Vec<Vec<f64>>>,
}

struct Cell {
    col: u64,
    row: u64,
    hash: String,
    ring_ll: Vec<Point>,
}

/// Builds a rook-adjacent geohash lattice covering `bounds`.
pub fn build_geohash_grid<P: Projection>(
    bounds: LonLatBounds,
    resolution: u8,
    projection: &P,
    tracts: Option<&TractLayer>,
    water: &[MultiPolygon],
    filters: GeohashFilters,
) -> Result<GeohashGrid> {
    if !(4..=7).contains(&resolution) {
        return Err(Error::GeohashResolution(resolution));
    }
    if filters.min_population.is_some() && tracts.is_none() {
        return Err(Error::InvalidConfig(
            "min_population filter requires tract population".into(),
        ));
    }
    let (w, h) = cell_size(resolution);
    let (c0, r0) = lattice_coords(bounds.min_lon, bounds.min_lat, resolution);
    let c1 = ((((bounds.max_lon + 180.0) / w).ceil() as u64).saturating_sub(1)).max(c0);
    let r1 = ((((bounds.max_lat + 90.0) / h).ceil() as u64).saturating_sub(1)).max(r0);

    let mut cells = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            let (lon, lat) = (col as f64 * w - 180.0, row as f64 * h - 90.0);
            cells.push(Cell {
                col,
                row,
                hash: cell_hash(col, row, resolution),
                ring_ll: Polygon::rectangle(lon, lat, lon + w, lat + h).exterior,
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyAfterFilter("bounds"));
    }

    let project_ring = |ring: &[Point]| -> Vec<Point> {
        ring.iter().map(|p| projection.project(p.x, p.y)).collect()
    };
    let project_mp = |mp: &MultiPolygon| MultiPolygon {
        parts: mp
            .parts
            .iter()
            .map(|part| Polygon {
                exterior: project_ring(&part.exterior),
                holes: part.holes.iter().map(|h| project_ring(h)).collect(),
            })
            .collect(),
    };

    let water_planar: Vec<(BoundingBox, MultiPolygon)> =
        water.iter().map(|mp| (mp.bbox(), project_mp(mp))).collect();
    let tract_planar: Vec<(BoundingBox, MultiPolygon, f64)> = tracts
        .map(|t| {
            t.polygons
                .iter()
                .map(|mp| {
                    let planar = project_mp(mp);
                    let area = planar.area();
                    (mp.bbox(), planar, area)
                })
                .collect()
        })
        .unwrap_or_default();

    let n_features = tracts.map_or(0, |t| t.feature_names.len());
    let mut water_fraction = Vec::with_capacity(cells.len());
    let mut population = Vec::with_capacity(cells.len());
    let mut covariates = Vec::with_capacity(cells.len());
    let mut areas = Vec::with_capacity(cells.len());
    for cell in &cells {
        let planar = project_ring(&cell.ring_ll);
        let cell_area = super::geometry::ring_signed_area(&planar).abs();
        areas.push(cell_area);
        let cell_bb = Polygon::new(cell.ring_ll.clone()).bbox();

        let wet: f64 = water_planar
            .iter()
            .filter(|(bb, _)| bb.intersects(&cell_bb))
            .map(|(_, mp)| intersection_area(mp, &planar))
            .sum();
        water_fraction.push((wet / cell_area).clamp(0.0, 1.0));

        if let Some(layer) = tracts {
            let mut pop = 0.0;
            let mut acc = vec![0.0; n_features];
            for (t, (bb, mp, tract_area)) in tract_planar.iter().enumerate() {
                if !bb.intersects(&cell_bb) || *tract_area <= 0.0 {
                    continue;
                }
                let share = intersection_area(mp, &planar) / tract_area;
                if share <= 0.0 {
                    continue;
                }
                let contributed = layer.population[t] * share;
                pop += contributed;
                for (a, x) in acc.iter_mut().zip(&layer.covariates[t]) {
                    *a += contributed * x;
                }
            }
            population.push(pop);
            covariates.push(
                acc.into_iter()
                    .map(|a| if pop > 0.0 { a / pop } else { f64::NAN })
                    .collect::<Vec<_>>(),
            );
        }
    }

    let mut keep: Vec<usize> = (0..cells.len()).collect();
    if let Some(max_w) = filters.max_water_fraction {
        keep.retain(|&i| water_fraction[i] <= max_w);
        if keep.is_empty() {
            return Err(Error::EmptyAfterFilter("max_water_fraction"));
        }
    }
    if let Some(min_p) = filters.min_population {
        keep.retain(|&i| population[i] >= min_p);
        if keep.is_empty() {
            return Err(Error::EmptyAfterFilter("min_population"));
        }
    }
    keep.sort_by(|&a, &b| cells[a].hash.cmp(&cells[b].hash));

    let position: std::collections::HashMap<(u64, u64), usize> = keep
        .iter()
        .enumerate()
        .map(|(k, &i)| ((cells[i].col, cells[i].row), k))
        .collect();
    let nodes = keep
        .iter()
        .map(|&i| {
            let c = &cells[i];
            NodeInfo {
                id: c.hash.clone(),
                centroid: projection
                    .project((c.col as f64 + 0.5) * w - 180.0, (c.row as f64 + 0.5) * h - 90.0),
                land_area: areas[i] * (1.0 - water_fraction[i]),
            }
        })
        .collect();
    let mut edges = Vec::new();
    for (k, &i) in keep.iter().enumerate() {
        let c = &cells[i];
        for (dc, dr) in [(1u64, 0u64), (0, 1)] {
            if let Some(&other) = position.get(&(c.col + dc, c.row + dr)) {
                edges.push(Edge {
                    a: k,
                    b: other,
                    provenance: EdgeProvenance::SharedBorder,
                });
            }
        }
    }
    let graph = repair_connectivity(&SpatialGraph::new(nodes, edges)?)?;

    Ok(GeohashGrid {
        graph,
        water_fraction: keep.iter().map(|&i| water_fraction[i]).collect(),
        population: tracts.map(|_| keep.iter().map(|&i| population[i]).collect()),
        feature_names: tracts.map(|t| t.feature_names.clone()).unwrap_or_default(),
        covariates: tracts.map(|_| keep.iter().map(|&i| covariates[i].clone()).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_encodings() {
        // Reference values from the public geohash definition.
        assert_eq!(encode(-5.60302734375, 42.60498046875, 5), "ezs42");
        assert_eq!(encode(10.40744, 57.64911, 7), "u4pruyd");
    }

    #[test]
    fn decode_contains_encoded_point() {
        let (lon, lat) = (-73.9857, 40.7484);
        for r in 4..=7 {
            let bb = decode_bbox(&encode(lon, lat, r)).unwrap();
            assert!(bb.min_x <= lon && lon < bb.max_x);
            assert!(bb.min_y <= lat && lat < bb.max_y);
            let (w, h) = cell_size(r);
            assert!((bb.max_x - bb.min_x - w).abs() < 1e-12);
            assert!((bb.max_y - bb.min_y - h).abs() < 1e-12);
        }
    }

    fn block(resolution: u8, cols: f64, rows: f64) -> LonLatBounds {
        let (w, h) = cell_size(resolution);
        // start at a cell corner so the block is exactly cols x rows
        let (c, r) = lattice_coords(-74.0, 40.7, resolution);
        let lon = c as f64 * w - 180.0;
        let lat = r as f64 * h - 90.0;
        LonLatBounds {
            min_lon: lon + 1e-9,
            min_lat: lat + 1e-9,
            max_lon: lon + cols * w - 1e-9,
            max_lat: lat + rows * h - 1e-9,
        }
    }

    #[test]
    fn single_cell() {
        let b = block(6, 1.0, 1.0);
        let g = build_geohash_grid(b, 6, &b.center(), None, &[], Default::default()).unwrap();
        assert_eq!(g.graph.len(), 1);
        assert!(g.graph.edges().is_empty());
    }

    #[test]
    fn water_filter_names_itself() {
        let b = block(6, 2.0, 1.0);
        let sea = MultiPolygon::from(Polygon::rectangle(-75.0, 40.0, -73.0, 41.5));
        let filters = GeohashFilters {
            max_water_fraction: Some(0.5),
            min_population: None,
        };
        match build_geohash_grid(b, 6, &b.center(), None, &[sea], filters) {
            Err(Error::EmptyAfterFilter(name)) => assert_eq!(name, "max_water_fraction"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolution_guard() {
        let b = block(6, 1.0, 1.0);
        assert!(matches!(
            build_geohash_grid(b, 3, &b.center(), None, &[], Default::default()),
            Err(Error::GeohashResolution(3))
        ));
    }

    #[test]
    fn population_weighted_projection() {
        // Two tracts split a 2x1 block; the left tract also spills over half of
        // the right cell.
        let r = 6;
        let b = block(r, 2.0, 1.0);
        let (w, h) = cell_size(r);
        let (lon, lat) = (b.min_lon - 1e-9, b.min_lat - 1e-9);
        let left = Polygon::rectangle(lon, lat, lon + 1.5 * w, lat + h);
        let right = Polygon::rectangle(lon + 1.5 * w, lat, lon + 2.0 * w, lat + h);
        let layer = TractLayer {
            polygons: vec![left.into(), right.into()],
            population: vec![300.0, 100.0],
            feature_names: vec!["share".into()],
            covariates: vec![vec![0.0], vec![1.0]],
        };
        let g = build_geohash_grid(b, r, &b.center(), Some(&layer), &[], Default::default())
            .unwrap();
        let pop = g.population.unwrap();
        let cov = g.covariates.unwrap();
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..2).collect();
            idx.sort_by(|&a, &b| {
                g.graph.centroid(a).x.total_cmp(&g.graph.centroid(b).x)
            });
            idx
        };
        let (l, rgt) = (order[0], order[1]);
        assert!((pop[l] - 200.0).abs() < 1e-6);
        assert!((pop[rgt] - 200.0).abs() < 1e-6);
        assert!(cov[l][0].abs() < 1e-12);
        assert!((cov[rgt][0] - 0.5).abs() < 1e-6);
    }
}
