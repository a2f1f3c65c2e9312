//! Minimal GeoJSON FeatureCollection reading and writing for polygon layers.

use std::io::{Read, Write};

use serde_json::{json, Map, Value};

use super::geometry::{MultiPolygon, Point, Polygon};
use crate::error::{Error, Result};

/// One polygon feature with its remaining properties.
#[derive(Clone, Debug)]
pub struct Feature {
    pub id: String,
    pub geometry: MultiPolygon,
    pub properties: Map<String, Value>,
}

/// Reads Polygon/MultiPolygon features, taking the node id from `id_property`.
///
/// Numeric ids are rendered without a fractional part when integral.
pub fn read_features<R: Read>(reader: R, id_property: &str) -> Result<Vec<Feature>> {
    let doc: Value = serde_json::from_reader(reader)?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse("GeoJSON", "expected a FeatureCollection"))?;
    let mut out = Vec::with_capacity(features.len());
    for (k, feature) in features.iter().enumerate() {
        let props = feature
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let id = match props.get(id_property) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => match n.as_i64() {
                Some(i) => i.to_string(),
                None => n.to_string(),
            },
            _ => {
                return Err(Error::parse(
                    "GeoJSON",
                    format!("feature {k} lacks id property `{id_property}`"),
                ))
            }
        };
        let geometry = parse_geometry(feature.get("geometry").unwrap_or(&Value::Null))
            .map_err(|reason| Error::InvalidGeometry {
                id: id.clone(),
                reason,
            })?;
        out.push(Feature {
            id,
            geometry,
            properties: props,
        });
    }
    Ok(out)
}

fn parse_geometry(geom: &Value) -> std::result::Result<MultiPolygon, String> {
    let kind = geom.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geom.get("coordinates").ok_or("missing coordinates")?;
    match kind {
        "Polygon" => Ok(MultiPolygon::from(parse_polygon(coords)?)),
        "MultiPolygon" => {
            let parts = coords
                .as_array()
                .ok_or("MultiPolygon coordinates must be an array")?
                .iter()
                .map(parse_polygon)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(MultiPolygon::new(parts))
        }
        "" => Err("missing geometry".into()),
        other => Err(format!("unsupported geometry type `{other}`")),
    }
}

fn parse_polygon(coords: &Value) -> std::result::Result<Polygon, String> {
    let rings = coords.as_array().ok_or("polygon must be an array of rings")?;
    let mut parsed = rings.iter().map(parse_ring);
    let exterior = parsed.next().ok_or("polygon has no rings")??;
    let holes = parsed.collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Polygon::with_holes(exterior, holes))
}

fn parse_ring(ring: &Value) -> std::result::Result<Vec<Point>, String> {
    ring.as_array()
        .ok_or("ring must be an array")?
        .iter()
        .map(|pos| {
            let xy = pos.as_array().ok_or("position must be an array")?;
            match (xy.first().and_then(Value::as_f64), xy.get(1).and_then(Value::as_f64)) {
                (Some(x), Some(y)) => Ok(Point::new(x, y)),
                _ => Err("position needs two numbers".to_string()),
            }
        })
        .collect()
}

fn ring_coords(ring: &[Point]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = ring.first() {
        pts.push(json!([first.x, first.y]));
    }
    Value::Array(pts)
}

/// Writes features as a MultiPolygon FeatureCollection.
pub fn write_features<W: Write>(writer: W, features: &[Feature]) -> Result<()> {
    let features: Vec<Value> = features
        .iter()
        .map(|f| {
            let coords: Vec<Value> = f
                .geometry
                .parts
                .iter()
                .map(|p| Value::Array(p.rings().map(ring_coords).collect()))
                .collect();
            json!({
                "type": "Feature",
                "properties": f.properties,
                "geometry": {"type": "MultiPolygon", "coordinates": coords},
            })
        })
        .collect();
    serde_json::to_writer(writer, &json!({"type": "FeatureCollection", "features": features}))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_polygon_and_multipolygon() {
        let doc = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"GEOID":"a"},
           "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
          {"type":"Feature","properties":{"GEOID":7},
           "geometry":{"type":"MultiPolygon","coordinates":[[[[2,0],[3,0],[3,1],[2,0]]]]}}
        ]}"#;
        let fs = read_features(doc.as_bytes(), "GEOID").unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs[0].id, "a");
        assert_eq!(fs[1].id, "7");
        assert!((fs[0].geometry.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_geometry_names_node() {
        let doc = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"id":"x"},"geometry":null}]}"#;
        match read_features(doc.as_bytes(), "id") {
            Err(Error::InvalidGeometry { id, .. }) => assert_eq!(id, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
