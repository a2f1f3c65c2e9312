//! Event datasets: windowing timestamped reports and splitting them into a
//! training period and a test period.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, TimeZone};
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateTable;
use crate::error::{Error, Result};
use crate::graph::geometry::BoundingBox;
use crate::graph::{MultiPolygon, Point, SpatialGraph};
use crate::observation::ReportVector;

#[derive(Clone, Debug, PartialEq)]
pub enum ReportLocation {
    Node(String),
    Point(Point),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRecord {
    pub location: ReportLocation,
    pub timestamp: DateTime<FixedOffset>,
}

/// Column names in a reports CSV. Either `node_id` or both `x` and `y` must
/// be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportColumns {
    pub node_id: String,
    pub x: String,
    pub y: String,
    pub timestamp: String,
}

impl Default for ReportColumns {
    fn default() -> Self {
        ReportColumns {
            node_id: "node_id".into(),
            x: "longitude".into(),
            y: "latitude".into(),
            timestamp: "timestamp".into(),
        }
    }
}

const NAIVE_FORMATS: [&str; 5] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %I:%M:%S %p",
];

/// Parses RFC 3339, or a naive date-time (or date at midnight) interpreted
/// at `naive_offset`.
pub fn parse_timestamp(s: &str, naive_offset: FixedOffset) -> Result<DateTime<FixedOffset>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t);
    }
    let naive = NAIVE_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
        .ok_or_else(|| Error::parse("timestamp", s))?;
    naive_offset
        .from_local_datetime(&naive)
        .single()
        .ok_or_else(|| Error::parse("timestamp", s))
}

pub fn read_reports_csv<R: Read>(
    reader: R,
    columns: &ReportColumns,
    naive_offset: FixedOffset,
) -> Result<Vec<ReportRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ts = find(&columns.timestamp).ok_or_else(|| Error::MissingFeature(columns.timestamp.clone()))?;
    let id = find(&columns.node_id);
    let xy = find(&columns.x).zip(find(&columns.y));
    if id.is_none() && xy.is_none() {
        return Err(Error::parse(
            "reports CSV",
            format!("needs `{}` or both `{}` and `{}`", columns.node_id, columns.x, columns.y),
        ));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let timestamp = parse_timestamp(rec.get(ts).unwrap_or(""), naive_offset)?;
        let location = match (id, xy) {
            (Some(c), _) if !rec.get(c).unwrap_or("").trim().is_empty() => {
                ReportLocation::Node(rec.get(c).unwrap_or("").trim().to_string())
            }
            (_, Some((cx, cy))) => {
                let parse = |c: usize| -> Result<f64> {
                    let f = rec.get(c).unwrap_or("").trim();
                    f.parse()
                        .map_err(|_| Error::parse(format!("report row {} coordinate", row + 1), f))
                };
                ReportLocation::Point(Point::new(parse(cx)?, parse(cy)?))
            }
            _ => {
                return Err(Error::parse(
                    "reports CSV",
                    format!("row {} has no location", row + 1),
                ))
            }
        };
        out.push(ReportRecord {
            location,
            timestamp,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CutoffRule {
    /// Earliest instant at which this fraction of nodes has reported.
    Fraction(f64),
    Timestamp(DateTime<FixedOffset>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetOptions {
    pub rule: CutoffRule,
    /// Inclusive `[start, end]` window; reports outside are ignored.
    pub window: Option<(DateTime<FixedOffset>, DateTime<FixedOffset>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventDataset {
    pub node_ids: Vec<String>,
    /// Nodes with a report at or before the cutoff.
    pub train: ReportVector,
    /// Nodes with a report after the cutoff.
    pub test: ReportVector,
    pub cutoff: Option<DateTime<FixedOffset>>,
    /// Distinct unresolved node ids, sorted.
    pub dropped_ids: Vec<String>,
    pub dropped_reports: usize,
    pub uncontained_points: usize,
    pub out_of_window: usize,
    pub warnings: Vec<String>,
}

/// Assigns points to the first containing polygon.
struct PointLocator<'a> {
    polygons: &'a [(String, MultiPolygon)],
    boxes: Vec<BoundingBox>,
}

impl<'a> PointLocator<'a> {
    fn new(polygons: &'a [(String, MultiPolygon)]) -> Self {
        PointLocator {
            boxes: polygons.iter().map(|(_, p)| p.bbox()).collect(),
            polygons,
        }
    }

    fn locate(&self, p: &Point) -> Option<&'a str> {
        self.polygons
            .iter()
            .zip(&self.boxes)
            .find(|((_, poly), b)| {
                b.min_x <= p.x && p.x <= b.max_x && b.min_y <= p.y && p.y <= b.max_y && poly.contains(p)
            })
            .map(|((id, _), _)| id.as_str())
    }
}

/// Splits windowed reports at the cutoff. Point reports are assigned by
/// containment in `polygons`; unresolved reports are dropped and counted.
pub fn build_dataset(
    reports: &[ReportRecord],
    graph: &SpatialGraph,
    polygons: Option<&[(String, MultiPolygon)]>,
    options: &DatasetOptions,
) -> Result<EventDataset> {
    let n = graph.len();
    let locator = polygons.map(PointLocator::new);
    let mut dropped_ids: Vec<String> = Vec::new();
    let mut dropped_reports = 0;
    let mut uncontained_points = 0;
    let mut out_of_window = 0;
    let mut events: Vec<(DateTime<FixedOffset>, usize)> = Vec::with_capacity(reports.len());
    for r in reports {
        if let Some((start, end)) = options.window {
            if r.timestamp < start || r.timestamp > end {
                out_of_window += 1;
                continue;
            }
        }
        let node = match &r.location {
            ReportLocation::Node(id) => match graph.index_of(id) {
                Some(i) => i,
                None => {
                    dropped_reports += 1;
                    dropped_ids.push(id.clone());
                    continue;
                }
            },
            ReportLocation::Point(p) => match locator.as_ref().and_then(|l| l.locate(p)) {
                Some(id) => match graph.index_of(id) {
                    Some(i) => i,
                    None => {
                        dropped_reports += 1;
                        dropped_ids.push(id.to_string());
                        continue;
                    }
                },
                None => {
                    uncontained_points += 1;
                    continue;
                }
            },
        };
        events.push((r.timestamp, node));
    }
    dropped_ids.sort();
    dropped_ids.dedup();
    if dropped_reports > 0 {
        log::warn!("dropped {dropped_reports} reports with unknown node ids");
    }
    if uncontained_points > 0 {
        log::warn!("dropped {uncontained_points} point reports outside every polygon");
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let cutoff = match &options.rule {
        CutoffRule::Timestamp(t) => Some(*t),
        CutoffRule::Fraction(f) => {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(Error::EmptyTraining(format!(
                    "cutoff fraction {f} must lie in (0, 1]"
                )));
            }
            let need = (f * n as f64).ceil().max(1.0) as usize;
            let mut seen = vec![false; n];
            let mut count = 0;
            let mut cutoff = None;
            for &(t, i) in &events {
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                }
                if count >= need {
                    cutoff = Some(t);
                    break;
                }
            }
            match cutoff {
                Some(t) => Some(t),
                None => {
                    return Err(Error::ThresholdNotReached {
                        threshold: *f,
                        max_fraction: count as f64 / n as f64,
                    })
                }
            }
        }
    };
    let cut = cutoff.expect("set above");
    let mut train = vec![false; n];
    let mut test = vec![false; n];
    for &(t, i) in &events {
        if t <= cut {
            train[i] = true;
        } else {
            test[i] = true;
        }
    }
    if !train.iter().any(|&v| v) {
        return Err(Error::EmptyTraining(format!("no reports at or before {cut}")));
    }
    let mut warnings = Vec::new();
    if !test.iter().any(|&v| v) {
        warnings.push("test period has no reports".to_string());
        log::warn!("test period has no reports");
    }
    Ok(EventDataset {
        node_ids: graph.node_ids().map(str::to_string).collect(),
        train: ReportVector::new(train),
        test: ReportVector::new(test),
        cutoff,
        dropped_ids,
        dropped_reports,
        uncontained_points,
        out_of_window,
        warnings,
    })
}

/// Writes `node_id,train,test,<features..>` with standardized features.
pub fn write_dataset_csv<W: Write>(
    writer: W,
    node_ids: &[String],
    train: &ReportVector,
    test: &ReportVector,
    covariates: Option<&CovariateTable>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["node_id".to_string(), "train".into(), "test".into()];
    if let Some(c) = covariates {
        header.extend(c.feature_names.iter().cloned());
    }
    w.write_record(&header)?;
    for (i, id) in node_ids.iter().enumerate() {
        let mut row = vec![
            id.clone(),
            (train.get(i) as u8).to_string(),
            (test.get(i) as u8).to_string(),
        ];
        if let Some(c) = covariates {
            row.extend(c.row(i).iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A dataset as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetTable {
    pub node_ids: Vec<String>,
    pub train: ReportVector,
    pub test: ReportVector,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
}

impl DatasetTable {
    /// Rows reordered to graph order; every graph node must be present.
    pub fn align(&self, graph: &SpatialGraph) -> Result<DatasetTable> {
        let index: HashMap<&str, usize> = self
            .node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let order = graph
            .node_ids()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::UnknownNode(format!("{id} (missing from dataset)")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetTable {
            node_ids: order.iter().map(|&i| self.node_ids[i].clone()).collect(),
            train: ReportVector::new(order.iter().map(|&i| self.train.get(i)).collect()),
            test: ReportVector::new(order.iter().map(|&i| self.test.get(i)).collect()),
            feature_names: self.feature_names.clone(),
            features: order.iter().map(|&i| self.features[i].clone()).collect(),
        })
    }

    /// Selected feature columns as a covariate table (values kept as stored).
    pub fn covariates(&self, selection: &[String]) -> Result<CovariateTable> {
        let idx = selection
            .iter()
            .map(|s| {
                self.feature_names
                    .iter()
                    .position(|f| f == s)
                    .ok_or_else(|| Error::MissingFeature(s.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = self
            .features
            .iter()
            .map(|r| idx.iter().map(|&k| r[k]).collect())
            .collect();
        CovariateTable::from_standardized(selection.to_vec(), &rows)
    }
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<DatasetTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expect = ["node_id", "train", "test"];
    if headers.iter().take(3).ne(expect.iter().copied()) {
        return Err(Error::parse("dataset CSV", "header must start with node_id,train,test"));
    }
    let feature_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let flag = |s: &str| -> Result<bool> {
        match s.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(Error::parse("dataset flag", other)),
        }
    };
    let (mut ids, mut train, mut test, mut features) = (vec![], vec![], vec![], vec![]);
    for rec in rdr.records() {
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or("").to_string());
        train.push(flag(rec.get(1).unwrap_or(""))?);
        test.push(flag(rec.get(2).unwrap_or(""))?);
        features.push(
            (3..rec.len())
                .map(|k| {
                    let f = rec.get(k).unwrap_or("");
                    f.parse().map_err(|_| Error::parse("dataset feature", f))
                })
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(DatasetTable {
        node_ids: ids,
        train: ReportVector::new(train),
        test: ReportVector::new(test),
        feature_names,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utc() -> FixedOffset {
        FixedOffset::east_opt(0).unwrap()
    }

    fn rec(id: &str, ts: &str) -> ReportRecord {
        ReportRecord {
            location: ReportLocation::Node(id.into()),
            timestamp: parse_timestamp(ts, utc()).unwrap(),
        }
    }

    fn fixture() -> (SpatialGraph, Vec<ReportRecord>) {
        let g = SpatialGraph::path(10);
        let reports = vec![
            rec("0", "2021-09-01T10:00:00Z"),
            rec("1", "2021-09-01T11:00:00Z"),
            rec("1", "2021-09-01T11:30:00Z"),
            rec("2", "2021-09-01T12:00:00Z"),
            rec("3", "2021-09-01T12:00:00Z"),
            rec("4", "2021-09-02T09:00:00Z"),
            rec("0", "2021-09-02T10:00:00Z"),
            rec("zz", "2021-09-01T10:00:00Z"),
        ];
        (g, reports)
    }

    #[test]
    fn fraction_cutoff_is_inclusive() {
        let (g, reports) = fixture();
        let opts = DatasetOptions {
            rule: CutoffRule::Fraction(0.3),
            window: None,
        };
        let d = build_dataset(&reports, &g, None, &opts).unwrap();
        assert_eq!(d.cutoff, Some(parse_timestamp("2021-09-01T12:00:00Z", utc()).unwrap()));
        // node 3 shares the boundary instant and is in training
        assert_eq!(d.train.count(), 4);
        assert_eq!(d.test.count(), 2);
        assert!(d.test.get(0) && d.test.get(4));
        assert_eq!(d.dropped_ids, vec!["zz"]);
    }

    #[test]
    fn threshold_errors() {
        let (g, reports) = fixture();
        let opts = |f| DatasetOptions {
            rule: CutoffRule::Fraction(f),
            window: None,
        };
        assert!(matches!(
            build_dataset(&reports, &g, None, &opts(0.0)),
            Err(Error::EmptyTraining(_))
        ));
        match build_dataset(&reports, &g, None, &opts(0.9)) {
            Err(Error::ThresholdNotReached { max_fraction, .. }) => assert_eq!(max_fraction, 0.5),
            other => panic!("{other:?}"),
        }
        let late = DatasetOptions {
            rule: CutoffRule::Timestamp(parse_timestamp("2021-09-03T00:00:00Z", utc()).unwrap()),
            window: None,
        };
        let d = build_dataset(&reports, &g, None, &late).unwrap();
        assert_eq!(d.test.count(), 0);
        assert!(!d.warnings.is_empty());
    }

    #[test]
    fn timestamp_formats() {
        let est = FixedOffset::west_opt(4 * 3600).unwrap();
        let a = parse_timestamp("09/01/2021 10:15:00 PM", est).unwrap();
        let b = parse_timestamp("2021-09-02T02:15:00Z", utc()).unwrap();
        assert_eq!(a, b);
        assert!(parse_timestamp("2021-09-01", utc()).is_ok());
        assert!(parse_timestamp("yesterday", utc()).is_err());
    }

    #[test]
    fn points_assigned_by_containment() {
        use crate::graph::Polygon;
        let polys = vec![
            ("a".to_string(), MultiPolygon::from(Polygon::rectangle(0.0, 0.0, 1.0, 1.0))),
            ("b".to_string(), MultiPolygon::from(Polygon::rectangle(1.0, 0.0, 2.0, 1.0))),
        ];
        let g = crate::graph::build_adjacency_from_polygons(&polys, Default::default()).unwrap();
        let ts = parse_timestamp("2021-09-01T00:00:00Z", utc()).unwrap();
        let reports = vec![
            ReportRecord {
                location: ReportLocation::Point(Point::new(1.5, 0.5)),
                timestamp: ts,
            },
            ReportRecord {
                location: ReportLocation::Point(Point::new(5.0, 5.0)),
                timestamp: ts,
            },
        ];
        let opts = DatasetOptions {
            rule: CutoffRule::Timestamp(ts),
            window: None,
        };
        let d = build_dataset(&reports, &g, Some(&polys), &opts).unwrap();
        assert!(d.train.get(g.index_of("b").unwrap()));
        assert_eq!(d.uncontained_points, 1);
    }

    #[test]
    fn csv_roundtrip() {
        let ids: Vec<String> = vec!["x".into(), "y".into()];
        let train = ReportVector::new(vec![true, false]);
        let test = ReportVector::new(vec![false, true]);
        let cov = CovariateTable::from_standardized(vec!["f".into()], &[vec![0.5], vec![-0.5]]).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ids, &train, &test, Some(&cov)).unwrap();
        let t = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(t.node_ids, ids);
        assert_eq!(t.train, train);
        assert_eq!(t.covariates(&["f".into()]).unwrap().column(0), vec![0.5, -0.5]);
    }
}
