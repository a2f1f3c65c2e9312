//! Node covariates: CSV ingestion, alignment to graph order, z-scoring.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SpatialGraph;

/// Covariates as read from disk: one row per node id, missing cells as `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawCovariates {
    pub node_ids: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl RawCovariates {
    /// Reads a header-row CSV keyed by `id_column`; all other columns must be
    /// numeric or empty.
    pub fn read_csv<R: Read>(reader: R, id_column: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let id_idx = headers
            .iter()
            .position(|h| h == id_column)
            .ok_or_else(|| Error::MissingFeature(id_column.to_string()))?;
        let columns: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != id_idx)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut out = RawCovariates {
            columns,
            ..Default::default()
        };
        for record in rdr.records() {
            let record = record?;
            let id = record.get(id_idx).unwrap_or("").to_string();
            let mut row = Vec::with_capacity(out.columns.len());
            for (i, field) in record.iter().enumerate() {
                if i == id_idx {
                    continue;
                }
                let field = field.trim();
                if field.is_empty() || field.eq_ignore_ascii_case("nan") || field == "NA" {
                    row.push(None);
                } else {
                    let v: f64 = field.parse().map_err(|_| {
                        Error::parse(format!("covariate for node `{id}`"), field)
                    })?;
                    row.push(if v.is_finite() { Some(v) } else { None });
                }
            }
            out.node_ids.push(id);
            out.rows.push(row);
        }
        Ok(out)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }

    pub fn value(&self, row: usize, column: usize) -> Option<f64> {
        self.rows[row][column]
    }

    /// Rows reordered to match graph node order.
    pub fn for_graph(&self, graph: &SpatialGraph) -> Result<RawCovariates> {
        let index: HashMap<&str, usize> = self
            .node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(graph.len());
        for id in graph.node_ids() {
            let &i = index
                .get(id)
                .ok_or_else(|| Error::UnknownNode(format!("{id} (no covariate row)")))?;
            rows.push(self.rows[i].clone());
        }
        Ok(RawCovariates {
            node_ids: graph.node_ids().map(str::to_string).collect(),
            columns: self.columns.clone(),
            rows,
        })
    }

    /// Writes the table with `id_column` first; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W, id_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once(id_column).chain(self.columns.iter().map(String::as_str)))?;
        for (id, row) in self.node_ids.iter().zip(&self.rows) {
            let cells = row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default());
            w.write_record(std::iter::once(id.clone()).chain(cells))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Row indices where any of `columns` is missing.
    pub fn incomplete_rows(&self, columns: &[String]) -> Result<Vec<usize>> {
        let idx = columns
            .iter()
            .map(|c| self.column(c))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.rows.len())
            .filter(|&r| idx.iter().any(|&c| self.rows[r][c].is_none()))
            .collect())
    }
}

/// Standardized design matrix aligned with graph node order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateTable {
    pub feature_names: Vec<String>,
    /// Row-major N x M, z-scored columns.
    values: Vec<f64>,
    /// Row-major N x M in original units.
    raw_values: Vec<f64>,
    pub population: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl CovariateTable {
    /// Table with no features, for the homogeneous reporting model.
    pub fn empty(n: usize) -> Self {
        CovariateTable {
            feature_names: Vec::new(),
            values: Vec::new(),
            raw_values: Vec::new(),
            population: vec![1.0; n],
            means: Vec::new(),
            sds: Vec::new(),
        }
    }

    /// Builds a table from already-standardized values without touching them.
    pub fn from_standardized(feature_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let m = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        for r in rows {
            crate::error::check_len("covariate row", m, r.len())?;
            values.extend_from_slice(r);
        }
        Ok(CovariateTable {
            feature_names,
            raw_values: values.clone(),
            values,
            population: vec![1.0; rows.len()],
            means: vec![0.0; m],
            sds: vec![1.0; m],
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.population.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    pub fn x(&self, node: usize, feature: usize) -> f64 {
        self.values[node * self.n_features() + feature]
    }

    #[inline]
    pub fn row(&self, node: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[node * m..(node + 1) * m]
    }

    pub fn raw(&self, node: usize, feature: usize) -> f64 {
        self.raw_values[node * self.n_features() + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i, feature)).collect()
    }

    pub fn destandardize(&self, node: usize, feature: usize) -> f64 {
        self.x(node, feature) * self.sds[feature] + self.means[feature]
    }

    pub fn with_population(mut self, population: Vec<f64>) -> Result<Self> {
        crate::error::check_len("population", self.n_nodes(), population.len())?;
        self.population = population;
        Ok(self)
    }
}

/// Z-scores each selected column with the sample standard deviation.
///
/// Rows must be complete for the selected columns; a constant column is an
/// error naming the feature.
pub fn standardize_covariates(
    raw: &RawCovariates,
    selection: &[String],
    population_column: Option<&str>,
) -> Result<CovariateTable> {
    let idx = selection
        .iter()
        .map(|c| raw.column(c))
        .collect::<Result<Vec<_>>>()?;
    let n = raw.rows.len();
    let mut matrix = Vec::with_capacity(n);
    for (r, row) in raw.rows.iter().enumerate() {
        let vals = idx
            .iter()
            .zip(selection)
            .map(|(&c, name)| {
                row[c].ok_or_else(|| {
                    Error::parse(
                        format!("covariate `{name}`"),
                        format!("missing value for node `{}`", raw.node_ids[r]),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        matrix.push(vals);
    }
    let population = match population_column {
        Some(col) => {
            let c = raw.column(col)?;
            raw.rows
                .iter()
                .map(|row| row[c].unwrap_or(0.0))
                .collect()
        }
        None => vec![1.0; n],
    };
    standardize_matrix(selection.to_vec(), &matrix)?.with_population(population)
}

/// Z-scores the columns of a row-major matrix.
pub fn standardize_matrix(feature_names: Vec<String>, rows: &[Vec<f64>]) -> Result<CovariateTable> {
    let m = feature_names.len();
    let n = rows.len();
    let mut means = vec![0.0; m];
    let mut sds = vec![0.0; m];
    for (l, name) in feature_names.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[l]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ConstantFeature(name.clone()));
        }
        means[l] = mean;
        sds[l] = sd;
    }
    let mut values = Vec::with_capacity(n * m);
    let mut raw_values = Vec::with_capacity(n * m);
    for r in rows {
        crate::error::check_len("covariate row", m, r.len())?;
        for l in 0..m {
            raw_values.push(r[l]);
            values.push((r[l] - means[l]) / sds[l]);
        }
    }
    Ok(CovariateTable {
        feature_names,
        values,
        raw_values,
        population: vec![1.0; n],
        means,
        sds,
    })
}

/// The six features of the full heterogeneous reporting model.
pub const DEFAULT_FEATURES: [&str; 6] = [
    "log_population",
    "median_age",
    "median_income",
    "bachelors_share",
    "white_share",
    "owner_occupied_share",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_column() {
        let t = standardize_matrix(vec!["a".into()], &[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(t.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_named() {
        let err = standardize_matrix(vec!["flat".into()], &[vec![2.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::ConstantFeature(name) if name == "flat"));
    }

    #[test]
    fn standardized_input_is_fixed_point() {
        let t = standardize_matrix(vec!["a".into()], &[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        let again = standardize_matrix(
            vec!["a".into()],
            &(0..3).map(|i| vec![t.x(i, 0)]).collect::<Vec<_>>(),
        )
        .unwrap();
        for i in 0..3 {
            assert!((again.x(i, 0) - t.x(i, 0)).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_missing_values_and_selection() {
        let csv = "node_id,pop,inc\na,10,5\nb,0,\nc,30,7\n";
        let raw = RawCovariates::read_csv(csv.as_bytes(), "node_id").unwrap();
        assert_eq!(raw.columns, vec!["pop", "inc"]);
        assert_eq!(raw.incomplete_rows(&["inc".into()]).unwrap(), vec![1]);
        assert!(standardize_covariates(&raw, &["inc".into()], None).is_err());
        assert!(matches!(
            standardize_covariates(&raw, &["nope".into()], None),
            Err(Error::MissingFeature(_))
        ));
        let t = standardize_covariates(&raw, &["pop".into()], Some("pop")).unwrap();
        assert_eq!(t.population, vec![10.0, 0.0, 30.0]);
    }

    #[test]
    fn csv_write_round_trip() {
        let csv = "node_id,pop,inc\na,10,5.5\nb,0,\n";
        let raw = RawCovariates::read_csv(csv.as_bytes(), "node_id").unwrap();
        let mut out = Vec::new();
        raw.write_csv(&mut out, "node_id").unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }
}
