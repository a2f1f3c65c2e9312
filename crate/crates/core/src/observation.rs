//! Report generation: reporting rates, report likelihood, forward simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateTable;
use crate::error::{check_len, Error, Result};
use crate::ising::StateVector;
use crate::math::sigmoid;

/// Parameters of the reporting layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ReportingParams {
    /// One rate `alpha` in (0, 1) shared by all nodes.
    Homogeneous { alpha: f64 },
    /// `psi_i = sigmoid(alpha0 + sum_l coeffs[l] * X_il)`.
    Heterogeneous { alpha0: f64, coeffs: Vec<f64> },
}

impl ReportingParams {
    pub fn homogeneous(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "homogeneous reporting rate must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(ReportingParams::Homogeneous { alpha })
    }

    pub fn heterogeneous(alpha0: f64, coeffs: Vec<f64>) -> Self {
        ReportingParams::Heterogeneous { alpha0, coeffs }
    }

    /// Flattened values in output order: `[alpha]` or `[alpha0, coeffs..]`.
    pub fn values(&self) -> Vec<f64> {
        match self {
            ReportingParams::Homogeneous { alpha } => vec![*alpha],
            ReportingParams::Heterogeneous { alpha0, coeffs } => {
                std::iter::once(*alpha0).chain(coeffs.iter().copied()).collect()
            }
        }
    }

    /// Column labels matching [`ReportingParams::values`].
    pub fn labels(&self, feature_names: &[String]) -> Vec<String> {
        match self {
            ReportingParams::Homogeneous { .. } => vec!["alpha".into()],
            ReportingParams::Heterogeneous { .. } => std::iter::once("alpha0".to_string())
                .chain(feature_names.iter().map(|f| format!("alpha_{f}")))
                .collect(),
        }
    }
}

/// Binary reports aligned to graph node order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ReportVector(Vec<bool>);

impl ReportVector {
    pub fn new(values: Vec<bool>) -> Self {
        ReportVector(values)
    }

    pub fn zeros(n: usize) -> Self {
        ReportVector(vec![false; n])
    }

    pub fn from_indices(n: usize, reported: &[usize]) -> Result<Self> {
        let mut v = vec![false; n];
        for &i in reported {
            if i >= n {
                return Err(Error::IndexOutOfBounds { index: i, len: n });
            }
            v[i] = true;
        }
        Ok(ReportVector(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&t| t).count()
    }

    /// First node reported while its latent state is negative.
    pub fn first_false_positive(&self, a: &StateVector) -> Option<usize> {
        (0..self.0.len()).find(|&i| self.0[i] && !a.is_positive(i))
    }
}

/// Linear predictor `alpha0 + x . coeffs` for one node.
#[inline]
pub(crate) fn linear_predictor(alpha0: f64, coeffs: &[f64], x: &[f64]) -> f64 {
    alpha0 + coeffs.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()
}

fn check_features(coeffs: &[f64], covariates: &CovariateTable) -> Result<()> {
    check_len("reporting coefficients", covariates.n_features(), coeffs.len())
}

/// Per-node reporting rates `psi`, one per row of `covariates`.
pub fn reporting_rates(
    params: &ReportingParams,
    covariates: &CovariateTable,
) -> Result<Vec<f64>> {
    let n = covariates.n_nodes();
    match params {
        ReportingParams::Homogeneous { alpha } => Ok(vec![*alpha; n]),
        ReportingParams::Heterogeneous { alpha0, coeffs } => {
            check_features(coeffs, covariates)?;
            Ok((0..n)
                .map(|i| sigmoid(linear_predictor(*alpha0, coeffs, covariates.row(i))))
                .collect())
        }
    }
}

/// Rates from pooled coefficients with the event-specific intercept dropped.
pub fn pooled_reporting_rates(coeffs: &[f64], covariates: &CovariateTable) -> Result<Vec<f64>> {
    reporting_rates(
        &ReportingParams::heterogeneous(0.0, coeffs.to_vec()),
        covariates,
    )
}

/// Draws `T_i ~ Bernoulli(psi_i)` where `A_i = +1`, and `T_i = 0` elsewhere.
pub fn simulate_reports<R: Rng + ?Sized>(
    a: &StateVector,
    psi: &[f64],
    rng: &mut R,
) -> Result<ReportVector> {
    check_len("reporting rates", a.len(), psi.len())?;
    Ok(ReportVector(
        (0..a.len())
            .map(|i| a.is_positive(i) && rng.random::<f64>() < psi[i])
            .collect(),
    ))
}

const PSI_CLAMP: f64 = 1e-12;

/// `sum_{A_i=+1} T_i ln psi_i + (1 - T_i) ln(1 - psi_i)`; `-inf` when some
/// report sits on a negative node.
pub fn report_loglikelihood(t: &ReportVector, a: &StateVector, psi: &[f64]) -> Result<f64> {
    check_len("report vector", a.len(), t.len())?;
    check_len("reporting rates", a.len(), psi.len())?;
    let mut ll = 0.0;
    for i in 0..a.len() {
        if !a.is_positive(i) {
            if t.get(i) {
                return Ok(f64::NEG_INFINITY);
            }
            continue;
        }
        let p = psi[i].clamp(PSI_CLAMP, 1.0 - PSI_CLAMP);
        ll += if t.get(i) { p.ln() } else { (-p).ln_1p() };
    }
    Ok(ll)
}

/// Population-weighted mean of `psi` with per-node weights, e.g. the count of
/// a demographic group living at each node.
pub fn weighted_mean_rate(psi: &[f64], weights: &[f64]) -> Result<f64> {
    check_len("subpopulation weights", psi.len(), weights.len())?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance("subpopulation weights".into()));
    }
    Ok(psi.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::CovariateTable;
    use crate::rng::rng_from;

    fn table(rows: &[Vec<f64>]) -> CovariateTable {
        let m = rows.first().map_or(0, Vec::len);
        CovariateTable::from_standardized((0..m).map(|l| format!("x{l}")).collect(), rows).unwrap()
    }

    #[test]
    fn rates_trivial_cases() {
        let cov = table(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let psi = reporting_rates(&ReportingParams::heterogeneous(0.0, vec![0.0, 0.0]), &cov).unwrap();
        assert_eq!(psi, vec![0.5, 0.5]);
        let cov1 = table(&[vec![-1.0]]);
        let psi = reporting_rates(&ReportingParams::heterogeneous(1.0, vec![1.0]), &cov1).unwrap();
        assert_eq!(psi, vec![0.5]);
        let psi = reporting_rates(&ReportingParams::homogeneous(0.3).unwrap(), &cov).unwrap();
        assert_eq!(psi, vec![0.3, 0.3]);
        assert!(reporting_rates(&ReportingParams::heterogeneous(0.0, vec![1.0]), &cov).is_err());
        assert!(ReportingParams::homogeneous(1.0).is_err());
    }

    #[test]
    fn pooled_rates_drop_intercept() {
        let cov = table(&[vec![2.0]]);
        let pooled = pooled_reporting_rates(&[0.5], &cov).unwrap()[0];
        let direct = reporting_rates(&ReportingParams::heterogeneous(0.0, vec![0.5]), &cov).unwrap()[0];
        assert_eq!(pooled, direct);
        assert!((pooled - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn no_reports_on_negative_nodes() {
        let a = StateVector::filled(50, -1);
        let t = simulate_reports(&a, &[1.0; 50], &mut rng_from(1, &[])).unwrap();
        assert_eq!(t.count(), 0);
        let a = StateVector::filled(3, 1);
        let t = simulate_reports(&a, &[1.0; 3], &mut rng_from(1, &[])).unwrap();
        assert_eq!(t.count(), 3);
    }

    #[test]
    fn bernoulli_frequency() {
        let n = 10_000;
        let a = StateVector::filled(n, 1);
        let t = simulate_reports(&a, &vec![0.6; n], &mut rng_from(2, &[])).unwrap();
        assert!((t.count() as f64 / n as f64 - 0.6).abs() < 0.02);
    }

    #[test]
    fn likelihood_cases() {
        let a = StateVector::filled(3, -1);
        assert_eq!(report_loglikelihood(&ReportVector::zeros(3), &a, &[0.5; 3]).unwrap(), 0.0);
        let a1 = StateVector::filled(1, 1);
        let t1 = ReportVector::new(vec![true]);
        assert!((report_loglikelihood(&t1, &a1, &[0.25]).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        let a = StateVector::from_vec(vec![1, -1]).unwrap();
        let t = ReportVector::new(vec![false, true]);
        assert_eq!(report_loglikelihood(&t, &a, &[0.5, 0.5]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(t.first_false_positive(&a), Some(1));
        // psi = 1 on an unreported positive node stays finite through the clamp
        let t0 = ReportVector::zeros(1);
        assert!(report_loglikelihood(&t0, &a1, &[1.0]).unwrap().is_finite());
    }

    #[test]
    fn weighted_rate() {
        let m = weighted_mean_rate(&[0.2, 0.6], &[100.0, 300.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!(weighted_mean_rate(&[0.2], &[0.0]).is_err());
    }
}
