//! Predictive metrics, paired bootstrap comparison, calibration coverage,
//! identifiability correlation and top-k allocation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math::quantile_sorted;
use crate::rng::rng_from;

/// Scores and labels of the nodes kept after exclusion.
fn retained(scores: &[f64], labels: &[bool], exclude: &[bool]) -> Result<(Vec<f64>, Vec<bool>)> {
    check_len("labels", scores.len(), labels.len())?;
    check_len("exclusion mask", scores.len(), exclude.len())?;
    let mut s = Vec::with_capacity(scores.len());
    let mut l = Vec::with_capacity(scores.len());
    for i in 0..scores.len() {
        if !exclude[i] {
            s.push(scores[i]);
            l.push(labels[i]);
        }
    }
    Ok((s, l))
}

/// Rank-based AUC over the given observations; ties count one half.
fn auc_core(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // 1-based midrank of the tie block k..end
        let midrank = 0.5 * ((k + 1) + end) as f64;
        for &i in &order[k..end] {
            if labels[i] {
                pos_rank_sum += midrank;
            }
        }
        k = end;
    }
    let np = n_pos as f64;
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// AUC with midrank ties over nodes not excluded.
pub fn auc(scores: &[f64], labels: &[bool], exclude: &[bool]) -> Result<f64> {
    let (s, l) = retained(scores, labels, exclude)?;
    auc_core(&s, &l)
}

fn rmse_core(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyAfterExclusion);
    }
    let sse: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &l)| (s - l as u8 as f64).powi(2))
        .sum();
    Ok((sse / scores.len() as f64).sqrt())
}

pub fn rmse(scores: &[f64], labels: &[bool], exclude: &[bool]) -> Result<f64> {
    let (s, l) = retained(scores, labels, exclude)?;
    rmse_core(&s, &l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub estimate: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub iterates: usize,
    pub exclusion: String,
}

pub const DEFAULT_ITERATES: usize = 10_000;
/// Upper bound on redraws of one-class resamples, per iterate.
const MAX_REDRAWS: usize = 1000;

fn percentile_ci(mut draws: Vec<f64>) -> (f64, f64) {
    draws.sort_by(f64::total_cmp);
    (quantile_sorted(&draws, 0.025), quantile_sorted(&draws, 0.975))
}

/// Indices of a resample containing both classes. Iterate `b` uses its own
/// generator derived from `seed`, so results do not depend on order.
fn resample_indices(labels: &[bool], seed: u64, b: usize, redrawn: &mut usize) -> Result<Vec<usize>> {
    let n = labels.len();
    let mut rng = rng_from(seed, &[b as u64]);
    for _ in 0..MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let pos = idx.iter().filter(|&&i| labels[i]).count();
        if pos > 0 && pos < n {
            return Ok(idx);
        }
        *redrawn += 1;
    }
    Err(Error::OneClass)
}

/// AUC and RMSE with percentile bootstrap intervals.
pub fn bootstrap_metrics(
    scores: &[f64],
    labels: &[bool],
    exclude: &[bool],
    iterates: usize,
    seed: u64,
) -> Result<(MetricReport, MetricReport)> {
    let (s, l) = retained(scores, labels, exclude)?;
    let auc_hat = auc_core(&s, &l)?;
    let rmse_hat = rmse_core(&s, &l)?;
    let mut aucs = Vec::with_capacity(iterates);
    let mut rmses = Vec::with_capacity(iterates);
    let mut redrawn = 0;
    let (mut bs, mut bl) = (vec![0.0; s.len()], vec![false; s.len()]);
    for b in 0..iterates {
        let idx = resample_indices(&l, seed, b, &mut redrawn)?;
        for (k, &i) in idx.iter().enumerate() {
            bs[k] = s[i];
            bl[k] = l[i];
        }
        aucs.push(auc_core(&bs, &bl)?);
        rmses.push(rmse_core(&bs, &bl)?);
    }
    if redrawn > 0 {
        log::info!("bootstrap redrew {redrawn} one-class resamples");
    }
    let report = |metric: &str, estimate: f64, draws: Vec<f64>| {
        let (lo, hi) = percentile_ci(draws);
        MetricReport {
            metric: metric.into(),
            estimate,
            lo95: lo.min(estimate),
            hi95: hi.max(estimate),
            iterates,
            exclusion: "training-reported nodes excluded".into(),
        }
    };
    Ok((report("auc", auc_hat, aucs), report("rmse", rmse_hat, rmses)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    /// Statistic of model A minus model B on the full sample.
    pub delta: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// Two-sided, floored at `1 / iterates`.
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub auc: DeltaReport,
    pub rmse: DeltaReport,
    pub iterates: usize,
    pub redrawn: usize,
}

fn delta_report(delta: f64, draws: Vec<f64>) -> DeltaReport {
    let b = draws.len() as f64;
    let le = draws.iter().filter(|&&d| d <= 0.0).count() as f64 / b;
    let ge = draws.iter().filter(|&&d| d >= 0.0).count() as f64 / b;
    let p = (2.0 * le.min(ge)).min(1.0).max(1.0 / b);
    let (lo, hi) = percentile_ci(draws);
    DeltaReport {
        delta,
        lo95: lo,
        hi95: hi,
        p_value: p,
    }
}

/// Paired node-level bootstrap of AUC and RMSE differences (A minus B).
pub fn bootstrap_compare(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[bool],
    exclude: &[bool],
    iterates: usize,
    seed: u64,
) -> Result<Comparison> {
    if iterates == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one iterate".into()));
    }
    let (a, l) = retained(scores_a, labels, exclude)?;
    let (b, _) = retained(scores_b, labels, exclude)?;
    let d_auc = auc_core(&a, &l)? - auc_core(&b, &l)?;
    let d_rmse = rmse_core(&a, &l)? - rmse_core(&b, &l)?;
    let mut auc_draws = Vec::with_capacity(iterates);
    let mut rmse_draws = Vec::with_capacity(iterates);
    let mut redrawn = 0;
    let n = l.len();
    let (mut ra, mut rb, mut rl) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
    for it in 0..iterates {
        let idx = resample_indices(&l, seed, it, &mut redrawn)?;
        for (k, &i) in idx.iter().enumerate() {
            ra[k] = a[i];
            rb[k] = b[i];
            rl[k] = l[i];
        }
        auc_draws.push(auc_core(&ra, &rl)? - auc_core(&rb, &rl)?);
        rmse_draws.push(rmse_core(&ra, &rl)? - rmse_core(&rb, &rl)?);
    }
    Ok(Comparison {
        auc: delta_report(d_auc, auc_draws),
        rmse: delta_report(d_rmse, rmse_draws),
        iterates,
        redrawn,
    })
}

/// Paired bootstrap of the difference in means of per-unit values (for
/// example per-trial AUCs of two models).
pub fn bootstrap_mean_difference(
    values_a: &[f64],
    values_b: &[f64],
    iterates: usize,
    seed: u64,
) -> Result<DeltaReport> {
    check_len("paired values", values_a.len(), values_b.len())?;
    if values_a.is_empty() {
        return Err(Error::EmptyAfterExclusion);
    }
    if iterates == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one iterate".into()));
    }
    let d: Vec<f64> = values_a.iter().zip(values_b).map(|(a, b)| a - b).collect();
    let n = d.len();
    let draws = (0..iterates)
        .map(|it| {
            let mut rng = rng_from(seed, &[it as u64]);
            (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    Ok(delta_report(crate::math::mean(&d), draws))
}

/// Minimum trials before a coverage estimate is considered reliable.
pub const MIN_CALIBRATION_TRIALS: usize = 30;

/// One posterior interval and the truth it should cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub parameter: String,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub truth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub parameter: String,
    pub level: f64,
    pub coverage: f64,
    pub trials: usize,
    /// Fewer than [`MIN_CALIBRATION_TRIALS`] records.
    pub insufficient: bool,
}

/// Empirical coverage per `(parameter, level)`, in order of first
/// appearance.
pub fn calibration_curve(records: &[IntervalRecord]) -> Vec<CalibrationRow> {
    let mut rows: Vec<(String, f64, usize, usize)> = Vec::new();
    for r in records {
        let hit = (r.lo <= r.truth && r.truth <= r.hi) as usize;
        match rows.iter_mut().find(|(p, l, _, _)| *p == r.parameter && *l == r.level) {
            Some(row) => {
                row.2 += hit;
                row.3 += 1;
            }
            None => rows.push((r.parameter.clone(), r.level, hit, 1)),
        }
    }
    rows.into_iter()
        .map(|(parameter, level, hits, trials)| CalibrationRow {
            parameter,
            level,
            coverage: hits as f64 / trials as f64,
            trials,
            insufficient: trials < MIN_CALIBRATION_TRIALS,
        })
        .collect()
}

/// Pearson correlation between truths and estimates.
pub fn pearson(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len("estimates", truth.len(), estimate.len())?;
    let n = truth.len() as f64;
    let mt = truth.iter().sum::<f64>() / n;
    let me = estimate.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (t, e) in truth.iter().zip(estimate) {
        sxy += (t - mt) * (e - me);
        sxx += (t - mt).powi(2);
        syy += (e - me).powi(2);
    }
    if !(sxx > 0.0) {
        return Err(Error::ZeroVariance("true values".into()));
    }
    if !(syy > 0.0) {
        return Err(Error::ZeroVariance("estimates".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityRow {
    pub parameter: String,
    pub correlation: f64,
    pub trials: usize,
}

/// Pearson correlation per parameter from `(parameter, truth, estimate)`.
pub fn identifiability(records: &[(String, f64, f64)]) -> Result<Vec<IdentifiabilityRow>> {
    let mut names: Vec<&str> = Vec::new();
    for (p, _, _) in records {
        if !names.contains(&p.as_str()) {
            names.push(p);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let (t, e): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|(p, _, _)| p == name)
                .map(|(_, t, e)| (*t, *e))
                .unzip();
            Ok(IdentifiabilityRow {
                parameter: name.to_string(),
                correlation: pearson(&t, &e)?,
                trials: t.len(),
            })
        })
        .collect()
}

/// One node chosen by [`allocate_topk`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub node: usize,
    /// 1-based position in score order.
    pub rank: usize,
    /// 1 for strict winners; the tie group at the cutoff shares the rest.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub k: usize,
    pub selected: Vec<Selection>,
    pub attributes: Vec<String>,
    /// Population-weighted attribute share over the selection.
    pub served: Vec<f64>,
    /// Population-weighted attribute share over all eligible nodes.
    pub base_rate: Vec<f64>,
}

/// Demographic inputs for allocation: node population and, per attribute,
/// the share of each node's population carrying it.
#[derive(Clone, Debug, PartialEq)]
pub struct Demographics {
    pub population: Vec<f64>,
    pub names: Vec<String>,
    /// `shares[a][i]` in `[0, 1]`.
    pub shares: Vec<Vec<f64>>,
}

fn weighted_shares(
    demo: &Demographics,
    weights: impl Iterator<Item = (usize, f64)> + Clone,
) -> Result<Vec<f64>> {
    let total: f64 = weights.clone().map(|(i, w)| w * demo.population[i]).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance("population of the allocation".into()));
    }
    Ok(demo
        .shares
        .iter()
        .map(|share| {
            weights
                .clone()
                .map(|(i, w)| w * demo.population[i] * share[i])
                .sum::<f64>()
                / total
        })
        .collect())
}

/// Picks the `k` eligible nodes with the highest scores. Nodes tied with the
/// `k`-th score split the remaining capacity equally.
pub fn allocate_topk(
    scores: &[f64],
    eligible: &[bool],
    k: usize,
    demo: &Demographics,
) -> Result<AllocationResult> {
    check_len("eligibility mask", scores.len(), eligible.len())?;
    check_len("population", scores.len(), demo.population.len())?;
    for s in &demo.shares {
        check_len("attribute shares", scores.len(), s.len())?;
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| eligible[i]).collect();
    if k == 0 || k > order.len() {
        return Err(Error::AllocationTooLarge {
            k,
            eligible: order.len(),
        });
    }
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let cutoff = scores[order[k - 1]];
    let strict = order.iter().take_while(|&&i| scores[i] > cutoff).count();
    let tied = order[strict..].iter().take_while(|&&i| scores[i] == cutoff).count();
    let share = (k - strict) as f64 / tied as f64;
    let selected: Vec<Selection> = order[..strict + tied]
        .iter()
        .enumerate()
        .map(|(r, &node)| Selection {
            node,
            rank: r + 1,
            weight: if r < strict { 1.0 } else { share },
        })
        .collect();
    let served = weighted_shares(demo, selected.iter().map(|s| (s.node, s.weight)))?;
    let base_rate = weighted_shares(demo, order.iter().map(|&i| (i, 1.0)))?;
    Ok(AllocationResult {
        k,
        selected,
        attributes: demo.names.clone(),
        served,
        base_rate,
    })
}
