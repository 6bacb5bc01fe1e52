//! Statistical comparison of simulation output against the limit laws.
//!
//! * distribution error metrics against the theoretical `x_w`
//! * log-log least-squares power-law fits for the tail exponent
//! * tracked-vertex trajectory diagnostics: `zeta` estimates, scaled-weight
//!   stability, and the martingale increments of `Z[n, j] = b_n W[n, j] - d_n`
//! * replication aggregation
//!
//! The default tolerances used by reports (5% distribution error, 15%
//! stability ratio, 4-sigma martingale band) are artifact-level acceptance
//! choices calibrated by experiment, not asymptotic theory; reports carry
//! that provenance.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::engine::{RunResult, VertexTrajectory};
use crate::graph::{VertexId, WeightHistogram};
use crate::theory::{b_closed_form, e_closed_form, Coefficients, TheoreticalDistribution};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("w_cut = {w_cut} out of range 1..={w_max}")]
    WCutOutOfRange { w_cut: usize, w_max: usize },
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("insufficient data: need >= {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("nonpositive value at w = {0}; log-log fit needs positive data")]
    NonPositiveData(u64),
    #[error("vertex {0} was never born")]
    NeverBorn(VertexId),
    #[error("vertex {0} has fewer than 2 checkpoints past its birth")]
    TooFewCheckpoints(VertexId),
    #[error("runs do not share a configuration: {0}")]
    MismatchedRuns(String),
    #[error("no runs to merge")]
    NoRuns,
    #[error("bad chi-square input: {0}")]
    BadChiSquareInput(String),
}

/// Default acceptance tolerances, recorded in reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub distribution_rel_error: f64,
    pub stability_ratio: f64,
    pub martingale_sigmas: f64,
    pub provenance: &'static str,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            distribution_rel_error: 0.05,
            stability_ratio: 0.15,
            martingale_sigmas: 4.0,
            provenance: "artifact acceptance choices, calibrated by experiment",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightError {
    pub w: u64,
    pub empirical: f64,
    pub theory: f64,
    pub rel_error: f64,
}

/// Per-weight relative errors up to `w_cut` plus a truncated total-variation
/// distance: `(1/2) sum_{w<=w_cut} |emp - x_w| + (1/2) |tail_emp - y_w_cut|`.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    pub w_cut: usize,
    pub per_w: Vec<WeightError>,
    pub tv_distance: f64,
    pub tail_empirical: f64,
    pub tail_theory: f64,
}

impl DistributionReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_w.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    /// `w,empirical,theory,rel_error` table.
    pub fn write_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "w,empirical,theory,rel_error")?;
        for e in &self.per_w {
            writeln!(out, "{},{},{},{}", e.w, e.empirical, e.theory, e.rel_error)?;
        }
        Ok(())
    }
}

pub fn distribution_error(
    hist: &WeightHistogram,
    theory: &TheoreticalDistribution,
    w_cut: usize,
) -> Result<DistributionReport, AnalysisError> {
    if hist.v_count() == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    let ratios: BTreeMap<u64, f64> = hist
        .counts()
        .iter()
        .map(|(&w, &c)| (w, c as f64 / hist.v_count() as f64))
        .collect();
    distribution_error_from_ratios(&ratios, theory, w_cut)
}

/// Same as [`distribution_error`], operating on already-aggregated empirical
/// ratios (e.g. the replication mean of `X[n,w] / V_n`). Weights missing
/// from the map count as zero.
pub fn distribution_error_from_ratios(
    ratios: &BTreeMap<u64, f64>,
    theory: &TheoreticalDistribution,
    w_cut: usize,
) -> Result<DistributionReport, AnalysisError> {
    if w_cut < 1 || w_cut > theory.w_max() {
        return Err(AnalysisError::WCutOutOfRange {
            w_cut,
            w_max: theory.w_max(),
        });
    }
    let mut per_w = Vec::with_capacity(w_cut);
    let mut l1_head = 0.0;
    let mut head_mass = 0.0;
    for w in 1..=w_cut {
        let empirical = ratios.get(&(w as u64)).copied().unwrap_or(0.0);
        let theory_x = theory.x(w);
        per_w.push(WeightError {
            w: w as u64,
            empirical,
            theory: theory_x,
            rel_error: (empirical - theory_x).abs() / theory_x,
        });
        l1_head += (empirical - theory_x).abs();
        head_mass += empirical;
    }
    let tail_empirical = (1.0 - head_mass).max(0.0);
    let tail_theory = theory.y(w_cut);
    let tv_distance = 0.5 * (l1_head + (tail_empirical - tail_theory).abs());
    Ok(DistributionReport {
        w_cut,
        per_w,
        tv_distance,
        tail_empirical,
        tail_theory,
    })
}

/// Largest `w` whose expected count `x_w * V` stays at or above `min_count`
/// (Poisson-level noise control); at least 1.
pub fn default_w_cut(theory: &TheoreticalDistribution, v_count: f64, min_count: f64) -> usize {
    let mut cut = 1;
    for w in 1..=theory.w_max() {
        if theory.x(w) * v_count >= min_count {
            cut = w;
        }
    }
    cut
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log-log space.
    pub residual: f64,
}

/// Least squares of `log value` on `log w` over `w_min..=w_max`.
pub fn fit_power_law(
    points: &[(u64, f64)],
    w_min: u64,
    w_max: u64,
) -> Result<PowerLawFit, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(w, value) in points {
        if w < w_min || w > w_max {
            continue;
        }
        if value <= 0.0 {
            return Err(AnalysisError::NonPositiveData(w));
        }
        xs.push((w as f64).ln());
        ys.push(value.ln());
    }
    if xs.len() < 10 {
        return Err(AnalysisError::InsufficientData {
            needed: 10,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    Ok(PowerLawFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
    })
}

/// Per-vertex trajectory diagnostics extracted from one run.
#[derive(Debug, Clone, Serialize)]
pub struct VertexTrajectorySummary {
    pub label: VertexId,
    /// Estimate of the scaling limit of `W[n, j] / n^alpha`:
    /// `b_n W[n, j] / Gamma(1 + alpha)` at the final checkpoint.
    pub zeta: f64,
    /// Scaled weight at the final checkpoint over an earlier checkpoint
    /// (the latest one at or before a tenth of the final step).
    pub stability_ratio: f64,
    /// `(n, W / n^alpha)` at checkpoints past the vertex's birth.
    pub scaled: Vec<(u64, f64)>,
    /// `Z` differences between consecutive checkpoints once `W > 1`.
    pub increments: Vec<f64>,
    pub increment_mean: Option<f64>,
    pub increment_se: Option<f64>,
    /// `(n, e_n / (W - 1))` at checkpoints with `W > 1`; converges, so it
    /// must stay bounded along the run.
    pub supermartingale: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub vertices: Vec<VertexTrajectorySummary>,
}

fn summarize_trajectory(
    trajectory: &VertexTrajectory,
    coeffs: &Coefficients,
) -> Result<VertexTrajectorySummary, AnalysisError> {
    let alpha = coeffs.alpha;
    let born: Vec<_> = trajectory
        .points
        .iter()
        .filter(|pt| pt.weight > 0)
        .collect();
    if born.is_empty() {
        return Err(AnalysisError::NeverBorn(trajectory.label));
    }
    if born.len() < 2 {
        return Err(AnalysisError::TooFewCheckpoints(trajectory.label));
    }
    let scaled: Vec<(u64, f64)> = born
        .iter()
        .map(|pt| (pt.n, pt.weight as f64 / (pt.n as f64).powf(alpha)))
        .collect();
    let (final_n, final_scaled) = *scaled.last().unwrap();
    let earlier = scaled
        .iter()
        .rev()
        .find(|(n, _)| *n <= final_n / 10 && *n < final_n)
        .or_else(|| scaled.iter().find(|(n, _)| *n < final_n))
        .ok_or(AnalysisError::TooFewCheckpoints(trajectory.label))?;
    let stability_ratio = final_scaled / earlier.1;

    let final_weight = born.last().unwrap().weight;
    let gamma_1_alpha = ln_gamma(1.0 + alpha).exp();
    let zeta = b_closed_form(final_n, alpha) * final_weight as f64 / gamma_1_alpha;

    let past_one: Vec<_> = born.iter().filter(|pt| pt.weight > 1).collect();
    let increments: Vec<f64> = past_one.windows(2).map(|w| w[1].z - w[0].z).collect();
    let increment_mean = (!increments.is_empty())
        .then(|| increments.iter().sum::<f64>() / increments.len() as f64);
    let increment_se = (increments.len() >= 2).then(|| {
        let mean = increment_mean.unwrap();
        let var = increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (increments.len() - 1) as f64;
        (var / increments.len() as f64).sqrt()
    });
    let supermartingale: Vec<(u64, f64)> = past_one
        .iter()
        .map(|pt| (pt.n, e_closed_form(pt.n, alpha) / (pt.weight - 1) as f64))
        .collect();

    Ok(VertexTrajectorySummary {
        label: trajectory.label,
        zeta,
        stability_ratio,
        scaled,
        increments,
        increment_mean,
        increment_se,
        supermartingale,
    })
}

/// Summarizes every tracked vertex of a run. Fails if a tracked vertex was
/// never born or has fewer than two checkpoints past its birth.
pub fn trajectory_summary(
    result: &RunResult,
    coeffs: &Coefficients,
) -> Result<TrajectoryReport, AnalysisError> {
    let vertices = result
        .trajectories
        .iter()
        .map(|t| summarize_trajectory(t, coeffs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectoryReport { vertices })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationTrajectory {
    pub replication_index: u32,
    pub trajectory: VertexTrajectory,
}

/// Order-independent aggregate over replications sharing one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub n_runs: usize,
    pub n_steps: u64,
    pub v_ratio_mean: f64,
    pub v_ratio_variance: f64,
    /// Mean over runs of the final-checkpoint ratio `X[n, w] / V_n`.
    pub per_w_ratio_mean: BTreeMap<u64, f64>,
    pub per_w_ratio_variance: BTreeMap<u64, f64>,
    pub trajectories: Vec<ReplicationTrajectory>,
}

pub fn merge_results(results: &[RunResult]) -> Result<Aggregate, AnalysisError> {
    if results.is_empty() {
        return Err(AnalysisError::NoRuns);
    }
    let head = &results[0].manifest;
    for r in results {
        let m = &r.manifest;
        if (m.p, m.r, m.q, m.n_steps) != (head.p, head.r, head.q, head.n_steps) {
            return Err(AnalysisError::MismatchedRuns(format!(
                "(p, r, q, n_steps) = ({}, {}, {}, {}) vs ({}, {}, {}, {})",
                m.p, m.r, m.q, m.n_steps, head.p, head.r, head.q, head.n_steps
            )));
        }
    }
    let mut order: Vec<&RunResult> = results.iter().collect();
    order.sort_by_key(|r| (r.manifest.replication_index, r.manifest.seed));

    let n_runs = order.len();
    let v_ratios: Vec<f64> = order
        .iter()
        .map(|r| r.manifest.final_v_count as f64 / r.manifest.n_steps as f64)
        .collect();
    let (v_ratio_mean, v_ratio_variance) = mean_and_variance(&v_ratios);

    let mut all_weights: Vec<u64> = Vec::new();
    for r in &order {
        all_weights.extend(r.final_checkpoint().histogram.counts().keys().copied());
    }
    all_weights.sort_unstable();
    all_weights.dedup();
    let mut per_w_ratio_mean = BTreeMap::new();
    let mut per_w_ratio_variance = BTreeMap::new();
    for &w in &all_weights {
        let ratios: Vec<f64> = order
            .iter()
            .map(|r| r.final_checkpoint().histogram.ratio(w))
            .collect();
        let (mean, variance) = mean_and_variance(&ratios);
        per_w_ratio_mean.insert(w, mean);
        per_w_ratio_variance.insert(w, variance);
    }

    let trajectories = order
        .iter()
        .flat_map(|r| {
            r.trajectories.iter().map(|t| ReplicationTrajectory {
                replication_index: r.manifest.replication_index,
                trajectory: t.clone(),
            })
        })
        .collect();

    Ok(Aggregate {
        n_runs,
        n_steps: head.n_steps,
        v_ratio_mean,
        v_ratio_variance,
        per_w_ratio_mean,
        per_w_ratio_variance,
        trajectories,
    })
}

/// Sample mean and (n-1)-denominator variance; variance is 0 for a single
/// observation.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, variance)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of observed counts against expected
/// probabilities (`df = k - 1`).
pub fn chi_square_test(
    observed: &[u64],
    expected_probs: &[f64],
) -> Result<ChiSquareTest, AnalysisError> {
    if observed.len() != expected_probs.len() {
        return Err(AnalysisError::BadChiSquareInput(format!(
            "{} observed cells vs {} probabilities",
            observed.len(),
            expected_probs.len()
        )));
    }
    if observed.len() < 2 {
        return Err(AnalysisError::BadChiSquareInput(
            "need at least 2 cells".into(),
        ));
    }
    let prob_total: f64 = expected_probs.iter().sum();
    if expected_probs.iter().any(|&p| p <= 0.0) || (prob_total - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::BadChiSquareInput(format!(
            "probabilities must be positive and sum to 1 (sum = {prob_total})"
        )));
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let statistic: f64 = observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let expected = nf * p;
            (o as f64 - expected).powi(2) / expected
        })
        .sum();
    let df = (observed.len() - 1) as u64;
    let chi = ChiSquared::new(df as f64).expect("df >= 1");
    Ok(ChiSquareTest {
        statistic,
        df,
        p_value: 1.0 - chi.cdf(statistic),
    })
}

/// Plot-ready log-log tail table: `w,x_w,empirical_ratio`.
pub fn write_tail_csv<W: io::Write>(
    theory: &TheoreticalDistribution,
    ratios: &BTreeMap<u64, f64>,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "w,x_w,empirical_ratio")?;
    for w in 1..=theory.w_max() {
        let ratio = ratios.get(&(w as u64)).copied().unwrap_or(0.0);
        writeln!(out, "{},{},{}", w, theory.x(w), ratio)?;
    }
    Ok(())
}
