//! Empirical convergence checks: one-step drift of the jump count, decay of
//! the total variation distance to the exact posterior, and standard
//! output analysis of a single trace.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{MjpError, Result};
use crate::model::{Evidence, RateMatrix, SamplerConfig, Trajectory};
use crate::oracle::exact_posterior_marginals;
use crate::raoteh::{cycle_trajectory, ChainTrace, RaoTeh};
use crate::util::rng_stream;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
pub const MIN_DRIFT_REPLICATES: usize = 100;
pub const MIN_TV_REPLICATES: usize = 10_000;

/// `½ Σ |p(s) - r(s)|`.
pub fn tv_distance(p: &[f64], r: &[f64]) -> Result<f64> {
    if p.len() != r.len() {
        return Err(MjpError::DimensionMismatch {
            expected: p.len(),
            got: r.len(),
        });
    }
    let d: f64 = p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * d).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftPoint {
    /// |J(X)| of the seed trajectory.
    pub n: usize,
    /// Monte Carlo mean of |J(X')| after one sweep.
    pub mean: f64,
    pub std_error: f64,
}

/// Linear fit `E(|J(X')| | |J(X)| = n) ≈ q_hat n + c_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub points: Vec<DriftPoint>,
    pub q_hat: f64,
    pub c_hat: f64,
    /// 95% interval for the slope.
    pub ci_slope: (f64, f64),
}

/// Unweighted least squares through the replicate means. The slope's
/// variance combines the propagated standard errors of the means with the
/// residual scatter (when there are more than two points).
fn fit_drift(points: Vec<DriftPoint>) -> DriftEstimate {
    let k = points.len() as f64;
    let xbar = points.iter().map(|p| p.n as f64).sum::<f64>() / k;
    let ybar = points.iter().map(|p| p.mean).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.n as f64 - xbar).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.n as f64 - xbar) * (p.mean - ybar))
        .sum();
    let q_hat = sxy / sxx;
    let c_hat = ybar - q_hat * xbar;

    let propagated: f64 = points
        .iter()
        .map(|p| ((p.n as f64 - xbar) / sxx * p.std_error).powi(2))
        .sum();
    let residual = if points.len() > 2 {
        let rss: f64 = points
            .iter()
            .map(|p| (p.mean - c_hat - q_hat * p.n as f64).powi(2))
            .sum();
        rss / (k - 2.0) / sxx
    } else {
        0.0
    };
    let half = Z95 * (propagated + residual).sqrt();
    DriftEstimate {
        points,
        q_hat,
        c_hat,
        ci_slope: (q_hat - half, q_hat + half),
    }
}

/// For each `n` in `ns`, runs `replicates` independent single sweeps from
/// the deterministic `n`-jump cycle trajectory and records `|J(X')|`.
///
/// Replicate `r` of the `i`-th seed uses stream `i * replicates + r` of
/// `seed`, so the estimate does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn estimate_drift(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    cfg: &SamplerConfig,
    ns: &[usize],
    replicates: usize,
    t_min: f64,
    t_max: f64,
    seed: u64,
) -> Result<DriftEstimate> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MjpError::InvalidConfig(
            "drift needs at least two strictly increasing jump counts".into(),
        ));
    }
    if replicates < MIN_DRIFT_REPLICATES {
        return Err(MjpError::InvalidConfig(format!(
            "drift needs at least {MIN_DRIFT_REPLICATES} replicates, got {replicates}"
        )));
    }
    let sampler = RaoTeh::from_config(nu, q, ev, cfg)?;
    let mut points = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let x = cycle_trajectory(q, n, 0, t_min, t_max)?;
        if ev.likelihood(&x) <= 0.0 {
            return Err(MjpError::SeedTrajectoryInfeasible { n });
        }
        let counts: Vec<usize> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_stream(seed, (i * replicates + r) as u64);
                sampler.step(&x, &mut rng).map(|o| o.trajectory.n_jumps())
            })
            .collect::<Result<_>>()?;
        let m = replicates as f64;
        let mean = counts.iter().sum::<usize>() as f64 / m;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0);
        points.push(DriftPoint {
            n,
            mean,
            std_error: (var / m).sqrt(),
        });
    }
    Ok(fit_drift(points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvDecayCurve {
    pub ms: Vec<usize>,
    pub tv: Vec<f64>,
    /// Delta-method standard error of each TV estimate.
    pub std_error: Vec<f64>,
    pub n_replicates: usize,
    /// Exact posterior law of `X(probe)`.
    pub target: Vec<f64>,
}

impl TvDecayCurve {
    /// True when no point exceeds its predecessor by more than `k`
    /// combined standard errors.
    pub fn is_monotone_within(&self, k: f64) -> bool {
        (1..self.tv.len()).all(|i| {
            let se = (self.std_error[i].powi(2) + self.std_error[i - 1].powi(2)).sqrt();
            self.tv[i] <= self.tv[i - 1] + k * se
        })
    }
}

/// Standard error of `½ Σ |p̂_s - π_s|` for a multinomial estimate `p̂`
/// from `n` draws, treating the signs of the differences as fixed.
fn tv_std_error(p_hat: &[f64], target: &[f64], n: usize) -> f64 {
    let signed: f64 = p_hat
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).signum() * p)
        .sum();
    let var = (1.0 - signed * signed).max(0.0) / (4.0 * n as f64);
    var.sqrt()
}

/// Runs `n_replicates` independent chains from `x0` and compares the law of
/// `X_m(probe)` with the exact posterior marginal at each `m` in `ms`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tv_decay(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    cfg: &SamplerConfig,
    x0: &Trajectory,
    ms: &[usize],
    n_replicates: usize,
    probe: f64,
    seed: u64,
) -> Result<TvDecayCurve> {
    if n_replicates < MIN_TV_REPLICATES {
        return Err(MjpError::InvalidConfig(format!(
            "TV decay needs at least {MIN_TV_REPLICATES} replicates, got {n_replicates}"
        )));
    }
    if ms.is_empty() || ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MjpError::InvalidConfig(
            "sweep counts must be nonempty and strictly increasing".into(),
        ));
    }
    let sampler = RaoTeh::from_config(nu, q, ev, cfg)?;
    x0.check_states(q.size())?;
    x0.eval(probe)?;
    if ev.likelihood(x0) <= 0.0 {
        return Err(MjpError::ImpossibleEvidence { index: 0 });
    }
    let target = exact_posterior_marginals(nu, q, ev, &[probe], x0.t_min(), x0.t_max())?.remove(0);
    let max_m = *ms.last().unwrap();

    let per_replicate: Vec<Vec<usize>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_stream(seed, r as u64);
            let mut x = x0.clone();
            let mut seen = Vec::with_capacity(ms.len());
            let mut next = 0;
            for m in 0..=max_m {
                if ms[next] == m {
                    seen.push(x.state_at(probe));
                    next += 1;
                    if next == ms.len() {
                        break;
                    }
                }
                x = sampler.step(&x, &mut rng)?.trajectory;
            }
            Ok(seen)
        })
        .collect::<Result<_>>()?;

    let n = q.size();
    let mut tv = Vec::with_capacity(ms.len());
    let mut std_error = Vec::with_capacity(ms.len());
    for k in 0..ms.len() {
        let mut freq = vec![0.0; n];
        for row in &per_replicate {
            freq[row[k]] += 1.0;
        }
        freq.iter_mut().for_each(|f| *f /= n_replicates as f64);
        tv.push(tv_distance(&freq, &target)?);
        std_error.push(tv_std_error(&freq, &target, n_replicates));
    }
    Ok(TvDecayCurve {
        ms: ms.to_vec(),
        tv,
        std_error,
        n_replicates,
        target,
    })
}

/// Mean, integrated autocorrelation time and effective sample size of one
/// scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub mean: f64,
    pub variance: f64,
    /// `None` when the series is constant.
    pub tau: Option<f64>,
    pub ess: f64,
    pub degenerate: bool,
}

/// Integrated autocorrelation time `1 + 2 Σ_k ρ_k`, truncated by Geyer's
/// initial positive sequence rule: sums of adjacent lag pairs are added
/// while they stay positive.
pub fn integrated_autocorrelation_time(series: &[f64]) -> Option<f64> {
    let n = series.len();
    if n < 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return None;
    }
    let mut sum_pairs = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        m += 1;
    }
    Some(-1.0 + 2.0 * sum_pairs)
}

pub fn summarize_series(series: &[f64]) -> SeriesSummary {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let variance = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    match integrated_autocorrelation_time(series) {
        Some(tau) => SeriesSummary {
            mean,
            variance,
            tau: Some(tau),
            ess: n / tau,
            degenerate: false,
        },
        None => SeriesSummary {
            mean,
            variance,
            tau: None,
            ess: 0.0,
            degenerate: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSummary {
    pub t: f64,
    /// Empirical law of the state at the probe time.
    pub frequencies: Vec<f64>,
    /// Summary of the state index series.
    pub series: SeriesSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub n_kept: usize,
    pub n_jumps: SeriesSummary,
    pub log_evidence: SeriesSummary,
    pub probes: Vec<ProbeSummary>,
    /// |J| value -> number of kept sweeps.
    pub jump_histogram: BTreeMap<usize, usize>,
}

/// Smallest number of post-burn-in sweeps a summary is computed from.
pub const MIN_SUMMARY_LEN: usize = 4;

pub fn trace_summary(trace: &ChainTrace, burn_in: usize) -> Result<TraceSummary> {
    let len = trace.len();
    if burn_in >= len || len - burn_in < MIN_SUMMARY_LEN {
        return Err(MjpError::TraceTooShort { len, burn_in });
    }
    let jumps: Vec<f64> = trace.n_jumps[burn_in..].iter().map(|&j| j as f64).collect();
    let mut jump_histogram = BTreeMap::new();
    for &j in &trace.n_jumps[burn_in..] {
        *jump_histogram.entry(j).or_insert(0) += 1;
    }
    let probes = trace
        .probe_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let states: Vec<usize> = trace.probe_states[burn_in..].iter().map(|r| r[k]).collect();
            let mut frequencies = vec![0.0; trace.n_states];
            for &s in &states {
                frequencies[s] += 1.0;
            }
            frequencies.iter_mut().for_each(|f| *f /= states.len() as f64);
            let series: Vec<f64> = states.iter().map(|&s| s as f64).collect();
            ProbeSummary {
                t,
                frequencies,
                series: summarize_series(&series),
            }
        })
        .collect();
    Ok(TraceSummary {
        n_kept: len - burn_in,
        n_jumps: summarize_series(&jumps),
        log_evidence: summarize_series(&trace.log_evidence[burn_in..]),
        probes,
        jump_histogram,
    })
}
