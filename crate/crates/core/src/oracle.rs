//! Exact reference computations for small instances.
//!
//! Everything here is deliberately brute force or closed form, and shares
//! no code with the sampler's filtering path, so that the two can be
//! checked against each other.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{MjpError, Result};
use crate::model::{validate_distribution, Evidence, RateMatrix, UniformizedKernel};
use crate::util::sample_categorical;

/// Poisson tail mass below which the uniformization series is truncated.
pub const SERIES_TAIL: f64 = 1e-12;
/// Largest number of skeletons [`enumerate_skeleton_posterior`] will visit.
pub const ENUMERATION_CAP: usize = 1_000_000;
/// Proposals [`rejection_sample_skeleton`] makes before giving up.
pub const REJECTION_CAP: u64 = 10_000_000;

type Matrix = Vec<Vec<f64>>;

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, &aik) in a[i].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `exp(t Q)` by the uniformization series
/// `sum_n e^{-λt} (λt)^n / n! P^n` with `λ = 2 q_max`.
pub fn transition_probability(q: &RateMatrix, t: f64) -> Matrix {
    assert!(t >= 0.0 && t.is_finite(), "duration must be finite and nonnegative");
    let n = q.size();
    let identity: Matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if t == 0.0 {
        return identity;
    }
    let lambda = 2.0 * q.q_max();
    let p: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0 - q.leave(i) / lambda
                    } else {
                        q.rate(i, j) / lambda
                    }
                })
                .collect()
        })
        .collect();
    let mean = lambda * t;
    let max_terms = (mean + 50.0 * mean.sqrt() + 100.0) as usize;
    let mut log_w = -mean;
    let mut power = identity;
    let mut out = vec![vec![0.0; n]; n];
    let mut mass = 0.0;
    for k in 0..=max_terms {
        if k > 0 {
            log_w += mean.ln() - (k as f64).ln();
            power = mat_mul(&power, &p);
        }
        let w = log_w.exp();
        mass += w;
        for i in 0..n {
            for j in 0..n {
                out[i][j] += w * power[i][j];
            }
        }
        // past the mode the remaining terms only shrink
        if k as f64 > mean && 1.0 - mass < SERIES_TAIL {
            break;
        }
    }
    out
}

/// Stationary law of `Q`: solves `π Q = 0, Σ π = 1` by Gaussian elimination.
pub fn stationary_distribution(q: &RateMatrix) -> Vec<f64> {
    let n = q.size();
    // rows of the system: transpose(Q) with the last equation replaced by Σπ = 1
    let mut a: Matrix = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| q.rate(j, i)).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, p) in a[r].iter_mut().zip(pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    a.iter().map(|row| row[n]).collect()
}

fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    let n = m[0].len();
    let mut out = vec![0.0; n];
    for (i, &vi) in v.iter().enumerate() {
        for j in 0..n {
            out[j] += vi * m[i][j];
        }
    }
    out
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let z: f64 = v.iter().sum();
    if z > 0.0 {
        v.iter_mut().for_each(|x| *x /= z);
    }
    z
}

/// Exact `p(X(t) = s | Y)` at every probe time, by forward-backward
/// recursions through `exp(Δt Q)` between consecutive event times.
pub fn exact_posterior_marginals(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    probes: &[f64],
    t_min: f64,
    t_max: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = q.size();
    validate_distribution(nu, n)?;
    ev.check_window(t_min, t_max)?;
    for &t in probes {
        if !(t >= t_min && t <= t_max) {
            return Err(MjpError::TimeOutOfWindow { t, t_min, t_max });
        }
    }

    let mut times: Vec<f64> = std::iter::once(t_min)
        .chain(ev.observations().iter().map(|o| o.t))
        .chain(probes.iter().copied())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let k = times.len();
    let event = |t: f64| times.binary_search_by(|x| x.total_cmp(&t)).unwrap();

    let mut factors = vec![vec![1.0; n]; k];
    let mut first_obs = vec![usize::MAX; k];
    for (j, o) in ev.observations().iter().enumerate() {
        let e = event(o.t);
        factors[e].iter_mut().zip(&o.lik).for_each(|(a, b)| *a *= b);
        first_obs[e] = first_obs[e].min(j);
    }
    let transitions: Vec<Matrix> = times
        .windows(2)
        .map(|w| transition_probability(q, w[1] - w[0]))
        .collect();

    let mut alphas = Vec::with_capacity(k);
    let mut alpha: Vec<f64> = nu.iter().zip(&factors[0]).map(|(a, b)| a * b).collect();
    for e in 0..k {
        if e > 0 {
            alpha = vec_mat(&alpha, &transitions[e - 1]);
            alpha.iter_mut().zip(&factors[e]).for_each(|(a, b)| *a *= b);
        }
        if normalize(&mut alpha) <= 0.0 {
            return Err(MjpError::ImpossibleEvidence {
                index: first_obs[e].min(ev.len()),
            });
        }
        alphas.push(alpha.clone());
    }

    let mut betas = vec![vec![1.0; n]; k];
    for e in (0..k - 1).rev() {
        let weighted: Vec<f64> = factors[e + 1].iter().zip(&betas[e + 1]).map(|(a, b)| a * b).collect();
        let mut beta = mat_vec(&transitions[e], &weighted);
        normalize(&mut beta);
        betas[e] = beta;
    }

    Ok(probes
        .iter()
        .map(|&t| {
            let e = event(t);
            let mut m: Vec<f64> = alphas[e].iter().zip(&betas[e]).map(|(a, b)| a * b).collect();
            normalize(&mut m);
            m
        })
        .collect())
}

/// `i_j = max{i : T_i <= t_obs_j}` with `T_0 = t_min`, by linear scan.
fn observation_indices(grid_times: &[f64], ev: &Evidence) -> Vec<usize> {
    ev.observations()
        .iter()
        .map(|o| {
            let mut idx = 0;
            for (i, &t) in grid_times.iter().enumerate() {
                if t <= o.t {
                    idx = i + 1;
                }
            }
            idx
        })
        .collect()
}

fn check_grid_inputs(grid_times: &[f64], nu: &[f64], kernel: &UniformizedKernel) -> Result<()> {
    validate_distribution(nu, kernel.size())?;
    if grid_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MjpError::InvalidJumps("grid times must be strictly increasing".into()));
    }
    Ok(())
}

/// Full posterior over skeletons on a fixed grid, by enumerating every
/// sequence `S_0..S_N` and weighting it by
/// `ν(S_0) Π P(S_{i-1}, S_i) Π_j L_j(S_{i_j})`.
pub fn enumerate_skeleton_posterior(
    grid_times: &[f64],
    nu: &[f64],
    kernel: &UniformizedKernel,
    ev: &Evidence,
) -> Result<BTreeMap<Vec<usize>, f64>> {
    check_grid_inputs(grid_times, nu, kernel)?;
    let n = kernel.size();
    let len = grid_times.len() + 1;
    let count = (n as f64).powi(len as i32);
    if count > ENUMERATION_CAP as f64 {
        return Err(MjpError::TooLarge {
            count,
            cap: ENUMERATION_CAP,
        });
    }
    let obs_idx = observation_indices(grid_times, ev);
    let mut out = BTreeMap::new();
    let mut total = 0.0;
    let mut skeleton = vec![0usize; len];
    loop {
        let mut w = nu[skeleton[0]];
        for i in 1..len {
            w *= kernel.prob(skeleton[i - 1], skeleton[i]);
        }
        for (o, &i) in ev.observations().iter().zip(&obs_idx) {
            w *= o.lik[skeleton[i]];
        }
        if w > 0.0 {
            total += w;
            out.insert(skeleton.clone(), w);
        }
        // mixed-radix increment, least significant digit first
        let mut d = 0;
        loop {
            if d == len {
                if total <= 0.0 {
                    return Err(MjpError::ImpossibleEvidence { index: 0 });
                }
                out.values_mut().for_each(|v| *v /= total);
                return Ok(out);
            }
            skeleton[d] += 1;
            if skeleton[d] < n {
                break;
            }
            skeleton[d] = 0;
            d += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionDraw {
    pub skeleton: Vec<usize>,
    /// Number of prior proposals made, including the accepted one.
    pub attempts: u64,
}

/// Exact skeleton draw by rejection: propose from the prior chain `(ν, P)`
/// and accept with probability `Π_j L_j(S_{i_j}) / lik_max_j`.
pub fn rejection_sample_skeleton<R: Rng + ?Sized>(
    grid_times: &[f64],
    nu: &[f64],
    kernel: &UniformizedKernel,
    ev: &Evidence,
    rng: &mut R,
) -> Result<RejectionDraw> {
    check_grid_inputs(grid_times, nu, kernel)?;
    let obs_idx = observation_indices(grid_times, ev);
    let mut skeleton = vec![0usize; grid_times.len() + 1];
    for attempts in 1..=REJECTION_CAP {
        skeleton[0] = sample_categorical(rng, nu, 1.0);
        for i in 1..skeleton.len() {
            skeleton[i] = sample_categorical(rng, kernel.row(skeleton[i - 1]), 1.0);
        }
        let accept: f64 = ev
            .observations()
            .iter()
            .zip(&obs_idx)
            .map(|(o, &i)| o.lik[skeleton[i]] / o.lik_max)
            .product();
        if rng.random::<f64>() < accept {
            return Ok(RejectionDraw { skeleton, attempts });
        }
    }
    Err(MjpError::RejectionStalled {
        attempts: REJECTION_CAP,
    })
}

/// Exact `E(|J| | S_{i_1} = s_1, ..)` for the chain `S_0 ~ nu`,
/// `S_i ~ P(S_{i-1}, .)`, `i <= n`, where `|J|` counts indices with
/// `S_i != S_{i-1}`.
///
/// Carries `f_i(s) = P(S_i = s, conditions up to i)` and
/// `g_i(s) = E(|J_{≤i}|; S_i = s, conditions up to i)` forward, dividing
/// both by the same scale each step.
pub fn expected_jumps_conditional(
    kernel: &UniformizedKernel,
    nu: &[f64],
    n: usize,
    conditioning: &[(usize, usize)],
) -> Result<f64> {
    let size = kernel.size();
    validate_distribution(nu, size)?;
    for &(i, s) in conditioning {
        if i > n {
            return Err(MjpError::DimensionMismatch { expected: n, got: i });
        }
        if s >= size {
            return Err(MjpError::StateOutOfRange { state: s, size });
        }
    }
    let mut allowed = vec![vec![true; size]; n + 1];
    for &(i, s) in conditioning {
        for (t, a) in allowed[i].iter_mut().enumerate() {
            *a &= t == s;
        }
    }

    let mut f: Vec<f64> = nu.to_vec();
    let mut g = vec![0.0; size];
    let apply = |f: &mut [f64], g: &mut [f64], mask: &[bool]| -> Result<()> {
        for s in 0..size {
            if !mask[s] {
                f[s] = 0.0;
                g[s] = 0.0;
            }
        }
        let z: f64 = f.iter().sum();
        if z <= 0.0 {
            return Err(MjpError::ZeroProbabilityConditioning);
        }
        f.iter_mut().for_each(|v| *v /= z);
        g.iter_mut().for_each(|v| *v /= z);
        Ok(())
    };
    apply(&mut f, &mut g, &allowed[0])?;
    for mask in &allowed[1..] {
        let mut f_next = vec![0.0; size];
        let mut g_next = vec![0.0; size];
        for s in 0..size {
            if f[s] == 0.0 && g[s] == 0.0 {
                continue;
            }
            for t in 0..size {
                let p = kernel.prob(s, t);
                f_next[t] += f[s] * p;
                g_next[t] += (g[s] + if s != t { f[s] } else { 0.0 }) * p;
            }
        }
        f = f_next;
        g = g_next;
        apply(&mut f, &mut g, mask)?;
    }
    Ok(g.iter().sum::<f64>() / f.iter().sum::<f64>())
}
