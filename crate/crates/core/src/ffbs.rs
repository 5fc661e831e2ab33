//! Forward filtering, backward sampling of the skeleton on a fixed grid.

use rand::Rng;

use crate::error::{MjpError, Result};
use crate::model::{validate_distribution, Evidence, RateMatrix, UniformizedKernel};
use crate::util::sample_categorical;

/// Uniformized kernel: `P(s, s') = Q(s, s') / λ` off the diagonal and
/// `P(s, s) = 1 - Q(s) / λ`. Requires `λ > q_max` strictly.
pub fn build_kernel(q: &RateMatrix, lambda: f64) -> Result<UniformizedKernel> {
    if !(lambda.is_finite() && lambda > q.q_max()) {
        return Err(MjpError::LambdaTooSmall {
            lambda,
            q_max: q.q_max(),
        });
    }
    let n = q.size();
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        let row = &mut p[s * n..(s + 1) * n];
        for (t, v) in row.iter_mut().enumerate() {
            *v = if s == t {
                1.0 - q.leave(s) / lambda
            } else {
                q.rate(s, t) / lambda
            };
        }
    }
    Ok(UniformizedKernel { n, p, lambda })
}

/// Pointwise products of the likelihood vectors attached to each grid index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionAttachment {
    /// Sorted by grid index, one entry per index that carries evidence.
    factors: Vec<(usize, Vec<f64>)>,
}

impl EmissionAttachment {
    pub fn factors(&self) -> &[(usize, Vec<f64>)] {
        &self.factors
    }

    pub fn factor(&self, index: usize) -> Option<&[f64]> {
        self.factors
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|k| self.factors[k].1.as_slice())
    }
}

/// Grid index carrying an observation at `t_obs`: the number of grid times
/// `<= t_obs`, so observations before the first grid point land on `S_0`.
#[inline]
pub fn observation_index(grid_times: &[f64], t_obs: f64) -> usize {
    grid_times.partition_point(|&t| t <= t_obs)
}

pub fn attach_emissions(grid_times: &[f64], ev: &Evidence) -> EmissionAttachment {
    let mut factors: Vec<(usize, Vec<f64>)> = Vec::new();
    for o in ev.observations() {
        let i = observation_index(grid_times, o.t);
        match factors.last_mut() {
            // Evidence times are nondecreasing, so indices arrive in order.
            Some((last, f)) if *last == i => {
                f.iter_mut().zip(&o.lik).for_each(|(a, b)| *a *= b);
            }
            _ => factors.push((i, o.lik.clone())),
        }
    }
    EmissionAttachment { factors }
}

/// Normalized forward messages `alpha_i(s) = p(S_i = s | Y attached to 0..=i)`
/// together with `log p(Y | T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    n_states: usize,
    alphas: Vec<f64>,
    log_norm: f64,
}

impl FilterState {
    pub fn n_steps(&self) -> usize {
        self.alphas.len() / self.n_states - 1
    }

    pub fn alpha(&self, i: usize) -> &[f64] {
        &self.alphas[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

pub fn forward_filter(
    kernel: &UniformizedKernel,
    nu: &[f64],
    attach: &EmissionAttachment,
    n_steps: usize,
) -> Result<FilterState> {
    let n = kernel.size();
    validate_distribution(nu, n)?;
    let mut alphas = vec![0.0; (n_steps + 1) * n];
    let mut log_norm = 0.0;
    let mut factors = attach.factors().iter().peekable();

    for i in 0..=n_steps {
        let (prev, cur) = alphas.split_at_mut(i * n);
        let cur = &mut cur[..n];
        if i == 0 {
            cur.copy_from_slice(nu);
        } else {
            let prev = &prev[(i - 1) * n..];
            for (s, &a) in prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (c, &p) in cur.iter_mut().zip(kernel.row(s)) {
                    *c += a * p;
                }
            }
        }
        while let Some((_, f)) = factors.next_if(|(idx, _)| *idx == i) {
            cur.iter_mut().zip(f).for_each(|(c, l)| *c *= l);
        }
        let z: f64 = cur.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(MjpError::ImpossibleEvidence { index: i });
        }
        cur.iter_mut().for_each(|c| *c /= z);
        log_norm += z.ln();
    }
    if let Some((idx, _)) = factors.next() {
        return Err(MjpError::DimensionMismatch {
            expected: n_steps,
            got: *idx,
        });
    }
    Ok(FilterState {
        n_states: n,
        alphas,
        log_norm,
    })
}

/// Draws `S_N ~ alpha_N`, then `S_{i-1} ∝ alpha_{i-1}(.) P(., S_i)`.
pub fn backward_sample<R: Rng + ?Sized>(
    filter: &FilterState,
    kernel: &UniformizedKernel,
    rng: &mut R,
) -> Vec<usize> {
    let n = filter.n_states;
    let steps = filter.n_steps();
    let mut skeleton = vec![0; steps + 1];
    skeleton[steps] = sample_categorical(rng, filter.alpha(steps), 1.0);
    let mut w = vec![0.0; n];
    for i in (0..steps).rev() {
        let next = skeleton[i + 1];
        let mut z = 0.0;
        for (s, (ws, &a)) in w.iter_mut().zip(filter.alpha(i)).enumerate() {
            *ws = a * kernel.prob(s, next);
            z += *ws;
        }
        skeleton[i] = sample_categorical(rng, &w, z);
    }
    skeleton
}

/// Probability that [`backward_sample`] returns `skeleton`, as the product
/// of its backward conditionals.
pub fn skeleton_probability(filter: &FilterState, kernel: &UniformizedKernel, skeleton: &[usize]) -> f64 {
    let steps = filter.n_steps();
    assert_eq!(skeleton.len(), steps + 1, "skeleton length must match the grid");
    let mut prob = filter.alpha(steps)[skeleton[steps]];
    for i in (0..steps).rev() {
        let next = skeleton[i + 1];
        let alpha = filter.alpha(i);
        let z: f64 = alpha
            .iter()
            .enumerate()
            .map(|(s, &a)| a * kernel.prob(s, next))
            .sum();
        if z == 0.0 {
            return 0.0;
        }
        prob *= alpha[skeleton[i]] * kernel.prob(skeleton[i], next) / z;
    }
    prob
}

/// One exact draw from `p(S | T, Y)` on the grid `grid_times`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonDraw {
    pub skeleton: Vec<usize>,
    pub log_evidence: f64,
}

pub fn sample_skeleton<R: Rng + ?Sized>(
    kernel: &UniformizedKernel,
    nu: &[f64],
    grid_times: &[f64],
    ev: &Evidence,
    rng: &mut R,
) -> Result<SkeletonDraw> {
    let attach = attach_emissions(grid_times, ev);
    let filter = forward_filter(kernel, nu, &attach, grid_times.len())?;
    Ok(SkeletonDraw {
        skeleton: backward_sample(&filter, kernel, rng),
        log_evidence: filter.log_norm(),
    })
}
