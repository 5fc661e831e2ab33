//! Forward simulation of the prior process and synthetic observations.
//!
//! Two independent simulators are provided: the direct method (exponential
//! holding times, jump chain) and the uniformized one (Poisson grid plus a
//! skeleton chain with self-transitions). They must agree in law.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{MjpError, Result};
use crate::ffbs::build_kernel;
use crate::model::{validate_distribution, Evidence, Grid, Observation, RateMatrix, Trajectory};
use crate::util::{poisson_points, sample_categorical};

/// Row-stochastic emission matrix: `prob(s, y)` is the probability of
/// observing symbol `y` while the hidden state is `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionModel {
    n_states: usize,
    n_symbols: usize,
    e: Vec<f64>,
}

impl EmissionModel {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.len();
        let n_symbols = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_symbols == 0 {
            return Err(MjpError::InvalidDistribution("empty emission matrix".into()));
        }
        let mut e = Vec::with_capacity(n_states * n_symbols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_symbols {
                return Err(MjpError::DimensionMismatch {
                    expected: n_symbols,
                    got: row.len(),
                });
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(MjpError::InvalidDistribution(format!(
                    "emission row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(MjpError::BadRowSum { row: i, sum });
            }
            e.extend_from_slice(row);
        }
        Ok(Self {
            n_states,
            n_symbols,
            e,
        })
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(&rows).expect("identity is stochastic")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn prob(&self, s: usize, y: usize) -> f64 {
        self.e[s * self.n_symbols + y]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.e.chunks(self.n_symbols).map(|r| r.to_vec()).collect()
    }

    /// Likelihood vector `s -> prob(s, y)` of one observed symbol.
    pub fn likelihood(&self, y: usize) -> Vec<f64> {
        (0..self.n_states).map(|s| self.prob(s, y)).collect()
    }
}

/// Direct (Gillespie) simulation of the prior process on `[t_min, t_max]`.
pub fn gillespie_simulate<R: Rng + ?Sized>(
    nu: &[f64],
    q: &RateMatrix,
    t_min: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    validate_distribution(nu, q.size())?;
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(MjpError::InvalidWindow { t_min, t_max });
    }
    let n = q.size();
    let s0 = sample_categorical(rng, nu, 1.0);
    let mut jumps = Vec::new();
    let mut s = s0;
    let mut t = t_min;
    let mut weights = vec![0.0; n];
    loop {
        let rate = q.leave(s);
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t >= t_max {
            break;
        }
        for (j, w) in weights.iter_mut().enumerate() {
            *w = if j == s { 0.0 } else { q.rate(s, j) };
        }
        s = sample_categorical(rng, &weights, rate);
        jumps.push((t, s));
    }
    Trajectory::new(t_min, t_max, s0, jumps)
}

/// Simulation through uniformization: a rate-`lambda` Poisson grid and a
/// skeleton chain with the uniformized kernel, collapsed to its true jumps.
pub fn uniformized_simulate<R: Rng + ?Sized>(
    nu: &[f64],
    q: &RateMatrix,
    lambda: f64,
    t_min: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    validate_distribution(nu, q.size())?;
    let kernel = build_kernel(q, lambda)?;
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(MjpError::InvalidWindow { t_min, t_max });
    }
    let mut times = Vec::new();
    poisson_points(rng, lambda, t_min, t_max, &mut times);
    // Coincident uniform draws have probability zero but would break the grid.
    times.dedup();
    let mut states = Vec::with_capacity(times.len() + 1);
    let mut s = sample_categorical(rng, nu, 1.0);
    states.push(s);
    for _ in 0..times.len() {
        s = sample_categorical(rng, kernel.row(s), 1.0);
        states.push(s);
    }
    Ok(Grid::new(t_min, t_max, times, states)?.collapse())
}

/// Evidence for observed `symbols` at `times` under `em`.
pub fn evidence_from_symbols(times: &[f64], symbols: &[usize], em: &EmissionModel) -> Result<Evidence> {
    if times.len() != symbols.len() {
        return Err(MjpError::DimensionMismatch {
            expected: times.len(),
            got: symbols.len(),
        });
    }
    let mut obs = Vec::with_capacity(times.len());
    for (&t, &y) in times.iter().zip(symbols) {
        if y >= em.n_symbols() {
            return Err(MjpError::StateOutOfRange {
                state: y,
                size: em.n_symbols(),
            });
        }
        obs.push(Observation::new(t, em.likelihood(y)));
    }
    Evidence::new(obs, em.n_states())
}

/// Draws one symbol per observation time from the emission row of the
/// hidden state `X(t)` and returns the induced evidence.
pub fn generate_observations<R: Rng + ?Sized>(
    x: &Trajectory,
    times: &[f64],
    em: &EmissionModel,
    rng: &mut R,
) -> Result<Evidence> {
    x.check_states(em.n_states())?;
    let mut symbols = Vec::with_capacity(times.len());
    for &t in times {
        let s = x.eval(t)?;
        let row: Vec<f64> = (0..em.n_symbols()).map(|y| em.prob(s, y)).collect();
        symbols.push(sample_categorical(rng, &row, 1.0));
    }
    let ev = evidence_from_symbols(times, symbols.as_slice(), em)?;
    ev.check_window(x.t_min(), x.t_max())?;
    Ok(ev)
}
