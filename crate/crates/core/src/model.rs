//! Domain types for a hidden Markov jump process on a finite state space.
//!
//! A trajectory is stored in its minimal form: the initial state plus the
//! true jumps only. A [`Grid`] is the redundant uniformized form, where
//! consecutive skeleton states may coincide (virtual jumps).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{MjpError, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const STOCHASTIC_TOL: f64 = 1e-12;
const DISTRIBUTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    size: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(size: usize, labels: Option<Vec<String>>) -> Result<Self> {
        if size < 2 {
            return Err(MjpError::TooFewStates(size));
        }
        if let Some(l) = &labels {
            if l.len() != size {
                return Err(MjpError::DimensionMismatch {
                    expected: size,
                    got: l.len(),
                });
            }
        }
        Ok(Self { size, labels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, s: usize) -> String {
        match &self.labels {
            Some(l) => l[s].clone(),
            None => s.to_string(),
        }
    }

    pub fn check(&self, s: usize) -> Result<()> {
        if s < self.size {
            Ok(())
        } else {
            Err(MjpError::StateOutOfRange {
                state: s,
                size: self.size,
            })
        }
    }
}

/// Generator of a homogeneous Markov jump process, stored dense row-major
/// with an explicit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    q: Vec<f64>,
    leave: Vec<f64>,
    q_max: f64,
}

/// Validates a raw intensity matrix: square, at least two states,
/// nonnegative off-diagonal rates, zero row sums and a strongly connected
/// transition graph.
pub fn validate_rate_matrix(rows: &[Vec<f64>]) -> Result<RateMatrix> {
    let n = rows.len();
    if n < 2 {
        return Err(MjpError::TooFewStates(n));
    }
    let mut q = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(MjpError::NotSquare {
                row: i,
                len: row.len(),
                expected: n,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(MjpError::NonFiniteRate { row: i, col: j });
            }
            if i != j && v < 0.0 {
                return Err(MjpError::NegativeOffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        q.extend_from_slice(row);
    }

    let mut leave = vec![0.0; n];
    for i in 0..n {
        let row = &q[i * n..(i + 1) * n];
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum();
        let sum: f64 = row.iter().sum();
        let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if sum.abs() > ROW_SUM_TOL * scale {
            return Err(MjpError::BadRowSum { row: i, sum });
        }
        leave[i] = off;
    }

    let rm = RateMatrix {
        n,
        q,
        leave,
        q_max: 0.0,
    };
    rm.check_irreducible()?;
    let q_max = rm.leave.iter().cloned().fold(0.0, f64::max);
    Ok(RateMatrix { q_max, ..rm })
}

impl RateMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        validate_rate_matrix(rows)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[from * self.n + to]
    }

    /// Total intensity of leaving `s`.
    pub fn leave(&self, s: usize) -> f64 {
        self.leave[s]
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    fn reachable_from(&self, start: usize) -> Vec<Option<usize>> {
        // BFS tree: parent[s] for every state reachable from `start`.
        let mut parent = vec![None; self.n];
        parent[start] = Some(start);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for t in 0..self.n {
                if t != s && parent[t].is_none() && self.rate(s, t) > 0.0 {
                    parent[t] = Some(s);
                    queue.push_back(t);
                }
            }
        }
        parent
    }

    fn check_irreducible(&self) -> Result<()> {
        for from in 0..self.n {
            let parent = self.reachable_from(from);
            if let Some(to) = parent.iter().position(|p| p.is_none()) {
                return Err(MjpError::NotIrreducible { from, to });
            }
        }
        Ok(())
    }

    /// Shortest sequence of states `from = p_0, p_1, .., p_k = to` along
    /// positive-rate edges. Returns `[from]` when `from == to`.
    pub fn shortest_path(&self, from: usize, to: usize) -> Vec<usize> {
        let parent = self.reachable_from(from);
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur].expect("irreducible generator");
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// A closed walk `s, .., s` of length at least two through positive-rate
    /// edges, used to build trajectories with a prescribed jump count.
    pub fn cycle_through(&self, s: usize) -> Vec<usize> {
        let next = (0..self.n)
            .filter(|&t| t != s && self.rate(s, t) > 0.0)
            .max_by(|&a, &b| self.rate(s, a).total_cmp(&self.rate(s, b)).then(b.cmp(&a)))
            .expect("irreducible generator has an exit from every state");
        let mut cycle = vec![s];
        cycle.extend(self.shortest_path(next, s));
        cycle
    }
}

/// Checks that `nu` is a probability vector over `n` states.
pub fn validate_distribution(nu: &[f64], n: usize) -> Result<()> {
    if nu.len() != n {
        return Err(MjpError::DimensionMismatch {
            expected: n,
            got: nu.len(),
        });
    }
    if nu.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(MjpError::InvalidDistribution(
            "entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(MjpError::InvalidDistribution(format!(
            "entries sum to {total}"
        )));
    }
    Ok(())
}

pub fn uniform_distribution(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_window(t_min: f64, t_max: f64) -> Result<()> {
    if t_min.is_finite() && t_max.is_finite() && t_min < t_max {
        Ok(())
    } else {
        Err(MjpError::InvalidWindow { t_min, t_max })
    }
}

/// Right-continuous piecewise-constant path on `[t_min, t_max]`, kept as the
/// initial state and the true jumps only.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t_min: f64,
    t_max: f64,
    s0: usize,
    jumps: Vec<(f64, usize)>,
}

impl Trajectory {
    pub fn new(t_min: f64, t_max: f64, s0: usize, jumps: Vec<(f64, usize)>) -> Result<Self> {
        check_window(t_min, t_max)?;
        let mut prev_t = t_min;
        let mut prev_s = s0;
        for (i, &(t, s)) in jumps.iter().enumerate() {
            if !(t > prev_t && t < t_max) {
                return Err(MjpError::InvalidJumps(format!(
                    "jump {i} at time {t} is not strictly increasing inside ({t_min}, {t_max})"
                )));
            }
            if s == prev_s {
                return Err(MjpError::InvalidJumps(format!(
                    "jump {i} at time {t} does not change the state"
                )));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self {
            t_min,
            t_max,
            s0,
            jumps,
        })
    }

    pub fn constant(t_min: f64, t_max: f64, s: usize) -> Result<Self> {
        Self::new(t_min, t_max, s, Vec::new())
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn initial_state(&self) -> usize {
        self.s0
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    /// |J(X)|, the number of true jumps.
    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.s0, |&(_, s)| s)
    }

    pub fn check_states(&self, size: usize) -> Result<()> {
        std::iter::once(self.s0)
            .chain(self.jumps.iter().map(|&(_, s)| s))
            .find(|&s| s >= size)
            .map_or(Ok(()), |state| Err(MjpError::StateOutOfRange { state, size }))
    }

    /// X(t); at a jump time the new state is returned.
    pub fn eval(&self, t: f64) -> Result<usize> {
        if !(t >= self.t_min && t <= self.t_max) {
            return Err(MjpError::TimeOutOfWindow {
                t,
                t_min: self.t_min,
                t_max: self.t_max,
            });
        }
        Ok(self.state_at(t))
    }

    pub(crate) fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|&(tj, _)| tj <= t);
        if k == 0 {
            self.s0
        } else {
            self.jumps[k - 1].1
        }
    }

    /// Constant pieces `(start, end, state)` covering the window in order.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let starts = std::iter::once((self.t_min, self.s0)).chain(self.jumps.iter().copied());
        let ends = self
            .jumps
            .iter()
            .map(|&(t, _)| t)
            .chain(std::iter::once(self.t_max));
        starts.zip(ends).map(|((a, s), b)| (a, b, s))
    }
}

pub fn trajectory_eval(x: &Trajectory, t: f64) -> Result<usize> {
    x.eval(t)
}

/// Redundant uniformized representation `(T, S)`: grid times
/// `T_1 < .. < T_N` and skeleton `S_0, .., S_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t_min: f64,
    t_max: f64,
    times: Vec<f64>,
    states: Vec<usize>,
}

impl Grid {
    pub fn new(t_min: f64, t_max: f64, times: Vec<f64>, states: Vec<usize>) -> Result<Self> {
        check_window(t_min, t_max)?;
        if states.len() != times.len() + 1 {
            return Err(MjpError::DimensionMismatch {
                expected: times.len() + 1,
                got: states.len(),
            });
        }
        let mut prev = t_min;
        for (i, &t) in times.iter().enumerate() {
            if !(t > prev && t < t_max) {
                return Err(MjpError::InvalidJumps(format!(
                    "grid time {i} = {t} is not strictly increasing inside ({t_min}, {t_max})"
                )));
            }
            prev = t;
        }
        Ok(Self {
            t_min,
            t_max,
            times,
            states,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Indices `i` in `1..=N` where the skeleton changes state.
    pub fn true_jumps(&self) -> Vec<usize> {
        (1..self.states.len())
            .filter(|&i| self.states[i - 1] != self.states[i])
            .collect()
    }

    pub fn eval(&self, t: f64) -> usize {
        self.states[self.times.partition_point(|&ti| ti <= t)]
    }

    pub fn collapse(&self) -> Trajectory {
        let jumps = self
            .true_jumps()
            .into_iter()
            .map(|i| (self.times[i - 1], self.states[i]))
            .collect();
        Trajectory {
            t_min: self.t_min,
            t_max: self.t_max,
            s0: self.states[0],
            jumps,
        }
    }
}

/// Discards virtual jumps, keeping exactly the indices where the state changes.
pub fn collapse_grid(g: &Grid) -> Trajectory {
    g.collapse()
}

/// One noisy observation: time, likelihood vector `L_j(s)` and an upper
/// bound `lik_max >= max_s L_j(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub lik: Vec<f64>,
    pub lik_max: f64,
}

impl Observation {
    /// Observation with the tightest bound, `lik_max = max_s lik[s]`.
    pub fn new(t: f64, lik: Vec<f64>) -> Self {
        let lik_max = lik.iter().cloned().fold(0.0, f64::max);
        Self { t, lik, lik_max }
    }

    pub fn with_bound(t: f64, lik: Vec<f64>, lik_max: f64) -> Self {
        Self { t, lik, lik_max }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evidence {
    observations: Vec<Observation>,
}

impl Evidence {
    pub fn new(observations: Vec<Observation>, n_states: usize) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for (index, o) in observations.iter().enumerate() {
            let bad = |reason: String| MjpError::InvalidEvidence { index, reason };
            if !o.t.is_finite() {
                return Err(bad(format!("time {} is not finite", o.t)));
            }
            if o.t < prev {
                return Err(bad(format!("time {} precedes the previous observation", o.t)));
            }
            prev = o.t;
            if o.lik.len() != n_states {
                return Err(bad(format!(
                    "likelihood vector has {} entries, expected {n_states}",
                    o.lik.len()
                )));
            }
            if o.lik.iter().any(|&l| !l.is_finite() || l < 0.0) {
                return Err(bad("likelihood entries must be finite and nonnegative".into()));
            }
            let max = o.lik.iter().cloned().fold(0.0, f64::max);
            if max <= 0.0 {
                return Err(bad("likelihood vector has no positive entry".into()));
            }
            if !(o.lik_max.is_finite() && o.lik_max >= max) {
                return Err(bad(format!(
                    "lik_max {} is below the largest likelihood {max}",
                    o.lik_max
                )));
            }
        }
        Ok(Self { observations })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn check_window(&self, t_min: f64, t_max: f64) -> Result<()> {
        for (index, o) in self.observations.iter().enumerate() {
            if o.t < t_min || o.t > t_max {
                return Err(MjpError::InvalidEvidence {
                    index,
                    reason: format!("time {} outside the window [{t_min}, {t_max}]", o.t),
                });
            }
        }
        Ok(())
    }

    /// L(Y | X) as a product over observations.
    pub fn likelihood(&self, x: &Trajectory) -> f64 {
        self.observations
            .iter()
            .map(|o| o.lik[x.state_at(o.t)])
            .product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    #[default]
    PriorRejection,
    MaxLikelihoodPath,
}

impl FromStr for InitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prior-rejection" => Ok(Self::PriorRejection),
            "ml-path" | "max-likelihood-path" => Ok(Self::MaxLikelihoodPath),
            other => Err(format!(
                "unknown init strategy {other:?} (expected prior-rejection or ml-path)"
            )),
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PriorRejection => "prior-rejection",
            Self::MaxLikelihoodPath => "ml-path",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// λ = lambda_factor · q_max; must be strictly greater than 1.
    pub lambda_factor: f64,
    /// Sweeps recorded after burn-in.
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lambda_factor: 2.0,
            n_sweeps: 1000,
            burn_in: 0,
            seed: 0,
            init_strategy: InitStrategy::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_factor.is_finite() && self.lambda_factor > 1.0) {
            return Err(MjpError::InvalidConfig(format!(
                "lambda_factor must be > 1, got {}",
                self.lambda_factor
            )));
        }
        if self.n_sweeps == 0 {
            return Err(MjpError::InvalidConfig("n_sweeps must be positive".into()));
        }
        Ok(())
    }

    pub fn lambda(&self, q: &RateMatrix) -> f64 {
        self.lambda_factor * q.q_max()
    }
}

/// Row-stochastic skeleton kernel of the uniformized chain.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformizedKernel {
    pub(crate) n: usize,
    pub(crate) p: Vec<f64>,
    pub(crate) lambda: f64,
}

impl UniformizedKernel {
    /// Wraps an arbitrary row-stochastic matrix. `lambda` is carried along
    /// for bookkeeping only.
    pub fn from_stochastic(rows: &[Vec<f64>], lambda: f64) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(MjpError::TooFewStates(n));
        }
        let mut p = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MjpError::NotSquare {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(MjpError::InvalidDistribution(format!(
                    "kernel row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL * n as f64 {
                return Err(MjpError::BadRowSum { row: i, sum });
            }
            p.extend_from_slice(row);
        }
        Ok(Self { n, p, lambda })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[from * self.n + to]
    }

    #[inline]
    pub fn row(&self, from: usize) -> &[f64] {
        &self.p[from * self.n..(from + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.p.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.n).map(|s| self.prob(s, s)).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym2() -> RateMatrix {
        RateMatrix::new(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    #[test]
    fn validate_symmetric_two_state() {
        let q = sym2();
        assert_eq!(q.q_max(), 1.0);
        assert_eq!(q.leave(0), 1.0);
        assert_eq!(q.size(), 2);
    }

    #[test]
    fn validate_rejects_absorbing_state() {
        let err = RateMatrix::new(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, MjpError::NotIrreducible { from: 1, to: 0 }));
    }

    #[test]
    fn validate_rejects_bad_row_sum() {
        let err = RateMatrix::new(&[vec![-1.0, 0.5], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, MjpError::BadRowSum { row: 0, .. }));
    }

    #[test]
    fn validate_rejects_negative_rate_and_small_spaces() {
        let err = RateMatrix::new(&[vec![1.0, -1.0], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, MjpError::NegativeOffDiagonal { row: 0, col: 1, .. }));
        assert!(matches!(
            RateMatrix::new(&[vec![0.0]]),
            Err(MjpError::TooFewStates(1))
        ));
        assert!(matches!(
            RateMatrix::new(&[vec![-1.0, 1.0], vec![1.0]]),
            Err(MjpError::NotSquare { row: 1, .. })
        ));
    }

    #[test]
    fn eval_is_right_continuous() {
        let x = Trajectory::new(0.0, 2.0, 0, vec![(1.0, 1)]).unwrap();
        assert_eq!(x.eval(0.5).unwrap(), 0);
        assert_eq!(x.eval(1.0).unwrap(), 1);
        assert_eq!(x.eval(2.0).unwrap(), 1);
        assert_eq!(x.eval(0.0).unwrap(), 0);
        assert!(matches!(x.eval(2.5), Err(MjpError::TimeOutOfWindow { .. })));
    }

    #[test]
    fn trajectory_invariants() {
        assert!(Trajectory::new(1.0, 1.0, 0, vec![]).is_err());
        assert!(Trajectory::new(0.0, 1.0, 0, vec![(0.0, 1)]).is_err());
        assert!(Trajectory::new(0.0, 1.0, 0, vec![(1.0, 1)]).is_err());
        assert!(Trajectory::new(0.0, 1.0, 0, vec![(0.5, 0)]).is_err());
        assert!(Trajectory::new(0.0, 1.0, 0, vec![(0.5, 1), (0.4, 0)]).is_err());
        let x = Trajectory::new(0.0, 1.0, 0, vec![(0.5, 1), (0.7, 0)]).unwrap();
        let segs: Vec<_> = x.segments().collect();
        assert_eq!(segs, vec![(0.0, 0.5, 0), (0.5, 0.7, 1), (0.7, 1.0, 0)]);
        assert!(x.check_states(2).is_ok());
        assert!(x.check_states(1).is_err());
    }

    #[test]
    fn collapse_examples() {
        let g = Grid::new(0.0, 4.0, vec![1.0, 2.0], vec![0, 0, 1]).unwrap();
        assert_eq!(
            collapse_grid(&g),
            Trajectory::new(0.0, 4.0, 0, vec![(2.0, 1)]).unwrap()
        );
        let g = Grid::new(0.0, 4.0, vec![1.0], vec![0, 0]).unwrap();
        assert_eq!(collapse_grid(&g).n_jumps(), 0);
        let g = Grid::new(0.0, 4.0, vec![1.0, 2.0, 3.0], vec![0, 1, 1, 0]).unwrap();
        assert_eq!(collapse_grid(&g).jumps(), &[(1.0, 1), (3.0, 0)]);
    }

    #[test]
    fn evidence_validation() {
        let ok = Evidence::new(vec![Observation::new(1.0, vec![0.2, 0.0])], 2).unwrap();
        assert_eq!(ok.observations()[0].lik_max, 0.2);
        assert!(Evidence::new(vec![Observation::new(1.0, vec![0.0, 0.0])], 2).is_err());
        assert!(Evidence::new(vec![Observation::new(1.0, vec![0.5])], 2).is_err());
        assert!(Evidence::new(
            vec![Observation::with_bound(1.0, vec![0.5, 0.2], 0.4)],
            2
        )
        .is_err());
        assert!(Evidence::new(
            vec![
                Observation::new(2.0, vec![1.0, 1.0]),
                Observation::new(1.0, vec![1.0, 1.0])
            ],
            2
        )
        .is_err());
        assert!(ok.check_window(0.0, 0.5).is_err());
    }

    #[test]
    fn config_requires_lambda_factor_above_one() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.lambda_factor = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn paths_and_cycles() {
        let q = RateMatrix::new(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
        ])
        .unwrap();
        assert_eq!(q.shortest_path(0, 2), vec![0, 1, 2]);
        assert_eq!(q.shortest_path(1, 1), vec![1]);
        assert_eq!(q.cycle_through(0), vec![0, 1, 2, 0]);
        assert_eq!(sym2().cycle_through(1), vec![1, 0, 1]);
    }

    fn arb_grid() -> impl Strategy<Value = Grid> {
        (1usize..30)
            .prop_flat_map(|n| {
                (
                    proptest::collection::btree_set(1u32..9_999, n),
                    proptest::collection::vec(0usize..3, n + 1),
                )
            })
            .prop_map(|(times, states)| {
                let times: Vec<f64> = times.into_iter().map(|t| t as f64 / 1000.0).collect();
                let states = states[..times.len() + 1].to_vec();
                Grid::new(0.0, 10.0, times, states).unwrap()
            })
    }

    proptest! {
        #[test]
        fn collapse_preserves_path(g in arb_grid(), probes in proptest::collection::vec(0.0f64..=10.0, 1000)) {
            let x = collapse_grid(&g);
            prop_assert!(x.n_jumps() <= g.times().len());
            prop_assert_eq!(x.n_jumps(), g.true_jumps().len());
            for t in probes {
                prop_assert_eq!(x.eval(t).unwrap(), g.eval(t));
            }
            for &t in g.times() {
                prop_assert_eq!(x.eval(t).unwrap(), g.eval(t));
            }
        }
    }
}
