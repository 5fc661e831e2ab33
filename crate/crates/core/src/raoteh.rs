//! The uniformization Gibbs kernel and the sweep loop.
//!
//! One sweep maps a trajectory `X` to `X'`:
//!
//! 1. draw virtual jump times `V` from a Poisson process with piecewise
//!    constant rate `λ - Q(X(t))`;
//! 2. merge them with the true jump times of `X` into a grid `T'`;
//! 3. draw a fresh skeleton on `T'` from `p(S' | T', Y)` by FFBS;
//! 4. drop the indices where the skeleton does not change state.

use rand::Rng;

use crate::error::{MjpError, Result};
use crate::ffbs::{build_kernel, sample_skeleton};
use crate::model::{
    validate_distribution, Evidence, Grid, InitStrategy, RateMatrix, SamplerConfig, Trajectory,
    UniformizedKernel,
};
use crate::simulate::gillespie_simulate;
use crate::util::poisson_points;

/// Attempts made by the prior-rejection initializer before giving up.
pub const PRIOR_REJECTION_CAP: usize = 10_000;

/// Virtual jump times for one sweep, sorted. On each constant piece of `x`
/// in state `s` they form a homogeneous Poisson process of rate
/// `lambda - Q(s)`.
pub fn sample_virtual_jumps<R: Rng + ?Sized>(
    x: &Trajectory,
    q: &RateMatrix,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(lambda.is_finite() && lambda > q.q_max()) {
        return Err(MjpError::LambdaTooSmall {
            lambda,
            q_max: q.q_max(),
        });
    }
    x.check_states(q.size())?;
    let mut v = Vec::new();
    for (a, b, s) in x.segments() {
        poisson_points(rng, lambda - q.leave(s), a, b, &mut v);
    }
    v.dedup();
    Ok(v)
}

/// Merges the true jump times with the (disjoint, sorted) virtual times.
fn merge_times(jumps: &[(f64, usize)], virtual_times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(jumps.len() + virtual_times.len());
    let (mut i, mut k) = (0, 0);
    while i < jumps.len() || k < virtual_times.len() {
        let take_jump = match (jumps.get(i), virtual_times.get(k)) {
            (Some(&(tj, _)), Some(&tv)) => tj <= tv,
            (Some(_), None) => true,
            _ => false,
        };
        let t = if take_jump {
            i += 1;
            jumps[i - 1].0
        } else {
            k += 1;
            virtual_times[k - 1]
        };
        // ties are measure-zero; the true-jump time is kept
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

/// Result of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub trajectory: Trajectory,
    /// `log p(Y | T')` on the refreshed grid.
    pub log_evidence: f64,
    /// `|T'|`, the number of potential jump times on the refreshed grid.
    pub grid_len: usize,
}

/// The Gibbs kernel for a fixed model and evidence.
#[derive(Debug, Clone)]
pub struct RaoTeh {
    nu: Vec<f64>,
    q: RateMatrix,
    evidence: Evidence,
    kernel: UniformizedKernel,
}

impl RaoTeh {
    pub fn new(nu: &[f64], q: &RateMatrix, evidence: &Evidence, lambda: f64) -> Result<Self> {
        validate_distribution(nu, q.size())?;
        let kernel = build_kernel(q, lambda)?;
        if let Some(index) = evidence
            .observations()
            .iter()
            .position(|o| o.lik.len() != q.size())
        {
            return Err(MjpError::InvalidEvidence {
                index,
                reason: "likelihood length differs from the state count".into(),
            });
        }
        Ok(Self {
            nu: nu.to_vec(),
            q: q.clone(),
            evidence: evidence.clone(),
            kernel,
        })
    }

    pub fn from_config(nu: &[f64], q: &RateMatrix, evidence: &Evidence, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(nu, q, evidence, cfg.lambda(q))
    }

    pub fn lambda(&self) -> f64 {
        self.kernel.lambda()
    }

    pub fn kernel(&self) -> &UniformizedKernel {
        &self.kernel
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &Trajectory, rng: &mut R) -> Result<StepOutcome> {
        let v = sample_virtual_jumps(x, &self.q, self.lambda(), rng)?;
        let times = merge_times(x.jumps(), &v);
        let draw = sample_skeleton(&self.kernel, &self.nu, &times, &self.evidence, rng)?;
        let grid_len = times.len();
        let grid = Grid::new(x.t_min(), x.t_max(), times, draw.skeleton)?;
        Ok(StepOutcome {
            trajectory: grid.collapse(),
            log_evidence: draw.log_evidence,
            grid_len,
        })
    }
}

/// A single sweep from `x`, building the kernel on the fly.
pub fn rao_teh_step<R: Rng + ?Sized>(
    x: &Trajectory,
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    Ok(RaoTeh::from_config(nu, q, ev, cfg)?.step(x, rng)?.trajectory)
}

/// Starting trajectory with positive likelihood.
pub fn initial_trajectory<R: Rng + ?Sized>(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    strategy: InitStrategy,
    t_min: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    validate_distribution(nu, q.size())?;
    ev.check_window(t_min, t_max)?;
    match strategy {
        InitStrategy::PriorRejection => {
            for _ in 0..PRIOR_REJECTION_CAP {
                let x = gillespie_simulate(nu, q, t_min, t_max, rng)?;
                if ev.likelihood(&x) > 0.0 {
                    return Ok(x);
                }
            }
            Err(MjpError::InitFailed {
                attempts: PRIOR_REJECTION_CAP,
            })
        }
        InitStrategy::MaxLikelihoodPath => max_likelihood_path(nu, q, ev, t_min, t_max),
    }
}

fn argmax(v: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.enumerate() {
        if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

/// Visits the most likely state at each observation time, moving between
/// consecutive targets along shortest positive-rate paths whose jumps are
/// spread evenly over the gap.
fn max_likelihood_path(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    t_min: f64,
    t_max: f64,
) -> Result<Trajectory> {
    // group coincident observations, multiplying their likelihoods
    let mut groups: Vec<(f64, Vec<f64>, usize)> = Vec::new();
    for (j, o) in ev.observations().iter().enumerate() {
        match groups.last_mut() {
            Some((t, lik, _)) if *t == o.t => lik.iter_mut().zip(&o.lik).for_each(|(a, b)| *a *= b),
            _ => groups.push((o.t, o.lik.clone(), j)),
        }
    }

    let mut targets = Vec::with_capacity(groups.len());
    for (t, lik, j) in &groups {
        let weights: Box<dyn Iterator<Item = f64>> = if *t == t_min {
            Box::new(lik.iter().zip(nu).map(|(l, p)| l * p))
        } else {
            Box::new(lik.iter().copied())
        };
        let s = argmax(weights).ok_or(MjpError::ImpossibleEvidence { index: *j })?;
        targets.push((*t, s));
    }

    let s0 = match targets.first() {
        Some(&(_, s)) if nu[s] > 0.0 => s,
        _ => argmax(nu.iter().copied()).expect("distribution has positive mass"),
    };
    let mut jumps = Vec::new();
    let (mut cur_t, mut cur_s) = (t_min, s0);
    for (t, s) in targets {
        if s != cur_s {
            let path = q.shortest_path(cur_s, s);
            let k = path.len() - 1;
            for (i, &state) in path.iter().enumerate().skip(1) {
                jumps.push((cur_t + (t - cur_t) * i as f64 / (k + 1) as f64, state));
            }
        }
        cur_t = t;
        cur_s = s;
    }
    Trajectory::new(t_min, t_max, s0, jumps)
}

/// Trajectory with exactly `n` equispaced true jumps that repeatedly runs
/// through a fixed cycle of the transition graph starting at `start`.
pub fn cycle_trajectory(q: &RateMatrix, n: usize, start: usize, t_min: f64, t_max: f64) -> Result<Trajectory> {
    if start >= q.size() {
        return Err(MjpError::StateOutOfRange {
            state: start,
            size: q.size(),
        });
    }
    let cycle = q.cycle_through(start);
    let period = cycle.len() - 1;
    let dt = (t_max - t_min) / (n + 1) as f64;
    let jumps = (1..=n)
        .map(|i| (t_min + dt * i as f64, cycle[i % period]))
        .collect();
    Trajectory::new(t_min, t_max, start, jumps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Trajectory,
    pub sweep_index: usize,
    pub n_jumps: usize,
    pub log_evidence: f64,
}

/// What the sweep loop records besides jump counts and evidence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainHooks {
    /// `X_m(t)` is recorded at each probe time after every sweep.
    pub probes: Vec<f64>,
    pub store_trajectories: bool,
}

impl ChainHooks {
    pub fn probes(probes: &[f64]) -> Self {
        Self {
            probes: probes.to_vec(),
            store_trajectories: false,
        }
    }
}

/// Full record of a run, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub n_states: usize,
    pub burn_in: usize,
    pub probe_times: Vec<f64>,
    pub n_jumps: Vec<usize>,
    pub log_evidence: Vec<f64>,
    /// `probe_states[m][k]` is `X_{m+1}(probe_times[k])`.
    pub probe_states: Vec<Vec<usize>>,
    pub trajectories: Option<Vec<Trajectory>>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.n_jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_jumps.is_empty()
    }

    /// Empirical law of `X(probe_times[probe])` over the post-burn-in sweeps.
    pub fn probe_frequencies(&self, probe: usize) -> Vec<f64> {
        let kept = &self.probe_states[self.burn_in.min(self.len())..];
        let mut counts = vec![0.0; self.n_states];
        for row in kept {
            counts[row[probe]] += 1.0;
        }
        let total = kept.len().max(1) as f64;
        counts.iter().map(|c| c / total).collect()
    }
}

/// Runs `cfg.burn_in + cfg.n_sweeps` sweeps from an initial trajectory
/// chosen by `cfg.init_strategy`.
#[allow(clippy::too_many_arguments)]
pub fn run_chain<R: Rng + ?Sized>(
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    cfg: &SamplerConfig,
    t_min: f64,
    t_max: f64,
    rng: &mut R,
    hooks: &ChainHooks,
) -> Result<ChainTrace> {
    cfg.validate()?;
    let x0 = initial_trajectory(nu, q, ev, cfg.init_strategy, t_min, t_max, rng)?;
    run_chain_from(x0, nu, q, ev, cfg, rng, hooks)
}

pub fn run_chain_from<R: Rng + ?Sized>(
    x0: Trajectory,
    nu: &[f64],
    q: &RateMatrix,
    ev: &Evidence,
    cfg: &SamplerConfig,
    rng: &mut R,
    hooks: &ChainHooks,
) -> Result<ChainTrace> {
    let sampler = RaoTeh::from_config(nu, q, ev, cfg)?;
    ev.check_window(x0.t_min(), x0.t_max())?;
    for &t in &hooks.probes {
        x0.eval(t)?;
    }
    let total = cfg.burn_in + cfg.n_sweeps;
    let mut trace = ChainTrace {
        n_states: q.size(),
        burn_in: cfg.burn_in,
        probe_times: hooks.probes.clone(),
        n_jumps: Vec::with_capacity(total),
        log_evidence: Vec::with_capacity(total),
        probe_states: Vec::with_capacity(total),
        trajectories: hooks.store_trajectories.then(Vec::new),
    };
    let mut state = ChainState {
        n_jumps: x0.n_jumps(),
        x: x0,
        sweep_index: 0,
        log_evidence: f64::NAN,
    };
    for _ in 0..total {
        let out = sampler.step(&state.x, rng)?;
        state = ChainState {
            n_jumps: out.trajectory.n_jumps(),
            x: out.trajectory,
            sweep_index: state.sweep_index + 1,
            log_evidence: out.log_evidence,
        };
        trace.n_jumps.push(state.n_jumps);
        trace.log_evidence.push(state.log_evidence);
        trace
            .probe_states
            .push(hooks.probes.iter().map(|&t| state.x.state_at(t)).collect());
        if let Some(store) = trace.trajectories.as_mut() {
            store.push(state.x.clone());
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;
    use crate::oracle::transition_probability;
    use crate::util::rng_stream;

    fn sym2() -> RateMatrix {
        RateMatrix::new(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    fn q3() -> RateMatrix {
        RateMatrix::new(&[
            vec![-1.0, 0.6, 0.4],
            vec![0.5, -1.2, 0.7],
            vec![0.3, 0.9, -1.2],
        ])
        .unwrap()
    }

    #[test]
    fn virtual_jump_mean_on_constant_path() {
        let q = RateMatrix::new(&[vec![-1.0, 1.0], vec![3.0, -3.0]]).unwrap();
        let x = Trajectory::constant(0.0, 2.0, 0).unwrap();
        let lambda = 4.0;
        let mut rng = rng_stream(31, 0);
        let reps = 100_000;
        let total: usize = (0..reps)
            .map(|_| sample_virtual_jumps(&x, &q, lambda, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / reps as f64;
        let expected = (lambda - 1.0) * 2.0;
        assert!((mean - expected).abs() < 0.01 * expected, "{mean}");
        assert!(mean <= lambda * 2.0);
        assert!(matches!(
            sample_virtual_jumps(&x, &q, 3.0, &mut rng),
            Err(MjpError::LambdaTooSmall { .. })
        ));
    }

    #[test]
    fn virtual_jumps_avoid_true_jumps() {
        let q = sym2();
        let x = Trajectory::new(0.0, 1.0, 0, vec![(0.25, 1), (0.5, 0)]).unwrap();
        let mut rng = rng_stream(32, 0);
        for _ in 0..500 {
            let v = sample_virtual_jumps(&x, &q, 50.0, &mut rng).unwrap();
            let merged = merge_times(x.jumps(), &v);
            assert_eq!(merged.len(), v.len() + 2);
            assert!(merged.windows(2).all(|w| w[0] < w[1]));
            assert!(merged.contains(&0.25) && merged.contains(&0.5));
        }
    }

    #[test]
    fn merge_keeps_single_copy_of_ties() {
        assert_eq!(merge_times(&[(1.0, 1)], &[0.5, 1.0, 2.0]), vec![0.5, 1.0, 2.0]);
        assert_eq!(merge_times(&[], &[]), Vec::<f64>::new());
    }

    #[test]
    fn prior_is_invariant_without_evidence() {
        let q = q3();
        let nu = [1.0, 0.0, 0.0];
        let cfg = SamplerConfig {
            n_sweeps: 1000,
            ..Default::default()
        };
        let sampler = RaoTeh::from_config(&nu, &q, &Evidence::empty(), &cfg).unwrap();
        let reps = 20_000;
        let mut counts = [0.0; 3];
        for r in 0..reps {
            let mut rng = rng_stream(33, r);
            // start far from the prior: a busy path ending in state 2
            let mut x = cycle_trajectory(&q, 30, 0, 0.0, 2.0).unwrap();
            for _ in 0..20 {
                x = sampler.step(&x, &mut rng).unwrap().trajectory;
            }
            counts[x.final_state()] += 1.0;
        }
        let exact = transition_probability(&q, 2.0);
        for s in 0..3 {
            let f = counts[s] / reps as f64;
            assert!((f - exact[0][s]).abs() < 0.02, "state {s}: {f} vs {}", exact[0][s]);
        }
    }

    #[test]
    fn hard_evidence_is_respected() {
        let q = sym2();
        let ev = Evidence::new(
            vec![
                Observation::new(0.5, vec![1.0, 0.0]),
                Observation::new(1.0, vec![0.0, 1.0]),
                Observation::new(1.7, vec![1.0, 0.0]),
            ],
            2,
        )
        .unwrap();
        let cfg = SamplerConfig {
            n_sweeps: 300,
            init_strategy: InitStrategy::MaxLikelihoodPath,
            ..Default::default()
        };
        let mut rng = rng_stream(34, 0);
        let trace = run_chain(
            &[0.5, 0.5],
            &q,
            &ev,
            &cfg,
            0.0,
            2.0,
            &mut rng,
            &ChainHooks {
                probes: vec![0.5, 1.0, 1.7],
                store_trajectories: true,
            },
        )
        .unwrap();
        for row in &trace.probe_states {
            assert_eq!(row, &vec![0, 1, 0]);
        }
        for x in trace.trajectories.unwrap() {
            assert!(ev.likelihood(&x) > 0.0);
        }
    }

    #[test]
    fn drift_contracts_large_jump_counts() {
        let q = sym2();
        let sampler = RaoTeh::new(&[0.5, 0.5], &q, &Evidence::empty(), 2.0).unwrap();
        let x = cycle_trajectory(&q, 200, 0, 0.0, 1.0).unwrap();
        assert_eq!(x.n_jumps(), 200);
        let reps = 10_000;
        let mut rng = rng_stream(35, 0);
        let total: usize = (0..reps)
            .map(|_| sampler.step(&x, &mut rng).unwrap().trajectory.n_jumps())
            .sum();
        assert!((total as f64 / reps as f64) < 200.0);
    }

    #[test]
    fn ml_path_hits_observed_states() {
        let q = RateMatrix::new(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
        ])
        .unwrap();
        let obs = [(0.0, 1), (1.0, 0), (2.0, 2), (2.0, 2), (3.0, 1)];
        let ev = Evidence::new(
            obs.iter()
                .map(|&(t, s)| {
                    let mut lik = vec![0.0; 3];
                    lik[s] = 1.0;
                    Observation::new(t, lik)
                })
                .collect(),
            3,
        )
        .unwrap();
        let mut rng = rng_stream(36, 0);
        let x = initial_trajectory(&[1.0 / 3.0; 3], &q, &ev, InitStrategy::MaxLikelihoodPath, 0.0, 4.0, &mut rng)
            .unwrap();
        for &(t, s) in &obs {
            assert_eq!(x.eval(t).unwrap(), s);
        }
        // 1 -> 2 -> 0 then 0 -> 1 -> 2, then 2 -> 0 -> 1
        assert_eq!(x.n_jumps(), 6);
        for w in x.jumps().windows(2) {
            assert!(q.rate(w[0].1, w[1].1) > 0.0);
        }
    }

    #[test]
    fn rare_evidence_defeats_prior_rejection_only() {
        // state 2 is entered at rate 1e-4 and left at rate 50
        let q = RateMatrix::new(&[
            vec![-1.0001, 1.0, 0.0001],
            vec![1.0, -1.0001, 0.0001],
            vec![25.0, 25.0, -50.0],
        ])
        .unwrap();
        let nu = [0.5, 0.5, 0.0];
        let ev = Evidence::new(
            vec![
                Observation::new(1.0, vec![0.0, 0.0, 1.0]),
                Observation::new(1.01, vec![0.0, 0.0, 1.0]),
            ],
            3,
        )
        .unwrap();
        let mut rng = rng_stream(37, 0);
        assert_eq!(
            initial_trajectory(&nu, &q, &ev, InitStrategy::PriorRejection, 0.0, 2.0, &mut rng),
            Err(MjpError::InitFailed {
                attempts: PRIOR_REJECTION_CAP
            })
        );
        let x = initial_trajectory(&nu, &q, &ev, InitStrategy::MaxLikelihoodPath, 0.0, 2.0, &mut rng).unwrap();
        assert!(ev.likelihood(&x) > 0.0);
        assert_ne!(x.initial_state(), 2);
    }

    #[test]
    fn uniform_evidence_accepts_first_prior_draw() {
        let q = sym2();
        let ev = Evidence::new(vec![Observation::new(0.3, vec![0.5, 0.5])], 2).unwrap();
        let mut a = rng_stream(38, 0);
        let mut b = rng_stream(38, 0);
        let x = initial_trajectory(&[0.5, 0.5], &q, &ev, InitStrategy::PriorRejection, 0.0, 1.0, &mut a).unwrap();
        let first = gillespie_simulate(&[0.5, 0.5], &q, 0.0, 1.0, &mut b).unwrap();
        assert_eq!(x, first);
    }

    #[test]
    fn traces_are_seed_deterministic() {
        let q = q3();
        let ev = Evidence::new(vec![Observation::new(1.0, vec![0.1, 0.2, 0.7])], 3).unwrap();
        let cfg = SamplerConfig {
            n_sweeps: 200,
            burn_in: 10,
            ..Default::default()
        };
        let hooks = ChainHooks::probes(&[0.5, 1.5]);
        let run = |seed| {
            let mut rng = rng_stream(seed, 0);
            run_chain(&[0.2, 0.3, 0.5], &q, &ev, &cfg, 0.0, 2.0, &mut rng, &hooks).unwrap()
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_ne!(a, run(2));
        assert_eq!(a.len(), 210);
        let f = a.probe_frequencies(0);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_trajectory_shape() {
        let q = q3();
        for n in [0, 1, 7, 50] {
            let x = cycle_trajectory(&q, n, 0, 0.0, 1.0).unwrap();
            assert_eq!(x.n_jumps(), n);
            assert_eq!(x.initial_state(), 0);
        }
        assert!(cycle_trajectory(&q, 3, 5, 0.0, 1.0).is_err());
    }
}
