//! Exact posterior sampling for hidden Markov jump processes.
//!
//! The sampler alternates two Gibbs stages on the uniformized
//! representation of a trajectory: virtual jumps are redrawn as a
//! piecewise-homogeneous Poisson process with rate `λ - Q(X(t))`, then the
//! skeleton on the merged grid is redrawn by forward filtering and backward
//! sampling, and the virtual jumps are discarded again.
//!
//! Besides the sampler ([`raoteh`]) the crate ships independent exact
//! computations for small instances ([`oracle`]) and empirical convergence
//! diagnostics ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod ffbs;
pub mod model;
pub mod oracle;
pub mod raoteh;
pub mod simulate;
mod util;

pub use error::{MjpError, Result};
pub use model::{
    collapse_grid, trajectory_eval, uniform_distribution, validate_distribution,
    validate_rate_matrix, Evidence, Grid, InitStrategy, Observation, RateMatrix, SamplerConfig,
    StateSpace, Trajectory, UniformizedKernel,
};
pub use util::{rng_stream, ChainRng};
