use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MjpError {
    #[error("state space needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("rate matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("rate matrix entry ({row}, {col}) is not finite")]
    NonFiniteRate { row: usize, col: usize },
    #[error("negative off-diagonal rate {value} at ({row}, {col})")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("row {row} of the rate matrix sums to {sum}, expected 0")]
    BadRowSum { row: usize, sum: f64 },
    #[error("rate matrix is not irreducible: state {to} is unreachable from state {from}")]
    NotIrreducible { from: usize, to: usize },
    #[error("uniformization rate {lambda} must exceed q_max = {q_max}")]
    LambdaTooSmall { lambda: f64, q_max: f64 },
    #[error("state {state} is outside a state space of size {size}")]
    StateOutOfRange { state: usize, size: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("invalid time window [{t_min}, {t_max}]")]
    InvalidWindow { t_min: f64, t_max: f64 },
    #[error("invalid jump sequence: {0}")]
    InvalidJumps(String),
    #[error("time {t} lies outside the window [{t_min}, {t_max}]")]
    TimeOutOfWindow { t: f64, t_min: f64, t_max: f64 },
    #[error("invalid evidence at observation {index}: {reason}")]
    InvalidEvidence { index: usize, reason: String },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("evidence has zero probability under the model (first failing grid index {index})")]
    ImpossibleEvidence { index: usize },
    #[error("prior rejection initialization failed after {attempts} attempts")]
    InitFailed { attempts: usize },
    #[error("enumeration of {count} skeletons exceeds the cap of {cap}")]
    TooLarge { count: f64, cap: usize },
    #[error("rejection sampler made {attempts} attempts without acceptance")]
    RejectionStalled { attempts: u64 },
    #[error("conditioning event has zero probability")]
    ZeroProbabilityConditioning,
    #[error("seed trajectory with {n} jumps is inconsistent with the evidence")]
    SeedTrajectoryInfeasible { n: usize },
    #[error("trace of length {len} is too short after discarding {burn_in} burn-in sweeps")]
    TraceTooShort { len: usize, burn_in: usize },
}

pub type Result<T, E = MjpError> = std::result::Result<T, E>;
