use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("worker count must be at least 1")]
    NoWorkers,

    #[error(
        "fixed computation model requires every tau_i > 0, but worker {worker} has tau = {tau}"
    )]
    NonPositiveTau { worker: usize, tau: f64 },

    #[error("uniform delay bounds need 0 < lo < hi, got lo = {lo}, hi = {hi}")]
    BadUniformBounds { lo: f64, hi: f64 },

    #[error("mixture delay model needs at least one peak")]
    NoPeaks,

    #[error("mixture stddev must be finite and non-negative, got {0}")]
    BadStddev(f64),

    #[error("interval end {t2} precedes its start {t1}")]
    ReversedInterval { t1: f64, t2: f64 },

    #[error("invalid rate function: {0}")]
    BadRate(String),

    #[error("delay profile is empty")]
    EmptyProfile,

    #[error("batch size must be at least 1")]
    ZeroBatch,

    #[error("collection cannot start at {start}, simulated clock is already at {now}")]
    TimeReversal { start: f64, now: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("minibatch holds {got} gradient(s) but the optimizer expects {expected}")]
    CountMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("exact MVR step needs the old-point minibatch mean")]
    MissingOldPoint,

    #[error("inexact MVR step needs a cached gradient from the previous round")]
    MissingCachedGradient,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error(
        "low-noise regime: sigma^2 = {sigma_sq} <= eps = {eps}; set p = 1 and run minibatch SGD"
    )]
    LowNoise { sigma_sq: f64, eps: f64 },

    #[error("already stationary: 2 * L_bar * Delta = {bound} <= eps = {eps}; x0 is an eps-stationary point")]
    AlreadyStationary { bound: f64, eps: f64 },

    #[error("target accuracy eps must be positive and finite, got {0}")]
    BadEps(f64),

    #[error("time budget must be non-negative, got {0}")]
    BadBudget(f64),

    #[error("rate functions cannot complete {target} gradient(s): all rates vanish first")]
    Unreachable { target: u64 },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("probability p must lie in (0, 1], got {0}")]
    BadProbability(f64),
}
