use thiserror::Error;

/// Everything that can go wrong while building specs or running simulations.
///
/// Validation failures each get their own variant so callers (and the CLI
/// `validate` report) can name the violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("sigma2 must be positive and finite, got {0}")]
    NonPositiveSigma2(f64),
    #[error("dimension must be at least 1, got {0}")]
    InvalidDimension(usize),
    #[error("mean vector {index} has length {len}, expected dim {dim}")]
    MeanLength { index: usize, len: usize, dim: usize },
    #[error("{kind} needs {expected} mean vector(s), got {got}")]
    MeanCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mean vectors must be finite")]
    NonFiniteMean,
    #[error("weights must be non-negative and sum to 1: {0}")]
    InvalidWeights(String),
    #[error("only equal component weights are supported, got {0:?}")]
    UnequalWeights(Vec<f64>),
    #[error("orthogonal quad requires m1 . m2 = 0, got {dot:e} (tolerance {tol:e})")]
    NotOrthogonal { dot: f64, tol: f64 },
    #[error("class label {label} out of range for {n_components} components")]
    LabelOutOfRange { label: usize, n_components: usize },
    #[error("state has length {got}, mixture dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("guidance strength omega must be >= 0 and finite, got {0}")]
    InvalidOmega(f64),
    #[error("power-law exponent must satisfy alpha > -1, got {0}")]
    InvalidAlpha(f64),
    #[error("rescaled power-law exponent must satisfy gamma > 0, got {0}")]
    InvalidGammaExponent(f64),
    #[error("guidance interval must satisfy 0 <= t1 < t2, got [{0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("invalid weight table: {0}")]
    InvalidWeightTable(String),
    #[error("switch time must be >= 0 and finite, got {0}")]
    InvalidSwitchTime(f64),
    #[error("score difference norm must be non-negative, got {0}")]
    NegativeNorm(f64),
    #[error("{0}")]
    UnsupportedMixture(String),
    #[error("specs do not describe the same symmetric pair: {0}")]
    MismatchedSpecs(String),
    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),
    #[error("non-finite state in trajectory {traj} at step {step} (t = {t})")]
    NumericFailure { traj: usize, step: usize, t: f64 },
    #[error("backward time {tau} outside [0, {t_f}]")]
    BackwardTimeOutOfRange { tau: f64, t_f: f64 },
    #[error("forward time {t} after switch time {t1}")]
    AfterSwitch { t: f64, t1: f64 },
    #[error("ddpm step {step} outside [0, {n_steps}]")]
    StepOutOfRange { step: usize, n_steps: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("ensemble carries no score-difference recordings")]
    MissingScoreDiff,
    #[error("time {0} is not on the recorded grid")]
    TimeNotOnGrid(f64),
    #[error("recorded grids differ between ensembles")]
    GridMismatch,
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("invalid histogram range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("point sets have different dimensions ({0} vs {1})")]
    PointDimensionMismatch(usize, usize),
    #[error("k = {k} must satisfy 1 <= k < {min_count}")]
    InvalidK { k: usize, min_count: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
