use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CqedError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("atom index {index} out of range 1..={n_atoms}")]
    AtomIndex { index: usize, n_atoms: usize },

    #[error("steady state null space has dimension {found} (expected 1)")]
    NullSpace { found: usize },

    #[error("steady state check failed: {0}")]
    SteadyState(String),

    #[error("no convergence in n_max up to cap {cap}; drive too strong for this truncation")]
    NmaxNotConverged { cap: usize },

    #[error("drive calibration failed: {0}")]
    Calibration(String),

    #[error("overdamped regime: N g^2 <= (kappa - gamma/2)^2 / 4, vacuum Rabi frequency is imaginary")]
    ImaginaryRabi,

    #[error("matrix exponential action did not converge")]
    ExpmNotConverged,

    #[error("mean field is zero or negative ({0}); conditioning undefined")]
    DarkField(f64),

    #[error("correlation has not decayed over the tail of the grid (|h-1| = {residual:.3e} > {tolerance:.1e})")]
    TailNotDecayed { residual: f64, tolerance: f64 },

    #[error("no zero-frequency peak in the spectrum")]
    NoZeroFrequencyPeak,

    #[error("jump probability {probability:.3e} exceeds 0.01 in channel {channel}; reduce dt")]
    StepTooLarge { channel: String, probability: f64 },

    #[error("state norm collapsed to {0:.3e}; reduce dt")]
    NormCollapse(f64),

    #[error("collapse produced a zero-norm state in channel {0}")]
    ZeroNormCollapse(String),

    #[error("no eligible start clicks")]
    NoStarts,

    #[error("grid extends beyond recorded context: {0}")]
    GridOutOfRange(String),

    #[error("signal-free band too short: {0}")]
    BandTooShort(String),

    #[error("grid error: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, CqedError>;
