//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! to name the violated precondition; the CLI maps them onto exit codes
//! (constraint violations vs numerical failures vs I/O).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be an integer >= 2, got {0}")]
    InvalidDimension(usize),

    #[error("no closed form for dimension {0} here (implemented for n = 3 and n = 5)")]
    UnsupportedDimension(usize),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("operands live on different grids")]
    IncompatibleGrid,

    #[error("transform is not calibrated; call calibrate() first")]
    CalibrationRequired,

    #[error("calibration round-trip residual {residual:.3e} exceeds {tolerance:.1e}; refine the grids")]
    ResolutionFailure { residual: f64, tolerance: f64 },

    #[error("mass shift c = {c} violates spectral positivity c >= -rho^2 = {floor}")]
    SpectralPositivity { c: f64, floor: f64 },

    #[error("multiplier cos(t w)/w is singular: spectral mass at w = 0")]
    SingularMultiplier,

    #[error("invalid Lorentz exponents (p, q) = ({p}, {q}); need p in (1, inf], q in [1, inf], and q = inf when p = inf")]
    InvalidExponents { p: f64, q: f64 },

    #[error("Lorentz norm diverges: profile has not decayed at r_max (tail fraction {tail:.3e})")]
    DivergentNorm { tail: f64 },

    #[error("Beta identity needs both exponents < 1, got beta = {beta}, b*alpha_tilde = {b_alpha_tilde}")]
    DivergentBetaIntegral { beta: f64, b_alpha_tilde: f64 },

    #[error("phi_p is singular at t = 0 for p > 2 (got p = {p})")]
    PhiSingularAtZero { p: f64 },

    #[error("parameter constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("t = {t} is not a trajectory node; refusing to interpolate")]
    NotAGridNode { t: f64 },

    #[error("Picard iteration not contracting: {0}")]
    Divergence(String),

    #[error("local existence time shrank below {floor}: {detail}")]
    HorizonExhausted { floor: f64, detail: String },

    #[error("time horizon too short: {0}")]
    Horizon(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code classification: 1 constraint violation, 2 numerical
    /// failure, 3 I/O failure.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidDimension(_) | UnsupportedDimension(_) | NonPositive { .. }
            | NotFinite { .. } | SpectralPositivity { .. } | InvalidExponents { .. }
            | DivergentBetaIntegral { .. } | PhiSingularAtZero { .. }
            | ConstraintViolation(_) | Config(_) => 1,
            GridTooCoarse(_) | IncompatibleGrid | CalibrationRequired
            | ResolutionFailure { .. } | SingularMultiplier | DivergentNorm { .. }
            | NotAGridNode { .. } | Divergence(_) | HorizonExhausted { .. } | Horizon(_) => 2,
            Io(_) => 3,
        }
    }
}
