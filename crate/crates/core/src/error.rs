use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Every variant belongs to exactly one module; [`Error::module`] reports it
/// so that callers (the CLI in particular) can surface provenance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("reality violation: coefficient of mode {mode} is not the conjugate of mode {partner}")]
    Reality { mode: i64, partner: i64 },
    #[error("aliasing: potential uses modes up to {max_mode} but the grid resolves only {}", .points_per_cell / 2)]
    Aliasing { max_mode: usize, points_per_cell: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("quasimomentum {k} lies outside the zone [-{half_width}, {half_width})")]
    OutsideZone { k: f64, half_width: f64 },
    #[error("plane-wave cutoff {cutoff} is below the potential bandwidth {max_mode}")]
    CutoffTooSmall { cutoff: usize, max_mode: usize },
    #[error("eigensolver did not converge on fiber {fiber} (k = {k})")]
    EigenNonConvergence { fiber: usize, k: f64 },
    #[error("band derivatives need at least 8 quasimomenta, got {0}")]
    TooFewFibers(usize),
    #[error("band derivatives have not been computed")]
    MissingDerivatives,

    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("no usable sample times: window is [{t_min}, {t_max}]")]
    EmptyWindow { t_min: f64, t_max: f64 },
    #[error("slope fit needs >= 8 usable points spanning a decade (got {points} points, span ratio {span})")]
    InsufficientSpan { points: usize, span: f64 },

    #[error("inadmissible pair (r = {r}, p = {p}): {reason}")]
    Inadmissible { r: f64, p: f64, reason: PairViolation },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("time sampling misaligned: {0}")]
    Alignment(String),
    #[error("zero input: {0}")]
    ZeroInput(&'static str),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("initial data H1 norm {norm} exceeds the small-data guard {limit}")]
    DataTooLarge { norm: f64, limit: f64 },
    #[error("non-finite field after step {step}")]
    NonFinite { step: usize },

    #[error("scattering window too short: {0}")]
    WindowTooShort(String),
    #[error("scaling experiment: {0}")]
    Scaling(String),
}

/// Which condition of the admissibility relation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairViolation {
    TimeExponentRange,
    SpaceExponentRange,
    ScalingRelation,
}

impl core::fmt::Display for PairViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            PairViolation::TimeExponentRange => "r must lie in [4, inf]",
            PairViolation::SpaceExponentRange => "p must lie in [2, inf]",
            PairViolation::ScalingRelation => "2/r + 1/p must equal 1/2",
        })
    }
}

impl Error {
    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            InvalidGrid(_) | InvalidPotential(_) | Reality { .. } | Aliasing { .. } | GridMismatch(_) => {
                "fields"
            }
            OutsideZone { .. }
            | CutoffTooSmall { .. }
            | EigenNonConvergence { .. }
            | TooFewFibers(_)
            | MissingDerivatives => "bloch",
            InvalidMask(_) | EmptyWindow { .. } | InsufficientSpan { .. } => "propagator",
            Inadmissible { .. } | InvalidExponent(_) | Alignment(_) | ZeroInput(_) => "norms",
            InvalidNonlinearity(_) | InvalidConfig(_) | DataTooLarge { .. } | NonFinite { .. } => "nls",
            WindowTooShort(_) | Scaling(_) => "scattering",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
