use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {left_rows}x{left_cols} against {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transfer matrix violates the Bogoliubov condition (relative defect {defect:e})")]
    NotSymplectic { defect: f64 },

    #[error("signal coherence undefined: occupations {n_s1:e} and {n_s2:e} are at the floor")]
    UndefinedCoherence { n_s1: f64, n_s2: f64 },

    #[error("correlation expected to be purely imaginary has real part {real_part:e}")]
    NonRealCorrelation { real_part: f64 },

    #[error("tanh argument {argument} lies outside (-1, 1)")]
    TanhDomain { argument: f64 },

    #[error("best extraction residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("pair state is identically zero (no pair produced)")]
    AllZero,

    #[error("which-way geometry is degenerate: {0}")]
    DegenerateGeometry(&'static str),

    #[error("Fock cutoff {n_max} is too small (need at least 1)")]
    CutoffTooSmall { n_max: usize },

    #[error("truncation leakage {leakage:e} exceeds {limit:e}")]
    LeakageTooLarge { leakage: f64, limit: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short identifier without spaces or commas, used in CSV status fields.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "not_square",
            Error::DimensionCap { .. } => "dimension_cap",
            Error::NonFinite => "non_finite",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Singular { .. } => "singular",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotSymplectic { .. } => "not_symplectic",
            Error::UndefinedCoherence { .. } => "undefined_coherence",
            Error::NonRealCorrelation { .. } => "non_real_correlation",
            Error::TanhDomain { .. } => "tanh_domain",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::AllZero => "all_zero",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::CutoffTooSmall { .. } => "cutoff_too_small",
            Error::LeakageTooLarge { .. } => "leakage_too_large",
        }
    }
}
