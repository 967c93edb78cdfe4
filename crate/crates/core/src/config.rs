//! Numerical tolerances shared by the library, its tests and the CLI.

/// One record holding every threshold the crate compares against.
///
/// `Tolerances::default()` returns the stock values; callers that need a
/// looser or tighter check copy the record and override single fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest matrix dimension accepted by `expm`.
    pub expm_max_dim: usize,
    /// Largest 1-norm condition estimate accepted by `inverse`.
    pub max_condition: f64,
    /// Relative element-wise bound on `M η M† − η`.
    pub symplectic: f64,
    /// Band around `|κ| = |Γ1| + |Γ2|` classified as at threshold.
    pub threshold_band: f64,
    /// Signal occupations at or below this make γ undefined.
    pub occupation_floor: f64,
    /// Occupations below this still give γ but flag it as fragile.
    pub fragile_occupation: f64,
    /// Largest tolerated real part of a correlation that must be imaginary.
    pub imaginary_check: f64,
    /// tanh arguments overshooting ±1 by less than this are clamped.
    pub tanh_overshoot: f64,
    /// Distance from ±1 used when clamping a tanh argument.
    pub tanh_clamp: f64,
    /// Denominators below this mark the closed-form mixing angles degenerate.
    pub degenerate_denominator: f64,
    /// Largest residual accepted from a scheme extraction.
    pub max_residual: f64,
    /// Target residual for the fallback angle search.
    pub fallback_residual: f64,
    /// Slack on the photon-number bound for the Zou-scheme parameters.
    pub g_bound_slack: f64,
    /// Largest boundary population accepted from the Fock evolution.
    pub max_leakage: f64,
    /// Largest Gaussian–Fock deviation accepted by the oracle check.
    pub oracle_agreement: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        expm_max_dim: 4096,
        max_condition: 1e12,
        symplectic: 1e-10,
        threshold_band: 1e-12,
        occupation_floor: 1e-14,
        fragile_occupation: 1e-8,
        imaginary_check: 1e-9,
        tanh_overshoot: 1e-9,
        tanh_clamp: 1e-15,
        degenerate_denominator: 1e-12,
        max_residual: 1e-6,
        fallback_residual: 1e-10,
        g_bound_slack: 1e-9,
        max_leakage: 1e-4,
        oracle_agreement: 1e-3,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
