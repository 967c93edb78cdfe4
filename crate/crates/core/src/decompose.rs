//! Substituting schemes: cascades of discrete squeezers and beamsplitters
//! that produce the same vacuum-input output state as a transfer matrix.
//!
//! Parameters are found by propagating the output moments backwards
//! through the cascade. After each stage some correlations of a vacuum
//! input must vanish, and those conditions fix the stage parameters in
//! closed form. After the last stage the remaining matrix must be passive
//! (no pair creation), so *every* vacuum moment of it must vanish; the
//! largest of them is reported as the extraction residual.
//!
//! Two cascades are supported:
//!
//! * [`ZouScheme`]: squeezers on `(s1,i1)` and `(s2,i2)` followed by cross
//!   squeezers on `(s1,i2)` and `(s2,i1)`.
//! * [`OuScheme`]: squeezers on `(s1,i1)` and `(s2,i2)` followed by a
//!   signal beamsplitter and an idler beamsplitter.
//!
//! The passive stages that act on the vacuum before the first squeezers are
//! dropped, so equivalence holds for vacuum moments, not for the matrices.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::device::TransferMatrix;
use crate::error::{Error, Result};
use crate::moments::{moments_of_matrix, vacuum_moments, Mode};
use crate::numerics::ComplexMatrix;

const MAX_COUPLING: f64 = 10.0;

fn check_coupling(name: &str, g: f64) -> Result<()> {
    if g.is_finite() && g.abs() < MAX_COUPLING {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite with |{name}| < {MAX_COUPLING}, got {g}"
        )))
    }
}

/// Maps an angle onto `(−π/2, π/2]`; a mixing matrix is unchanged up to an
/// overall sign by a shift of π.
pub fn normalize_angle(phi: f64) -> f64 {
    let mut a = phi.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Four-downconverter cascade: `g1`, `g2` on `(s1,i1)`, `(s2,i2)` first,
/// then `g4`, `g5` on `(s1,i2)`, `(s2,i1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZouScheme {
    g1: f64,
    g2: f64,
    g4: f64,
    g5: f64,
}

impl ZouScheme {
    pub fn new(g1: f64, g2: f64, g4: f64, g5: f64) -> Result<Self> {
        check_coupling("g1", g1)?;
        check_coupling("g2", g2)?;
        check_coupling("g4", g4)?;
        check_coupling("g5", g5)?;
        Ok(ZouScheme { g1, g2, g4, g5 })
    }

    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn g4(&self) -> f64 {
        self.g4
    }

    pub fn g5(&self) -> f64 {
        self.g5
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.g1, self.g2, self.g4, self.g5]
    }
}

/// Two downconverters followed by a signal beamsplitter (`phi_s`) and an
/// idler beamsplitter (`phi_i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuScheme {
    g1: f64,
    g2: f64,
    phi_s: f64,
    phi_i: f64,
}

impl OuScheme {
    /// Angles are normalized into `(−π/2, π/2]`.
    pub fn new(g1: f64, g2: f64, phi_s: f64, phi_i: f64) -> Result<Self> {
        check_coupling("g1", g1)?;
        check_coupling("g2", g2)?;
        for (name, phi) in [("phi_s", phi_s), ("phi_i", phi_i)] {
            if !phi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {phi}"
                )));
            }
        }
        Ok(OuScheme {
            g1,
            g2,
            phi_s: normalize_angle(phi_s),
            phi_i: normalize_angle(phi_i),
        })
    }

    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn phi_s(&self) -> f64 {
        self.phi_s
    }

    pub fn phi_i(&self) -> f64 {
        self.phi_i
    }
}

/// How the mixing angles of an [`OuScheme`] were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Closed form with no branch choice (the Zou cascade).
    ClosedForm,
    /// `tan φ_i = (−p + √(p² + 4)) / 2`
    Plus,
    /// `tan φ_i = (−p − √(p² + 4)) / 2`
    Minus,
    /// Residual-minimizing search over `(φ_s, φ_i)`.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionReport<S> {
    pub scheme: S,
    /// Largest vacuum moment left after propagating back through the scheme.
    pub residual: f64,
    pub branch: Branch,
    pub fallback_used: bool,
}

/// A cascade that can be compared against a transfer matrix.
pub trait SubstitutingScheme {
    /// Matrix that propagates output operators back to the scheme input.
    fn backpropagation(&self) -> ComplexMatrix;

    /// Forward transfer matrix of the cascade (vacuum pre-stages dropped).
    fn forward_matrix(&self) -> TransferMatrix;
}

impl SubstitutingScheme for ZouScheme {
    fn backpropagation(&self) -> ComplexMatrix {
        &squeezer_stage(self.g1, self.g2) * &cross_squeezer_stage(self.g4, self.g5)
    }

    fn forward_matrix(&self) -> TransferMatrix {
        let m = &cross_squeezer_stage(-self.g4, -self.g5) * &squeezer_stage(-self.g1, -self.g2);
        TransferMatrix::new(m).expect("cascade of Bogoliubov stages is Bogoliubov")
    }
}

impl SubstitutingScheme for OuScheme {
    fn backpropagation(&self) -> ComplexMatrix {
        &squeezer_stage(self.g1, self.g2) * &mixing_stage(self.phi_s, self.phi_i)
    }

    fn forward_matrix(&self) -> TransferMatrix {
        let m = &mixing_stage(-self.phi_s, -self.phi_i) * &squeezer_stage(-self.g1, -self.g2);
        TransferMatrix::new(m).expect("cascade of Bogoliubov stages is Bogoliubov")
    }
}

/// Back-propagation through the `(s1,i1)`, `(s2,i2)` squeezer pair.
pub fn squeezer_stage(g1: f64, g2: f64) -> ComplexMatrix {
    let (c1, s1) = (g1.cosh(), g1.sinh());
    let (c2, s2) = (g2.cosh(), g2.sinh());
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let z = re(0.0);
    ComplexMatrix::from_rows([
        [re(c1), z, im(-s1), z],
        [z, re(c2), z, im(-s2)],
        [im(s1), z, re(c1), z],
        [z, im(s2), z, re(c2)],
    ])
}

/// Back-propagation through the `(s1,i2)`, `(s2,i1)` cross squeezers.
pub fn cross_squeezer_stage(g4: f64, g5: f64) -> ComplexMatrix {
    let (c4, s4) = (g4.cosh(), g4.sinh());
    let (c5, s5) = (g5.cosh(), g5.sinh());
    ComplexMatrix::from_real_rows([
        [c4, 0.0, 0.0, -s4],
        [0.0, c5, -s5, 0.0],
        [0.0, -s5, c5, 0.0],
        [-s4, 0.0, 0.0, c4],
    ])
}

/// Back-propagation through the signal and idler beamsplitters.
pub fn mixing_stage(phi_s: f64, phi_i: f64) -> ComplexMatrix {
    let (cs, ss) = (phi_s.cos(), phi_s.sin());
    let (ci, si) = (phi_i.cos(), phi_i.sin());
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let z = re(0.0);
    ComplexMatrix::from_rows([
        [re(cs), im(-ss), z, z],
        [im(-ss), re(cs), z, z],
        [z, z, re(ci), im(si)],
        [z, z, im(si), re(ci)],
    ])
}

/// `atanh(x) / 2`, tolerating rounding overshoot of `|x|` past 1.
fn half_atanh(x: f64, tol: &Tolerances) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::TanhDomain { argument: x });
    }
    let limit = 1.0 - tol.tanh_clamp;
    let arg = if x.abs() <= limit {
        x
    } else if x.abs() - 1.0 < tol.tanh_overshoot {
        limit.copysign(x)
    } else {
        return Err(Error::TanhDomain { argument: x });
    };
    Ok(0.5 * arg.atanh())
}

fn require_real(z: Complex64, tol: &Tolerances) -> Result<f64> {
    if z.im.abs() > tol.imaginary_check * z.norm().max(1.0) {
        return Err(Error::NonRealCorrelation { real_part: z.im });
    }
    Ok(z.re)
}

fn require_imaginary(z: Complex64, tol: &Tolerances) -> Result<f64> {
    if z.re.abs() > tol.imaginary_check * z.norm().max(1.0) {
        return Err(Error::NonRealCorrelation { real_part: z.re });
    }
    Ok(z.im)
}

/// Squeezings of the `(s1,i1)`, `(s2,i2)` pair that remove the pair
/// correlations of `mc`: `tanh 2g = −2i·D / (B_s + B_i + 1)`.
fn pair_squeezing(mc: &ComplexMatrix, tol: &Tolerances) -> Result<(f64, f64)> {
    let mo = moments_of_matrix(mc);
    let solve = |s: Mode, i: Mode| -> Result<f64> {
        let d = require_imaginary(mo.d(s, i), tol)?;
        half_atanh(2.0 * d / (mo.b(s) + mo.b(i) + 1.0), tol)
    };
    Ok((solve(Mode::S1, Mode::I1)?, solve(Mode::S2, Mode::I2)?))
}

fn passive_residual(m: &ComplexMatrix) -> f64 {
    moments_of_matrix(m).max_abs()
}

pub fn extract_zou(m: &TransferMatrix) -> Result<ExtractionReport<ZouScheme>> {
    extract_zou_with(m, &Tolerances::DEFAULT)
}

pub fn extract_zou_with(
    m: &TransferMatrix,
    tol: &Tolerances,
) -> Result<ExtractionReport<ZouScheme>> {
    let mo = vacuum_moments(m);
    let cross = |s: Mode, i: Mode| -> Result<f64> {
        let d = require_real(mo.d(s, i), tol)?;
        half_atanh(2.0 * d / (mo.b(s) + mo.b(i) + 1.0), tol)
    };
    let g4 = cross(Mode::S1, Mode::I2)?;
    let g5 = cross(Mode::S2, Mode::I1)?;
    let mc = &cross_squeezer_stage(g4, g5) * m.matrix();
    let (g1, g2) = pair_squeezing(&mc, tol)?;
    let scheme = ZouScheme::new(g1, g2, g4, g5)?;
    let residual = passive_residual(&(&squeezer_stage(g1, g2) * &mc));
    if !(residual <= tol.max_residual) {
        return Err(Error::ResidualTooLarge {
            residual,
            limit: tol.max_residual,
        });
    }
    Ok(ExtractionReport {
        scheme,
        residual,
        branch: Branch::ClosedForm,
        fallback_used: false,
    })
}

#[derive(Debug, Clone, Copy)]
struct OuCandidate {
    g1: f64,
    g2: f64,
    phi_s: f64,
    phi_i: f64,
    residual: f64,
}

fn ou_candidate(
    m: &ComplexMatrix,
    phi_s: f64,
    phi_i: f64,
    tol: &Tolerances,
) -> Result<OuCandidate> {
    let mc = &mixing_stage(phi_s, phi_i) * m;
    let (g1, g2) = pair_squeezing(&mc, tol)?;
    let residual = passive_residual(&(&squeezer_stage(g1, g2) * &mc));
    Ok(OuCandidate {
        g1,
        g2,
        phi_s,
        phi_i,
        residual,
    })
}

/// Both roots of `t² + p·t − 1 = 0`, evaluated without cancellation.
fn idler_tangent_roots(p: f64) -> (f64, f64) {
    let r = (p * p + 4.0).sqrt();
    if p >= 0.0 {
        let minus = -0.5 * (p + r);
        (-1.0 / minus, minus)
    } else {
        let plus = 0.5 * (r - p);
        (plus, -1.0 / plus)
    }
}

pub fn extract_ou(m: &TransferMatrix) -> Result<ExtractionReport<OuScheme>> {
    extract_ou_with(m, &Tolerances::DEFAULT)
}

/// Mixing angles from the two vanishing cross correlations, then the
/// squeezings from the remaining pair correlations.
///
/// Both roots for `tan φ_i` are tried. Among candidates that reproduce the
/// moments to within the fallback residual, the one whose first squeezer is
/// the stronger is kept; otherwise the smaller residual wins. When the closed form is degenerate (vanishing
/// denominators, as for symmetric devices or uncoupled idlers) or leaves a
/// residual above the limit, a grid search with compass refinement over
/// `(φ_s, φ_i)` takes over.
pub fn extract_ou_with(m: &TransferMatrix, tol: &Tolerances) -> Result<ExtractionReport<OuScheme>> {
    let mo = vacuum_moments(m);
    let d11 = mo.d(Mode::S1, Mode::I1);
    let d12 = mo.d(Mode::S1, Mode::I2);
    let d21 = mo.d(Mode::S2, Mode::I1);
    let d22 = mo.d(Mode::S2, Mode::I2);
    let i = Complex64::new(0.0, 1.0);

    let q = d11 * d12 - d21 * d22;
    let mut candidates: Vec<(OuCandidate, Branch)> = Vec::new();
    if q.norm() >= tol.degenerate_denominator {
        let s = d11 * d11 + d12 * d12 - d21 * d21 - d22 * d22;
        let p = require_real(i * s / q, tol)?;
        let (plus, minus) = idler_tangent_roots(p);
        for (branch, t) in [(Branch::Plus, plus), (Branch::Minus, minus)] {
            let denom = d21 * t + i * d22;
            if denom.norm() < tol.degenerate_denominator {
                continue;
            }
            let tan_s = require_real((d12 - i * d11 * t) / denom, tol)?;
            if let Ok(candidate) = ou_candidate(m.matrix(), tan_s.atan(), t.atan(), tol) {
                candidates.push((candidate, branch));
            }
        }
    }

    if !candidates
        .iter()
        .any(|(c, _)| c.residual <= tol.max_residual)
    {
        if let Some(found) = fallback_search(m.matrix(), tol) {
            // shifting the angles by (π/2, −π/2) swaps the labels of the two
            // downconverters without flipping the sign of either squeezing
            let swapped = ou_candidate(
                m.matrix(),
                found.phi_s + FRAC_PI_2,
                found.phi_i - FRAC_PI_2,
                tol,
            );
            candidates.push((found, Branch::Fallback));
            if let Ok(c) = swapped {
                candidates.push((c, Branch::Fallback));
            }
        }
    }

    let Some((candidate, branch)) = select_candidate(&candidates, tol) else {
        return Err(Error::ResidualTooLarge {
            residual: f64::INFINITY,
            limit: tol.max_residual,
        });
    };
    if !(candidate.residual <= tol.max_residual) {
        return Err(Error::ResidualTooLarge {
            residual: candidate.residual,
            limit: tol.max_residual,
        });
    }
    Ok(ExtractionReport {
        scheme: OuScheme::new(candidate.g1, candidate.g2, candidate.phi_s, candidate.phi_i)?,
        residual: candidate.residual,
        branch,
        fallback_used: branch == Branch::Fallback,
    })
}

/// Picks the smallest residual, except that candidates which are all exact
/// to within `fallback_residual` are equivalent decompositions differing
/// only in which downconverter carries which label; among those the one
/// with `|g1| >= |g2|` is taken.
fn select_candidate(
    candidates: &[(OuCandidate, Branch)],
    tol: &Tolerances,
) -> Option<(OuCandidate, Branch)> {
    let exact: Vec<_> = candidates
        .iter()
        .filter(|(c, _)| c.residual <= tol.fallback_residual)
        .collect();
    if !exact.is_empty() {
        return exact
            .into_iter()
            .max_by(|(a, _), (b, _)| {
                let lead = |c: &OuCandidate| c.g1.abs() - c.g2.abs();
                lead(a)
                    .total_cmp(&lead(b))
                    .then(b.residual.total_cmp(&a.residual))
            })
            .copied();
    }
    candidates
        .iter()
        .min_by(|(a, _), (b, _)| a.residual.total_cmp(&b.residual))
        .copied()
}

const FALLBACK_GRID: usize = 48;
const FALLBACK_MAX_STEPS: usize = 4000;

/// Grid seed over `(−π/2, π/2]²` followed by compass refinement.
///
/// Near-ties on the grid go to the smaller `|φ_s| + |φ_i|`, so an
/// unmixed solution is preferred whenever one exists.
fn fallback_search(m: &ComplexMatrix, tol: &Tolerances) -> Option<OuCandidate> {
    let eval = |phi_s: f64, phi_i: f64| ou_candidate(m, phi_s, phi_i, tol).ok();
    let angle = |k: usize| -FRAC_PI_2 + PI * (k + 1) as f64 / FALLBACK_GRID as f64;
    let tie = 1e-15;

    let mut best: Option<OuCandidate> = None;
    for a in 0..FALLBACK_GRID {
        for b in 0..FALLBACK_GRID {
            let Some(c) = eval(angle(a), angle(b)) else {
                continue;
            };
            let better = match best {
                None => true,
                Some(cur) => {
                    c.residual < cur.residual - tie
                        || (c.residual <= cur.residual + tie
                            && c.phi_s.abs() + c.phi_i.abs() < cur.phi_s.abs() + cur.phi_i.abs())
                }
            };
            if better {
                best = Some(c);
            }
        }
    }

    let mut cur = best?;
    let mut step = PI / FALLBACK_GRID as f64;
    let target = tol.fallback_residual * 1e-3;
    for _ in 0..FALLBACK_MAX_STEPS {
        if cur.residual <= target || step < 1e-14 {
            break;
        }
        let moves = [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)];
        let improved = moves
            .iter()
            .filter_map(|&(ds, di)| eval(cur.phi_s + ds, cur.phi_i + di))
            .filter(|c| c.residual < cur.residual)
            .min_by(|x, y| x.residual.total_cmp(&y.residual));
        match improved {
            Some(c) => cur = c,
            None => step *= 0.5,
        }
    }
    cur.phi_s = normalize_angle(cur.phi_s);
    cur.phi_i = normalize_angle(cur.phi_i);
    Some(cur)
}

/// Largest vacuum moment of `m` propagated back through `scheme`.
pub fn equivalence_residual(m: &TransferMatrix, scheme: &impl SubstitutingScheme) -> f64 {
    passive_residual(&(&scheme.backpropagation() * m.matrix()))
}

/// Photon-number bound on the Zou-scheme squeezings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBoundCheck {
    /// `⟨n_s1⟩ + ⟨n_s2⟩` of the device.
    pub lhs: f64,
    /// `Σ sinh² g` over the four squeezers.
    pub rhs: f64,
    /// `asinh(√lhs)`, an upper bound on every `|g|`.
    pub g_max: f64,
    pub violated: bool,
}

pub fn g_bound_check(m: &TransferMatrix, s: &ZouScheme) -> GBoundCheck {
    g_bound_check_with(m, s, &Tolerances::DEFAULT)
}

pub fn g_bound_check_with(m: &TransferMatrix, s: &ZouScheme, tol: &Tolerances) -> GBoundCheck {
    let lhs = vacuum_moments(m).intensities().total_signal();
    let rhs = s.as_array().iter().map(|g| g.sinh().powi(2)).sum();
    GBoundCheck {
        lhs,
        rhs,
        g_max: lhs.sqrt().asinh(),
        violated: lhs < rhs - tol.g_bound_slack,
    }
}
