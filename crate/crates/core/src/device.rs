//! Transfer matrices of the physical devices.
//!
//! Every 4x4 matrix in this crate acts on the operator vector
//! `(A_s1, A_s2, A_i1†, A_i2†)`: rows and columns 0, 1 are the signal
//! annihilators and 2, 3 the idler creators. Output operators are
//! `A_out = M · A_in`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numerics::{expm_with, ComplexMatrix};

/// Commutator metric `η = diag(+1, +1, −1, −1)` of the mixed basis.
pub const ETA: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

/// Two downconverters whose idlers exchange energy along a common
/// interaction region of length `length`.
///
/// Couplings are real and measured in inverse length units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousDevice {
    gamma1: f64,
    gamma2: f64,
    kappa: f64,
    length: f64,
}

impl ContinuousDevice {
    pub fn new(gamma1: f64, gamma2: f64, kappa: f64, length: f64) -> Result<Self> {
        require_finite("gamma1", gamma1)?;
        require_finite("gamma2", gamma2)?;
        require_finite("kappa", kappa)?;
        require_finite("length", length)?;
        if length < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "length must be >= 0, got {length}"
            )));
        }
        Ok(ContinuousDevice {
            gamma1,
            gamma2,
            kappa,
            length,
        })
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Same couplings, different interaction length.
    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.gamma1, self.gamma2, self.kappa, length)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

/// Cascade of two downconverters where a beamsplitter of mixing angle `psi`
/// routes part of the first idler into the second crystal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZouDevice {
    r1: f64,
    r2: f64,
    psi: f64,
}

impl ZouDevice {
    pub fn new(r1: f64, r2: f64, psi: f64) -> Result<Self> {
        require_finite("r1", r1)?;
        require_finite("r2", r2)?;
        require_finite("psi", psi)?;
        if !(0.0..=FRAC_PI_2).contains(&psi) {
            return Err(Error::InvalidParameter(format!(
                "psi must lie in [0, pi/2], got {psi}"
            )));
        }
        Ok(ZouDevice { r1, r2, psi })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

/// Operating regime relative to the oscillation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `|κ| < |Γ1| + |Γ2|`: intensities grow exponentially with length.
    AboveThreshold,
    /// `|κ| > |Γ1| + |Γ2|`: all mode intensities oscillate.
    BelowThreshold,
    AtThreshold,
}

pub fn classify_regime(dev: &ContinuousDevice) -> Regime {
    classify_regime_with(dev, &Tolerances::DEFAULT)
}

pub fn classify_regime_with(dev: &ContinuousDevice, tol: &Tolerances) -> Regime {
    let margin = dev.kappa.abs() - (dev.gamma1.abs() + dev.gamma2.abs());
    if margin.abs() <= tol.threshold_band {
        Regime::AtThreshold
    } else if margin < 0.0 {
        Regime::AboveThreshold
    } else {
        Regime::BelowThreshold
    }
}

/// A 4x4 Bogoliubov matrix that preserves the bosonic commutators.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix(ComplexMatrix);

impl TransferMatrix {
    /// Wraps `m` after checking shape, finiteness and `M η M† = η`.
    ///
    /// The Bogoliubov check is relative to `max(1, max|M_jk|²)` so that
    /// strongly amplifying matrices are judged by the precision they can
    /// actually carry.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::new_with(m, &Tolerances::DEFAULT)
    }

    pub fn new_with(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if m.rows() != 4 || m.cols() != 4 {
            return Err(Error::InvalidParameter(format!(
                "transfer matrix must be 4x4, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = relative_symplectic_defect(&m);
        if !(defect <= tol.symplectic) {
            return Err(Error::NotSymplectic { defect });
        }
        Ok(TransferMatrix(m))
    }

    pub fn identity() -> Self {
        TransferMatrix(ComplexMatrix::identity(4))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    /// Absolute element-wise size of `M η M† − η`.
    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.0)
    }

    /// Defect divided by `max(1, max|M_jk|²)`.
    pub fn relative_symplectic_defect(&self) -> f64 {
        relative_symplectic_defect(&self.0)
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn then_after(&self, other: &TransferMatrix) -> Result<TransferMatrix> {
        TransferMatrix::new(&self.0 * &other.0)
    }
}

/// Largest entry of `|M η M† − η|` for a 4x4 matrix.
pub fn symplectic_defect(m: &ComplexMatrix) -> f64 {
    let eta = ComplexMatrix::from_fn(4, 4, |i, j| {
        Complex64::new(if i == j { ETA[i] } else { 0.0 }, 0.0)
    });
    let lhs = &(m * &eta) * &m.adjoint();
    lhs.max_abs_diff(&eta)
}

pub fn relative_symplectic_defect(m: &ComplexMatrix) -> f64 {
    symplectic_defect(m) / m.max_abs().powi(2).max(1.0)
}

/// Real generator `H` with `dA/dz = i·H·A`.
pub fn build_hamiltonian(dev: &ContinuousDevice) -> ComplexMatrix {
    let (g1, g2, k) = (dev.gamma1, dev.gamma2, dev.kappa);
    ComplexMatrix::from_real_rows([
        [0.0, 0.0, g1, 0.0],
        [0.0, 0.0, 0.0, g2],
        [-g1, 0.0, 0.0, -k],
        [0.0, -g2, -k, 0.0],
    ])
}

/// `M = exp(i·H·L)`.
pub fn transfer_matrix(dev: &ContinuousDevice) -> Result<TransferMatrix> {
    transfer_matrix_with(dev, &Tolerances::DEFAULT)
}

pub fn transfer_matrix_with(dev: &ContinuousDevice, tol: &Tolerances) -> Result<TransferMatrix> {
    let generator = build_hamiltonian(dev).scale(Complex64::new(0.0, dev.length));
    TransferMatrix::new_with(expm_with(&generator, tol)?, tol)
}

/// Input-output matrix of the cascaded device with partially aligned idlers.
///
/// Rows 2 and 3 are the adjoints of the idler annihilator equations, so
/// every coefficient there is conjugated relative to the annihilator form.
pub fn zou_transfer_matrix(dev: &ZouDevice) -> Result<TransferMatrix> {
    let (c1, s1) = (dev.r1.cosh(), dev.r1.sinh());
    let (c2, s2) = (dev.r2.cosh(), dev.r2.sinh());
    let (cp, sp) = (dev.psi.cos(), dev.psi.sin());
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let zero = re(0.0);
    let m = ComplexMatrix::from_rows([
        [re(c1), zero, im(s1), zero],
        [im(-s1 * sp * s2), re(c2), re(c1 * sp * s2), im(cp * s2)],
        [im(-s1 * cp), zero, re(c1 * cp), im(-sp)],
        [re(-s1 * sp * c2), im(-s2), im(-c1 * sp * c2), re(cp * c2)],
    ]);
    TransferMatrix::new(m)
}
