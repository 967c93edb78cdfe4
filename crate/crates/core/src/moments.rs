//! Second moments of the output field for vacuum input, and the signal
//! coherence built from them.
//!
//! Each output annihilator is written as `a_j = Σ_m α_jm a_m + β_jm a_m†`
//! over the input modes. For vacuum input the only non-zero input moment is
//! `⟨a_m a_m†⟩ = 1`, so
//!
//! * `⟨a_j a_k⟩  = Σ_m α_jm β_km`
//! * `⟨a_j† a_k⟩ = Σ_m β_jm* β_km`
//!
//! which reproduces the familiar `D_{s1i1} = M11 M31* + M12 M32*`,
//! `B_{s1} = |M13|² + |M14|²` pattern entry by entry.

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::device::TransferMatrix;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Mode labels in the global index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    S1 = 0,
    S2 = 1,
    I1 = 2,
    I2 = 3,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::S1, Mode::S2, Mode::I1, Mode::I2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::S1 => "s1",
            Mode::S2 => "s2",
            Mode::I1 => "i1",
            Mode::I2 => "i2",
        }
    }
}

/// All zero-mean second moments of a four-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `pair[j][k] = ⟨a_j a_k⟩`
    pair: [[Complex64; 4]; 4],
    /// `number[j][k] = ⟨a_j† a_k⟩`
    number: [[Complex64; 4]; 4],
}

impl MomentSet {
    /// `D_jk = ⟨ΔA_j ΔA_k⟩`.
    pub fn d(&self, j: Mode, k: Mode) -> Complex64 {
        self.pair[j.index()][k.index()]
    }

    /// `⟨A_j† A_k⟩`.
    pub fn number(&self, j: Mode, k: Mode) -> Complex64 {
        self.number[j.index()][k.index()]
    }

    /// Occupation `B_j = ⟨ΔA_j† ΔA_j⟩`.
    pub fn b(&self, j: Mode) -> f64 {
        self.number[j.index()][j.index()].re
    }

    /// `⟨A_s1† A_s2⟩`, the numerator of the signal coherence.
    pub fn signal_cross(&self) -> Complex64 {
        self.number(Mode::S1, Mode::S2)
    }

    pub fn intensities(&self) -> Intensities {
        Intensities {
            s1: self.b(Mode::S1),
            s2: self.b(Mode::S2),
            i1: self.b(Mode::I1),
            i2: self.b(Mode::I2),
        }
    }

    /// Largest magnitude over every moment; zero exactly for vacuum.
    pub fn max_abs(&self) -> f64 {
        self.pair
            .iter()
            .chain(self.number.iter())
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &MomentSet) -> f64 {
        let pairs = self.pair.iter().flatten().zip(other.pair.iter().flatten());
        let numbers = self
            .number
            .iter()
            .flatten()
            .zip(other.number.iter().flatten());
        pairs
            .chain(numbers)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Mean photon numbers of the four output modes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Intensities {
    pub s1: f64,
    pub s2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl Intensities {
    pub fn total_signal(&self) -> f64 {
        self.s1 + self.s2
    }

    pub fn total_idler(&self) -> f64 {
        self.i1 + self.i2
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s1, self.s2, self.i1, self.i2]
    }

    pub fn max_abs_diff(&self, other: &Intensities) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn vacuum_moments(m: &TransferMatrix) -> MomentSet {
    moments_of_matrix(m.matrix())
}

/// Vacuum moments of any 4x4 mixed-basis matrix, symplectic or not.
pub(crate) fn moments_of_matrix(m: &ComplexMatrix) -> MomentSet {
    debug_assert!(m.rows() == 4 && m.cols() == 4);
    let zero = Complex64::new(0.0, 0.0);
    let mut alpha = [[zero; 4]; 4];
    let mut beta = [[zero; 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            let entry = m[(j, k)];
            // signal rows hold the annihilator directly, idler rows its adjoint
            let (coeff, input_is_creator) = if j < 2 {
                (entry, k >= 2)
            } else {
                (entry.conj(), k < 2)
            };
            if input_is_creator {
                beta[j][k] = coeff;
            } else {
                alpha[j][k] = coeff;
            }
        }
    }
    let mut pair = [[zero; 4]; 4];
    let mut number = [[zero; 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            pair[j][k] = (0..4).map(|m| alpha[j][m] * beta[k][m]).sum();
            number[j][k] = (0..4).map(|m| beta[j][m].conj() * beta[k][m]).sum();
        }
    }
    for (j, row) in number.iter_mut().enumerate() {
        // a sum of squared moduli; drop any rounding residue in the imaginary part
        row[j] = Complex64::new(row[j].re.max(0.0), 0.0);
    }
    MomentSet { pair, number }
}

pub fn intensities(m: &TransferMatrix) -> Intensities {
    vacuum_moments(m).intensities()
}

/// Normalized mutual coherence of the two signal beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    /// Real part of `−i⟨A_s1† A_s2⟩ / √(n_s1 n_s2)`.
    pub gamma: f64,
    /// Magnitude of the discarded imaginary part.
    pub imag_residue: f64,
    /// Set when either signal occupation lies below the fragile threshold.
    pub fragile: bool,
}

impl Coherence {
    /// Evaluates the coherence from its numerator and the two occupations.
    pub fn from_parts(cross: Complex64, n_s1: f64, n_s2: f64, tol: &Tolerances) -> Result<Self> {
        if !(n_s1 > tol.occupation_floor && n_s2 > tol.occupation_floor) {
            return Err(Error::UndefinedCoherence { n_s1, n_s2 });
        }
        let value = Complex64::new(0.0, -1.0) * cross / (n_s1 * n_s2).sqrt();
        Ok(Coherence {
            gamma: value.re,
            imag_residue: value.im.abs(),
            fragile: n_s1.min(n_s2) < tol.fragile_occupation,
        })
    }
}

pub fn signal_coherence(m: &TransferMatrix) -> Result<Coherence> {
    signal_coherence_with(m, &Tolerances::DEFAULT)
}

pub fn signal_coherence_with(m: &TransferMatrix, tol: &Tolerances) -> Result<Coherence> {
    let moments = vacuum_moments(m);
    Coherence::from_parts(
        moments.signal_cross(),
        moments.b(Mode::S1),
        moments.b(Mode::S2),
        tol,
    )
}
