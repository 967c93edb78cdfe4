//! Brute-force check of the Gaussian results: the vacuum is evolved under
//! the interaction generator in a truncated four-mode Fock space.
//!
//! Kets are `|n_s1 n_i1 n_s2 n_i2⟩` with every `n ≤ n_max`. The generator
//!
//! ```text
//! G = Γ1 (a_s1† a_i1† + a_s1 a_i1) + Γ2 (a_s2† a_i2† + a_s2 a_i2)
//!   + κ (a_i1 a_i2† + a_i1† a_i2)
//! ```
//!
//! preserves `n_s1 + n_s2 − n_i1 − n_i2`. The vacuum therefore never leaves
//! the sector where that difference is zero, and [`evolve`] exponentiates
//! only that block (85 kets instead of 625 at the default cutoff).

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::device::ContinuousDevice;
use crate::error::{Error, Result};
use crate::moments::{Coherence, Intensities};
use crate::numerics::{expm_with, ComplexMatrix};
use crate::whichway::PairState;

pub const DEFAULT_N_MAX: usize = 4;

/// Occupation numbers in the order `(s1, i1, s2, i2)`.
pub type Occupations = [usize; 4];

const S1: usize = 0;
const I1: usize = 1;
const S2: usize = 2;
const I2: usize = 3;

/// All kets with every occupation at most `n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    n_max: usize,
}

impl FockBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::CutoffTooSmall { n_max });
        }
        Ok(FockBasis { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn size(&self) -> usize {
        (self.n_max + 1).pow(4)
    }

    pub fn index(&self, n: Occupations) -> Option<usize> {
        let d = self.n_max + 1;
        if n.iter().any(|&k| k > self.n_max) {
            return None;
        }
        Some(((n[0] * d + n[1]) * d + n[2]) * d + n[3])
    }

    pub fn occupations(&self, index: usize) -> Occupations {
        let d = self.n_max + 1;
        assert!(
            index < self.size(),
            "ket index {index} outside basis of size {}",
            self.size()
        );
        [
            index / (d * d * d),
            index / (d * d) % d,
            index / d % d,
            index % d,
        ]
    }

    fn is_boundary(&self, n: Occupations) -> bool {
        n.contains(&self.n_max)
    }
}

impl Default for FockBasis {
    fn default() -> Self {
        FockBasis {
            n_max: DEFAULT_N_MAX,
        }
    }
}

/// Amplitudes over a whole [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    basis: FockBasis,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn vacuum(basis: &FockBasis) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.size()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        FockState {
            basis: basis.clone(),
            amplitudes,
        }
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: Occupations) -> Complex64 {
        self.basis
            .index(n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Population on kets where some mode sits at the cutoff.
    pub fn leakage(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.basis.is_boundary(self.basis.occupations(*i)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// The four one-pair amplitudes, with the vacuum and multi-pair parts dropped.
    pub fn single_pair_component(&self) -> PairState {
        PairState {
            c_1001: self.amplitude([1, 0, 0, 1]),
            c_0110: self.amplitude([0, 1, 1, 0]),
            c_1100: self.amplitude([1, 1, 0, 0]),
            c_0011: self.amplitude([0, 0, 1, 1]),
        }
    }
}

/// Calls `f(target, coefficient)` for every non-zero `⟨target|G|n⟩`.
fn for_each_transition(
    dev: &ContinuousDevice,
    n_max: usize,
    n: Occupations,
    mut f: impl FnMut(Occupations, f64),
) {
    let sq = |k: usize| (k as f64).sqrt();
    let mut pair = |a: usize, b: usize, coupling: f64| {
        if coupling == 0.0 {
            return;
        }
        if n[a] < n_max && n[b] < n_max {
            let mut t = n;
            t[a] += 1;
            t[b] += 1;
            f(t, coupling * sq(n[a] + 1) * sq(n[b] + 1));
        }
        if n[a] > 0 && n[b] > 0 {
            let mut t = n;
            t[a] -= 1;
            t[b] -= 1;
            f(t, coupling * sq(n[a]) * sq(n[b]));
        }
    };
    pair(S1, I1, dev.gamma1());
    pair(S2, I2, dev.gamma2());

    let kappa = dev.kappa();
    if kappa != 0.0 {
        for (from, to) in [(I1, I2), (I2, I1)] {
            if n[from] > 0 && n[to] < n_max {
                let mut t = n;
                t[from] -= 1;
                t[to] += 1;
                f(t, kappa * sq(n[from]) * sq(n[to] + 1));
            }
        }
    }
}

/// Dense generator over the full truncated basis.
pub fn build_generator(dev: &ContinuousDevice, basis: &FockBasis) -> ComplexMatrix {
    let mut g = ComplexMatrix::zeros(basis.size(), basis.size());
    for col in 0..basis.size() {
        let n = basis.occupations(col);
        for_each_transition(dev, basis.n_max(), n, |t, c| {
            let row = basis.index(t).expect("transition stays inside the cutoff");
            g[(row, col)] += Complex64::new(c, 0.0);
        });
    }
    g
}

/// Kets of the vacuum sector, in basis order.
fn vacuum_sector(basis: &FockBasis) -> Vec<usize> {
    (0..basis.size())
        .filter(|&i| {
            let n = basis.occupations(i);
            n[S1] + n[S2] == n[I1] + n[I2]
        })
        .collect()
}

pub fn evolve(dev: &ContinuousDevice, basis: &FockBasis) -> Result<FockState> {
    evolve_with(dev, basis, &Tolerances::DEFAULT)
}

/// `exp(i G L)|vac⟩`. Fails when the cutoff population exceeds the limit.
pub fn evolve_with(
    dev: &ContinuousDevice,
    basis: &FockBasis,
    tol: &Tolerances,
) -> Result<FockState> {
    let sector = vacuum_sector(basis);
    let mut position = vec![usize::MAX; basis.size()];
    for (k, &i) in sector.iter().enumerate() {
        position[i] = k;
    }
    let dim = sector.len();
    let mut block = ComplexMatrix::zeros(dim, dim);
    for (col, &i) in sector.iter().enumerate() {
        for_each_transition(dev, basis.n_max(), basis.occupations(i), |t, c| {
            let row = position[basis.index(t).expect("transition stays inside the cutoff")];
            block[(row, col)] += Complex64::new(0.0, c * dev.length());
        });
    }
    let u = expm_with(&block, tol)?;

    let mut state = FockState::vacuum(basis);
    state.amplitudes[0] = Complex64::new(0.0, 0.0);
    for (row, &i) in sector.iter().enumerate() {
        // the vacuum is the first sector ket
        state.amplitudes[i] = u[(row, 0)];
    }
    let leakage = state.leakage();
    if leakage > tol.max_leakage {
        return Err(Error::LeakageTooLarge {
            leakage,
            limit: tol.max_leakage,
        });
    }
    Ok(state)
}

/// Expectation values read off a Fock state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockObservables {
    pub intensities: Intensities,
    /// `⟨a_s1† a_s2⟩`
    pub cross: Complex64,
}

impl FockObservables {
    pub fn coherence(&self) -> Result<Coherence> {
        self.coherence_with(&Tolerances::DEFAULT)
    }

    pub fn coherence_with(&self, tol: &Tolerances) -> Result<Coherence> {
        Coherence::from_parts(self.cross, self.intensities.s1, self.intensities.s2, tol)
    }
}

pub fn fock_observables(state: &FockState) -> FockObservables {
    let basis = state.basis();
    let mut n = [0.0; 4];
    let mut cross = Complex64::new(0.0, 0.0);
    for (i, a) in state.amplitudes().iter().enumerate() {
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        let p = a.norm_sqr();
        let occ = basis.occupations(i);
        for mode in 0..4 {
            n[mode] += p * occ[mode] as f64;
        }
        // a_s1† a_s2 |occ⟩ = √(n_s2 (n_s1+1)) |occ + s1 − s2⟩
        if occ[S2] > 0 && occ[S1] < basis.n_max() {
            let mut t = occ;
            t[S2] -= 1;
            t[S1] += 1;
            let factor = ((occ[S2] * (occ[S1] + 1)) as f64).sqrt();
            cross += state.amplitude(t).conj() * a * factor;
        }
    }
    FockObservables {
        intensities: Intensities {
            s1: n[S1],
            s2: n[S2],
            i1: n[I1],
            i2: n[I2],
        },
        cross,
    }
}
