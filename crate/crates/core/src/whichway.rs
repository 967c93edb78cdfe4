//! First-order single-pair picture of a Zou scheme, and the which-way
//! measurement on the idlers that tells the two signal paths apart.
//!
//! Kets are written `|n_s1 n_i1 n_s2 n_i2⟩`. To first order in the
//! squeezings the scheme emits
//!
//! ```text
//! g4|1001⟩ + g5|0110⟩ + i g1|1100⟩ + i g2|0011⟩
//! ```
//!
//! Given a signal photon in `s1` the idlers are left in `(i g1, g4)`, given
//! one in `s2` they are left in `(g5, i g2)`, both in the idler basis
//! `(|10⟩_i, |01⟩_i)`. The overlap of the two conditional idler states is
//! what decides the signal coherence, and it is carried by the plane vectors
//! `u = (g1, g4)` and `v = (g5, −g2)`.
//!
//! The state is left unnormalized, as it comes out of the expansion.
//! Probabilities are always taken relative to its norm.

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::decompose::{OuScheme, ZouScheme};
use crate::error::{Error, Result};

/// Single-pair amplitudes, in mode order `(s1, i1, s2, i2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    pub c_1001: Complex64,
    pub c_0110: Complex64,
    pub c_1100: Complex64,
    pub c_0011: Complex64,
}

impl PairState {
    pub fn norm_sqr(&self) -> f64 {
        self.as_array().iter().map(|c| c.norm_sqr()).sum()
    }

    /// Amplitudes in the order `|1001⟩, |0110⟩, |1100⟩, |0011⟩`.
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.c_1001, self.c_0110, self.c_1100, self.c_0011]
    }

    /// Idler state left behind when the signal photon is in `s1`.
    pub fn idler_given_s1(&self) -> [Complex64; 2] {
        [self.c_1100, self.c_1001]
    }

    /// Idler state left behind when the signal photon is in `s2`.
    pub fn idler_given_s2(&self) -> [Complex64; 2] {
        [self.c_0110, self.c_0011]
    }

    /// `|⟨self|other⟩|` of the normalized states. Insensitive to global phase.
    pub fn overlap(&self, other: &PairState) -> f64 {
        let inner: Complex64 = self
            .as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        inner.norm() / (self.norm_sqr() * other.norm_sqr()).sqrt()
    }

    /// Signal coherence of the pair state itself, `−i⟨a_s1† a_s2⟩/√(n1 n2)`.
    pub fn coherence(&self) -> Result<f64> {
        let [a1, a2] = self.idler_given_s1();
        let [b1, b2] = self.idler_given_s2();
        let n1 = a1.norm_sqr() + a2.norm_sqr();
        let n2 = b1.norm_sqr() + b2.norm_sqr();
        if n1 == 0.0 || n2 == 0.0 {
            return Err(Error::UndefinedCoherence { n_s1: n1, n_s2: n2 });
        }
        let cross = a1.conj() * b1 + a2.conj() * b2;
        Ok((Complex64::new(0.0, -1.0) * cross).re / (n1 * n2).sqrt())
    }
}

pub fn pair_state(s: &ZouScheme) -> Result<PairState> {
    if s.as_array().iter().all(|&g| g == 0.0) {
        return Err(Error::AllZero);
    }
    Ok(PairState {
        c_1001: Complex64::new(s.g4(), 0.0),
        c_0110: Complex64::new(s.g5(), 0.0),
        c_1100: Complex64::new(0.0, s.g1()),
        c_0011: Complex64::new(0.0, s.g2()),
    })
}

/// Relative orientation of `u = (g1, g4)` and `v = (g5, −g2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhichWayGeometry {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub dot: f64,
    /// `u_x v_y − u_y v_x`
    pub cross: f64,
    /// Oriented angle from `u` to `v`, in `(−π, π]`.
    pub angle: f64,
    /// `(u·v)² / (u² v²)`, or 1 when one vector vanishes.
    pub gamma_sq: f64,
    /// One of `u`, `v` is zero, so only one signal path is populated.
    pub degenerate: bool,
}

impl WhichWayGeometry {
    /// `|u·v| / (|u||v|)`, zero when degenerate.
    pub fn normalized_dot(&self) -> f64 {
        let n = norm2(self.u) * norm2(self.v);
        if n == 0.0 {
            0.0
        } else {
            self.dot.abs() / n
        }
    }

    /// `|u×v| / (|u||v|)`, zero when degenerate.
    pub fn normalized_cross(&self) -> f64 {
        let n = norm2(self.u) * norm2(self.v);
        if n == 0.0 {
            0.0
        } else {
            self.cross.abs() / n
        }
    }
}

fn norm2(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

/// Geometry of the scheme. Fails only when both vectors vanish.
pub fn geometry(s: &ZouScheme) -> Result<WhichWayGeometry> {
    let u = [s.g1(), s.g4()];
    let v = [s.g5(), -s.g2()];
    let uu = u[0] * u[0] + u[1] * u[1];
    let vv = v[0] * v[0] + v[1] * v[1];
    if uu == 0.0 && vv == 0.0 {
        return Err(Error::DegenerateGeometry("u and v are both zero"));
    }
    let dot = u[0] * v[0] + u[1] * v[1];
    let cross = u[0] * v[1] - u[1] * v[0];
    let degenerate = uu == 0.0 || vv == 0.0;
    let gamma_sq = if degenerate {
        1.0
    } else {
        (dot * dot / (uu * vv)).min(1.0)
    };
    let mut angle = cross.atan2(dot);
    if angle == -std::f64::consts::PI {
        angle = std::f64::consts::PI;
    }
    Ok(WhichWayGeometry {
        u,
        v,
        dot,
        cross,
        angle,
        gamma_sq,
        degenerate,
    })
}

/// Outcome statistics of the idler measurement `|φ1⟩⟨φ1| − |φ2⟩⟨φ2|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhichWayMeasurement {
    /// `sin φ = g4/|u|`, `cos φ = g1/|u|`.
    pub phi: f64,
    pub p1: f64,
    pub p2: f64,
    /// Normalized signal state in `(|10⟩_s, |01⟩_s)` after outcome `φ1`,
    /// `None` when that outcome cannot occur.
    pub signal_given_1: Option<[Complex64; 2]>,
    pub signal_given_2: Option<[Complex64; 2]>,
}

impl WhichWayMeasurement {
    /// Idler eigenvectors `(φ1, φ2)` in `(|10⟩_i, |01⟩_i)`.
    pub fn idler_basis(&self) -> [[Complex64; 2]; 2] {
        idler_basis(self.phi)
    }
}

fn idler_basis(phi: f64) -> [[Complex64; 2]; 2] {
    let (sin, cos) = phi.sin_cos();
    [
        [Complex64::new(sin, 0.0), Complex64::new(0.0, cos)],
        [Complex64::new(0.0, cos), Complex64::new(sin, 0.0)],
    ]
}

/// Below this conditional probability the post-measurement state is not formed.
const NEGLIGIBLE_OUTCOME: f64 = 1e-20;

/// Projects the idlers of `ps` onto the eigenvectors fixed by `s`.
///
/// `ps` is normally `pair_state(s)`. The printed decomposition of the state
/// in this basis drops an overall factor of `|u|`, so probabilities here
/// come from the state norm rather than from those coefficients.
pub fn ideal_measurement(s: &ZouScheme, ps: &PairState) -> Result<WhichWayMeasurement> {
    if s.g1() == 0.0 && s.g4() == 0.0 {
        return Err(Error::DegenerateGeometry(
            "u is zero, the measurement basis is undefined",
        ));
    }
    let total = ps.norm_sqr();
    if total == 0.0 {
        return Err(Error::AllZero);
    }
    let phi = s.g4().atan2(s.g1());
    let basis = idler_basis(phi);
    let chi1 = ps.idler_given_s1();
    let chi2 = ps.idler_given_s2();
    let project =
        |b: &[Complex64; 2], chi: &[Complex64; 2]| b[0].conj() * chi[0] + b[1].conj() * chi[1];

    let mut probs = [0.0; 2];
    let mut states = [None, None];
    for (k, b) in basis.iter().enumerate() {
        let amp = [project(b, &chi1), project(b, &chi2)];
        let weight = amp[0].norm_sqr() + amp[1].norm_sqr();
        probs[k] = weight / total;
        if probs[k] > NEGLIGIBLE_OUTCOME {
            let n = weight.sqrt();
            states[k] = Some([amp[0] / n, amp[1] / n]);
        }
    }
    Ok(WhichWayMeasurement {
        phi,
        p1: probs[0],
        p2: probs[1],
        signal_given_1: states[0],
        signal_given_2: states[1],
    })
}

/// Signal coherence of an Ou scheme from its squeezings and signal mixing.
pub fn ou_gamma(s: &OuScheme) -> Result<f64> {
    ou_gamma_with(s, &Tolerances::DEFAULT)
}

pub fn ou_gamma_with(s: &OuScheme, tol: &Tolerances) -> Result<f64> {
    let n1 = s.g1().sinh().powi(2);
    let n2 = s.g2().sinh().powi(2);
    let (sin, cos) = s.phi_s().sin_cos();
    let big1 = n1 * cos * cos + n2 * sin * sin;
    let big2 = n1 * sin * sin + n2 * cos * cos;
    if !(big1 > tol.occupation_floor && big2 > tol.occupation_floor) {
        return Err(Error::UndefinedCoherence {
            n_s1: big1,
            n_s2: big2,
        });
    }
    Ok((n1 - n2) * (2.0 * s.phi_s()).sin() / (4.0 * big1 * big2).sqrt())
}
