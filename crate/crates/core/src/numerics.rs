//! Small dense complex matrices.
//!
//! Everything here is sized for the 4x4 Bogoliubov matrices and the few
//! hundred dimensional Fock-space generators used by the oracle, so the
//! storage is a plain row-major `Vec` and products are straightforward
//! triple loops.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a square matrix from nested row arrays.
    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        Self::from_fn(N, N, |i, j| rows[i][j])
    }

    /// Builds a square matrix with real entries.
    pub fn from_real_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        Self::from_fn(N, N, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.mismatch(other));
        }
        Ok(())
    }

    fn mismatch(&self, other: &Self) -> Error {
        Error::DimensionMismatch {
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Matrix product `self · other`.
    pub fn mat_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(self.mismatch(other));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: v.len(),
                right_cols: 1,
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest element-wise distance; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.check_same_shape(other).is_err() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Inverse by LU with partial pivoting, rejecting ill-conditioned input.
    pub fn inverse(&self) -> Result<Self> {
        self.inverse_with(&Tolerances::DEFAULT)
    }

    pub fn inverse_with(&self, tol: &Tolerances) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let lu = Lu::factor(self)?;
        let inv = lu.solve(&Self::identity(self.rows));
        let condition = self.norm_one() * inv.norm_one();
        if !inv.is_finite() || !(condition <= tol.max_condition) {
            return Err(Error::Singular { condition });
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on non-conformable shapes; use [`ComplexMatrix::mat_mul`] when the
/// shapes are not fixed by construction.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.mat_mul(rhs).expect("non-conformable matrix product")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `P·A = L·U` packed in one matrix.
struct Lu {
    n: usize,
    packed: Vec<Complex64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows;
        let mut packed = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, packed[i * n + k].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs == 0.0 {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            if pivot_row != k {
                for j in 0..n {
                    packed.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = packed[k * n + k];
            for i in k + 1..n {
                let factor = packed[i * n + k] / pivot;
                packed[i * n + k] = factor;
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = packed[k * n + j];
                    packed[i * n + j] -= factor * u;
                }
            }
        }
        Ok(Lu { n, packed, perm })
    }

    /// Solves `A·X = B` for every column of `B`.
    fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let m = b.cols;
        let mut x = ComplexMatrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for j in 0..m {
            for i in 1..n {
                let mut acc = x[(i, j)];
                for k in 0..i {
                    acc -= self.packed[i * n + k] * x[(k, j)];
                }
                x[(i, j)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, j)];
                for k in i + 1..n {
                    acc -= self.packed[i * n + k] * x[(k, j)];
                }
                x[(i, j)] = acc / self.packed[i * n + i];
            }
        }
        x
    }
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm bounds below which the Padé approximant of each degree reaches
// unit roundoff in backward error.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential with the default tolerances.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    expm_with(a, &Tolerances::DEFAULT)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (Higham's degree selection).
pub fn expm_with(a: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.rows > tol.expm_max_dim {
        return Err(Error::DimensionCap {
            dim: a.rows,
            cap: tol.expm_max_dim,
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.rows;
    let norm = a.norm_one();
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let squarings = (norm / THETA13).log2().ceil().max(0.0) as u32;
        let scaled = a.scale_real(0.5f64.powi(squarings as i32));
        let (u, v) = pade13(&scaled);
        (u, v, squarings)
    };

    let numer = v.add(&u)?;
    let denom = v.sub(&u)?;
    let mut result = Lu::factor(&denom)?.solve(&numer);
    for _ in 0..squarings {
        result = &result * &result;
    }
    if !result.is_finite() {
        return Err(Error::NonFinite);
    }
    debug_assert_eq!(result.rows, n);
    Ok(result)
}

/// Odd part `U` and even part `V` of a Padé approximant of degree 3..9.
fn pade_low(a: &ComplexMatrix, b: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.rows;
    let a2 = a * a;
    let mut powers = vec![ComplexMatrix::identity(n), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut odd = ComplexMatrix::zeros(n, n);
    let mut even = ComplexMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        odd = accumulate(&odd, p, b[2 * k + 1]);
        even = accumulate(&even, p, b[2 * k]);
    }
    (a * &odd, even)
}

fn pade13(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let b = &PADE13;
    let n = a.rows;
    let ident = ComplexMatrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = accumulate(&accumulate(&a6.scale_real(b[13]), &a4, b[11]), &a2, b[9]);
    let mut u = &a6 * &inner_u;
    for (p, c) in [(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&ident, b[1])] {
        u = accumulate(&u, p, c);
    }
    let u = a * &u;

    let inner_v = accumulate(&accumulate(&a6.scale_real(b[12]), &a4, b[10]), &a2, b[8]);
    let mut v = &a6 * &inner_v;
    for (p, c) in [(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&ident, b[0])] {
        v = accumulate(&v, p, c);
    }
    (u, v)
}

/// `acc + c·p`
fn accumulate(acc: &ComplexMatrix, p: &ComplexMatrix, c: f64) -> ComplexMatrix {
    acc.zip_with(p, |x, y| x + y * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Taylor series summed until the terms stop contributing; only valid
    /// for modest norms, which is all the tests use it for.
    fn expm_series(a: &ComplexMatrix) -> ComplexMatrix {
        let n = a.rows();
        let mut sum = ComplexMatrix::identity(n);
        let mut term = ComplexMatrix::identity(n);
        for k in 1..200 {
            term = (&term * a).scale_real(1.0 / k as f64);
            sum = sum.add(&term).unwrap();
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    fn sample_matrix(seed: u64, n: usize, norm: f64) -> ComplexMatrix {
        // xorshift keeps this independent of the rand crate
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let m = ComplexMatrix::from_fn(n, n, |_, _| c(next(), next()));
        let scale = norm / m.norm_one();
        m.scale_real(scale)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&ComplexMatrix::zeros(4, 4)).unwrap();
        assert_eq!(e, ComplexMatrix::identity(4));
    }

    #[test]
    fn expm_of_imaginary_diagonal() {
        let theta = 0.7;
        let a =
            ComplexMatrix::from_rows([[c(0.0, theta), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, theta)]]);
        let e = expm(&a).unwrap();
        for i in 0..2 {
            assert!((e[(i, i)] - c(theta.cos(), theta.sin())).norm() < 1e-15);
        }
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_single_squeezer_block_matches_series() {
        // i·L·[[0, Γ], [−Γ, 0]] with Γ = 0.1, L = 1
        let g = 0.1;
        let a = ComplexMatrix::from_rows([[c(0.0, 0.0), c(0.0, g)], [c(0.0, -g), c(0.0, 0.0)]]);
        let e = expm(&a).unwrap();
        let series = expm_series(&a);
        assert!(e.max_abs_diff(&series) < 1e-15);
        // frozen from the series oracle: cosh(0.1), sinh(0.1)
        assert!((e[(0, 0)].re - 1.005_004_168_055_803_5).abs() < 1e-15);
        assert!((e[(0, 1)].norm() - 0.100_166_750_019_844_03).abs() < 1e-15);
    }

    #[test]
    fn expm_matches_series_for_each_pade_degree() {
        for (seed, norm) in [(1, 0.01), (2, 0.2), (3, 0.9), (4, 2.0), (5, 4.0), (6, 9.0)] {
            let a = sample_matrix(seed, 4, norm);
            let e = expm(&a).unwrap();
            let series = expm_series(&a);
            let rel = e.max_abs_diff(&series) / series.max_abs();
            assert!(rel < 1e-13, "norm {norm}: relative error {rel:e}");
        }
    }

    #[test]
    fn expm_rejects_bad_input() {
        assert!(matches!(
            expm(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        let mut nan = ComplexMatrix::zeros(2, 2);
        nan[(0, 1)] = c(f64::NAN, 0.0);
        assert_eq!(expm(&nan), Err(Error::NonFinite));
        let tol = Tolerances {
            expm_max_dim: 3,
            ..Tolerances::DEFAULT
        };
        assert!(matches!(
            expm_with(&ComplexMatrix::zeros(4, 4), &tol),
            Err(Error::DimensionCap { dim: 4, cap: 3 })
        ));
    }

    #[test]
    fn identity_product_and_adjoint_involution() {
        let a = sample_matrix(7, 4, 1.0);
        assert_eq!(&ComplexMatrix::identity(4) * &a, a);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn inverse_of_expm_is_expm_of_negation() {
        for seed in 10..20 {
            let a = sample_matrix(seed, 4, 1.0);
            let inv = expm(&a).unwrap().inverse().unwrap();
            let neg = expm(&a.scale_real(-1.0)).unwrap();
            assert!(inv.max_abs_diff(&neg) < 1e-12);
            let prod = &inv * &expm(&a).unwrap();
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-10);
        }
    }

    #[test]
    fn inverse_rejects_singular_and_mismatched() {
        let singular = ComplexMatrix::from_real_rows([[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(singular.inverse(), Err(Error::Singular { .. })));
        let nearly = ComplexMatrix::from_real_rows([[1.0, 1.0], [1.0, 1.0 + 1e-14]]);
        assert!(matches!(nearly.inverse(), Err(Error::Singular { .. })));
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            a.mat_mul(&a),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
