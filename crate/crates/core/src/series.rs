//! Truncated power series with matrix coefficients, `X(h) = sum_k X_k h^k`.

use crate::error::{Error, Result};
use crate::linalg::{c64, solve, zeros, CMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MatSeries {
    coeffs: Vec<CMatrix>,
}

impl MatSeries {
    /// `coeffs[k]` is the coefficient of `h^k`; the series is known modulo
    /// `h^{coeffs.len()}`.
    pub fn new(coeffs: Vec<CMatrix>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least one coefficient");
        let shape = coeffs[0].shape();
        assert!(coeffs.iter().all(|c| c.shape() == shape), "series coefficients differ in shape");
        Self { coeffs }
    }

    pub fn zeros(rows: usize, cols: usize, len: usize) -> Self {
        Self { coeffs: vec![zeros(rows, cols); len.max(1)] }
    }

    pub fn constant(m: CMatrix, len: usize) -> Self {
        let mut coeffs = vec![zeros(m.nrows(), m.ncols()); len.max(1)];
        coeffs[0] = m;
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nrows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn coeff(&self, k: usize) -> &CMatrix {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<CMatrix> {
        self.coeffs
    }

    pub fn truncate(&self, len: usize) -> Self {
        let len = len.clamp(1, self.len());
        Self { coeffs: self.coeffs[..len].to_vec() }
    }

    pub fn eval(&self, h: f64) -> CMatrix {
        let mut acc = zeros(self.nrows(), self.ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * c64(h, 0.0) + c;
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.adjoint()).collect() }
    }

    pub fn mul(&self, rhs: &MatSeries) -> Self {
        let len = self.len().min(rhs.len());
        let mut out = vec![zeros(self.nrows(), rhs.ncols()); len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            for (j, b) in rhs.coeffs.iter().enumerate().take(len - i) {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    pub fn left_mul(&self, m: &CMatrix) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| m * c).collect() }
    }

    pub fn right_mul(&self, m: &CMatrix) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * m).collect() }
    }

    pub fn add(&self, rhs: &MatSeries) -> Self {
        let len = self.len().min(rhs.len());
        Self { coeffs: (0..len).map(|k| &self.coeffs[k] + &rhs.coeffs[k]).collect() }
    }

    pub fn sub(&self, rhs: &MatSeries) -> Self {
        let len = self.len().min(rhs.len());
        Self { coeffs: (0..len).map(|k| &self.coeffs[k] - &rhs.coeffs[k]).collect() }
    }

    /// Multiplicative inverse; requires an invertible constant term.
    pub fn inverse(&self) -> Result<Self> {
        if self.nrows() != self.ncols() {
            return Err(Error::Contract("series inverse of a non-square series".into()));
        }
        let n = self.nrows();
        let x0_inv = solve(&self.coeffs[0], &crate::linalg::identity(n)).map_err(|_| Error::Singular("series inverse"))?;
        let mut out: Vec<CMatrix> = Vec::with_capacity(self.len());
        out.push(x0_inv.clone());
        for k in 1..self.len() {
            let mut acc = zeros(n, n);
            for j in 1..=k {
                acc += &self.coeffs[j] * &out[k - j];
            }
            out.push(-(&x0_inv * acc));
        }
        Ok(Self { coeffs: out })
    }

    /// Divides by `h`, assuming the constant term vanishes (it is dropped).
    pub fn shift_down(&self) -> Self {
        if self.len() <= 1 {
            return Self::zeros(self.nrows(), self.ncols(), 1);
        }
        Self { coeffs: self.coeffs[1..].to_vec() }
    }

    /// Restricts every coefficient to a block: `P^H X Q` for constant `P`, `Q`.
    pub fn compress(&self, p: &CMatrix, q: &CMatrix) -> Self {
        let pa = p.adjoint();
        Self { coeffs: self.coeffs.iter().map(|c| &pa * c * q).collect() }
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, random_complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_times_series_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut coeffs: Vec<CMatrix> = (0..6).map(|_| random_complex(3, 3, &mut rng)).collect();
        coeffs[0] += identity(3) * c64(3.0, 0.0);
        let x = MatSeries::new(coeffs);
        let prod = x.mul(&x.inverse().unwrap());
        assert!((prod.coeff(0) - identity(3)).norm() < 1e-12);
        for k in 1..6 {
            assert!(prod.coeff(k).norm() < 1e-11);
        }
    }

    #[test]
    fn eval_matches_horner() {
        let x = MatSeries::new(vec![identity(2), identity(2) * c64(2.0, 0.0), identity(2) * c64(-1.0, 0.0)]);
        let v = x.eval(0.5);
        assert!((v[(0, 0)].re - (1.0 + 1.0 - 0.25)).abs() < 1e-15);
    }
}
