use std::f64::consts::PI;

use super::{CircleDiracFamily, TWO_PI};
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, zeros, CMatrix};
use crate::series::MatSeries;

/// Taylor coefficients of `exp(dt * A(s0 + h))` from those of `A`, read off the
/// first block row of the exponential of the block Toeplitz matrix.
fn exp_series(a: &[CMatrix], dt: f64) -> MatSeries {
    let f = a[0].nrows();
    let len = a.len();
    if len == 1 {
        return MatSeries::new(vec![(&a[0] * c64(dt, 0.0)).exp()]);
    }
    let mut big = zeros(f * len, f * len);
    for i in 0..len {
        for (j, aj) in a.iter().enumerate().take(len - i) {
            big.view_mut((i * f, (i + j) * f), (f, f)).copy_from(&(aj * c64(dt, 0.0)));
        }
    }
    let e = big.exp();
    MatSeries::new((0..len).map(|j| e.view((0, j * f), (f, f)).into_owned()).collect())
}

impl CircleDiracFamily {
    /// `-B_cell(s) - lambda G`.
    pub fn generator(&self, cell: usize, s: f64, lambda: f64) -> CMatrix {
        -self.potential(cell).eval(s) - self.clifford().g() * c64(lambda, 0.0)
    }

    fn check_arc(&self, ta: f64, tb: f64) -> Result<()> {
        let (lo, hi) = if ta < PI || (ta == PI && tb <= PI) { (0.0, PI) } else { (PI, TWO_PI) };
        if ta < lo || ta > hi {
            return Err(Error::Domain { value: ta, lo, hi });
        }
        if tb < ta || tb > hi {
            return Err(Error::Domain { value: tb, lo: ta, hi });
        }
        Ok(())
    }

    /// Cells met by `[ta, tb]` with the length spent in each, in order of `t`.
    fn pieces(&self, ta: f64, tb: f64) -> Vec<(usize, f64)> {
        self.cells()
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let len = tb.min(c.arc.1) - ta.max(c.arc.0);
                (len > 0.0).then_some((i, len))
            })
            .collect()
    }

    /// Solution operator `u(ta) -> u(tb)` of `P(s) u = lambda u` inside one arc.
    pub fn transfer(&self, s: f64, lambda: f64, ta: f64, tb: f64) -> Result<CMatrix> {
        self.check_arc(ta, tb)?;
        let mut t = identity(self.f());
        for (cell, len) in self.pieces(ta, tb) {
            t = (self.generator(cell, s, lambda) * c64(len, 0.0)).exp() * t;
        }
        Ok(t)
    }

    /// Taylor coefficients in `s` of the transfer matrix at `s0`, up to `h^order`.
    pub fn transfer_jets(&self, s0: f64, lambda: f64, ta: f64, tb: f64, order: usize) -> Result<MatSeries> {
        self.check_arc(ta, tb)?;
        let f = self.f();
        let mut t = MatSeries::constant(identity(f), order + 1);
        for (cell, len) in self.pieces(ta, tb) {
            let mut a = self.potential(cell).taylor(s0, order + 1).into_coeffs();
            for m in a.iter_mut() {
                *m = -&*m;
            }
            a[0] -= self.clifford().g() * c64(lambda, 0.0);
            t = exp_series(&a, len).mul(&t);
        }
        Ok(t)
    }

    /// Transfer matrix and its `s`-derivative.
    pub fn transfer_with_derivative(&self, s: f64, lambda: f64, ta: f64, tb: f64) -> Result<(CMatrix, CMatrix)> {
        let j = self.transfer_jets(s, lambda, ta, tb, 1)?;
        Ok((j.coeff(0).clone(), j.coeff(1).clone()))
    }

    /// Transfer once around the circle starting at `y0`.
    pub fn monodromy(&self, s: f64, lambda: f64) -> CMatrix {
        let plus = self.transfer(s, lambda, 0.0, PI).expect("X+ is one arc");
        let minus = self.transfer(s, lambda, PI, TWO_PI).expect("X- is one arc");
        minus * plus
    }

    /// `u(t)` for the solution of `P(s) u = lambda u` on the circle cut at `y0`
    /// with `u(0) = v`.
    pub fn propagate(&self, s: f64, lambda: f64, v: &CMatrix, t: f64) -> Result<CMatrix> {
        if t <= PI {
            Ok(self.transfer(s, lambda, 0.0, t)? * v)
        } else {
            Ok(self.transfer(s, lambda, PI, t)? * self.transfer(s, lambda, 0.0, PI)? * v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac1d::{Cell, CliffordData};
    use crate::linalg::{frobenius, random_complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn five_cell_family() -> CircleDiracFamily {
        let a = vec![vec![0.3, 1.0], vec![0.0, 0.5, -0.2]];
        let b = vec![vec![0.1], vec![-0.4, 0.0, 0.7]];
        let c = vec![vec![-0.8, 0.2, 0.0, 0.3]];
        let cells = vec![
            Cell::new((0.0, 0.5), a.clone()),
            Cell::new((0.5, 1.0), c),
            Cell::new((1.0, PI), b.clone()),
            Cell::new((PI, 5.0), b),
            Cell::new((5.0, TWO_PI), a),
        ];
        CircleDiracFamily::new(CliffordData::standard(), cells, 0.25, (0.0, 1.0)).unwrap()
    }

    fn rk4(a: &CMatrix, len: f64, u: &CMatrix, steps: usize) -> CMatrix {
        let h = len / steps as f64;
        let mut u = u.clone();
        for _ in 0..steps {
            let k1 = a * &u;
            let k2 = a * (&u + &k1 * c64(0.5 * h, 0.0));
            let k3 = a * (&u + &k2 * c64(0.5 * h, 0.0));
            let k4 = a * (&u + &k3 * c64(h, 0.0));
            u += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0);
        }
        u
    }

    #[test]
    fn zero_potential_at_zero_energy_is_identity() {
        let fam = CircleDiracFamily::scalar_model(vec![], (0.0, 1.0)).unwrap();
        let t = fam.transfer(0.3, 0.0, 0.2, 2.9).unwrap();
        assert!(frobenius(&(t - identity(2))) < 1e-15);
    }

    #[test]
    fn transfer_matches_rk4() {
        let fam = five_cell_family();
        let (s, lambda) = (0.37, 0.8);
        let exact = fam.transfer(s, lambda, 0.2, PI).unwrap();
        let mut u = identity(2);
        for (cell, len) in fam.pieces(0.2, PI) {
            u = rk4(&fam.generator(cell, s, lambda), len, &u, 4000);
        }
        assert!(frobenius(&(exact - u)) < 1e-10);
    }

    #[test]
    fn single_cell_transfer_against_rk4() {
        let fam = CircleDiracFamily::scalar_model(vec![0.4, 1.0], (0.0, 1.0)).unwrap();
        let (s, lambda) = (0.2, -0.6);
        let exact = fam.transfer(s, lambda, 0.0, 2.5).unwrap();
        let u = rk4(&fam.generator(0, s, lambda), 2.5, &identity(2), 2000);
        assert!(frobenius(&(exact - u)) < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fam = five_cell_family();
        let (s, lambda, h) = (0.4, 0.3, 1e-6);
        let (_, d) = fam.transfer_with_derivative(s, lambda, PI, TWO_PI).unwrap();
        let fd = (fam.transfer(s + h, lambda, PI, TWO_PI).unwrap() - fam.transfer(s - h, lambda, PI, TWO_PI).unwrap())
            * c64(0.5 / h, 0.0);
        assert!(frobenius(&(&d - &fd)) <= 1e-6 * frobenius(&d).max(1.0));
    }

    #[test]
    fn jets_reproduce_nearby_values() {
        let fam = five_cell_family();
        let jets = fam.transfer_jets(0.5, 0.0, 0.0, PI, 10).unwrap();
        for h in [0.05, -0.05] {
            let exact = fam.transfer(0.5 + h, 0.0, 0.0, PI).unwrap();
            assert!(frobenius(&(jets.eval(h) - exact)) < 1e-10);
        }
    }

    #[test]
    fn transfer_rejects_cut_crossing() {
        let fam = five_cell_family();
        assert!(matches!(fam.transfer(0.0, 0.0, 3.0, 3.5), Err(Error::Domain { .. })));
        assert!(fam.transfer(0.0, 0.0, PI, 3.5).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_complex(2, 1, &mut rng);
        let round = fam.propagate(0.2, 0.0, &v, TWO_PI).unwrap();
        assert!(frobenius(&(round - fam.monodromy(0.2, 0.0) * &v)) < 1e-12);
    }
}
