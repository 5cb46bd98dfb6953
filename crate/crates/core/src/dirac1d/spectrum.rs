use num_complex::Complex64;

use super::{CircleDiracFamily, TWO_PI};
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, nullity, smallest_singular_value, spectral_norm, zeros, CMatrix, HermitianMatrix};
use crate::path::{MatrixPolyPath, PiecewiseAnalyticPath};

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    /// Scan points per unit length of the window (at least 64 in total).
    pub density: f64,
    /// Width to which minima are located.
    pub tol: f64,
    /// `sigma_min(M - I) <= accept * (1 + |M|)` marks an eigenvalue.
    pub accept: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { density: 200.0, tol: 1e-11, accept: 1e-8 }
    }
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Local minima of `f` on a uniform scan of `[lo, hi]`, refined by golden
/// section; endpoints count when the scan is smallest there.
pub(crate) fn scan_minima(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize, tol: f64) -> Vec<(f64, f64)> {
    let n = points.max(8);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..=n {
        let left = if i == 0 { f64::INFINITY } else { ys[i - 1] };
        let right = if i == n { f64::INFINITY } else { ys[i + 1] };
        if ys[i] <= left && ys[i] < right || ys[i] < left && ys[i] <= right {
            let a = xs[i.saturating_sub(1)];
            let b = xs[(i + 1).min(n)];
            let (x, y) = golden_min(f, a, b, tol);
            // keep an exact endpoint if it is at least as good
            let (x, y) = if i == 0 && ys[0] <= y {
                (xs[0], ys[0])
            } else if i == n && ys[n] <= y {
                (xs[n], ys[n])
            } else {
                (x, y)
            };
            out.push((x, y));
        }
    }
    out
}

impl CircleDiracFamily {
    /// Eigenvalues of `P(s)` in `window` with multiplicities: the `lambda`
    /// where the monodromy has eigenvalue 1.
    pub fn spectrum_window(&self, s: f64, window: (f64, f64), opts: &SpectrumOptions) -> Result<Vec<(f64, usize)>> {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Contract(format!("invalid window [{lo}, {hi}]")));
        }
        let f = self.f();
        let defect = |lambda: f64| {
            let m = self.monodromy(s, lambda);
            smallest_singular_value(&(&m - identity(f))) / (1.0 + spectral_norm(&m))
        };
        let points = ((hi - lo) * opts.density).ceil().max(64.0) as usize;
        let mut out: Vec<(f64, usize)> = Vec::new();
        for (lambda, d) in scan_minima(&defect, lo, hi, points, opts.tol) {
            if d > 100.0 * opts.accept {
                continue;
            }
            if d > opts.accept {
                return Err(Error::Resolution(format!(
                    "eigenvalue candidate at {lambda} not resolved (defect {d:.2e})"
                )));
            }
            let m = self.monodromy(s, lambda);
            let mult = nullity(&(&m - identity(f)), 1e3 * opts.accept).max(1);
            if let Some(last) = out.last_mut() {
                if (lambda - last.0).abs() <= 10.0 * opts.tol.max(1e-9) {
                    last.1 = last.1.max(mult);
                    continue;
                }
            }
            out.push((lambda, mult));
        }
        Ok(out)
    }

    /// Hermitian matrix path of dimension `f n` approximating `P(s)`, written in
    /// the basis of values at the cell-centred grid. The derivative is the
    /// Fourier derivative tensored with `G`; the potential is the Galerkin
    /// projection of `G B(s, .)` onto the same trigonometric modes, using the
    /// exact Fourier coefficients of the piecewise constant cells.
    pub fn discretize(&self, n: usize) -> Result<PiecewiseAnalyticPath> {
        if n < 16 {
            return Err(Error::Contract(format!("discretization needs at least 16 points, got {n}")));
        }
        let f = self.f();
        let dim = f * n;
        let d = fourier_derivative(n);
        let g = self.clifford().g();
        let modes = wavenumbers(n);
        // synthesis: grid values from mode coefficients, tensored with the fiber
        let synth = fourier_synthesis(n);
        let mut big_synth = zeros(dim, dim);
        for j in 0..n {
            for m in 0..n {
                for a in 0..f {
                    big_synth[(j * f + a, m * f + a)] = synth[(j, m)];
                }
            }
        }
        // cell_coeff[c][k - kmin'] = (1/2π) ∫_cell e^{-ikt} dt for k = modes[j] - modes[l]
        let span = 2 * n - 1;
        let offset = n as i64 - 1;
        let cell_coeffs: Vec<Vec<Complex64>> = self
            .cells()
            .iter()
            .map(|cell| {
                let (lo, hi) = cell.arc;
                (0..span)
                    .map(|i| {
                        let k = i as i64 - offset;
                        if k == 0 {
                            c64((hi - lo) / TWO_PI, 0.0)
                        } else {
                            let kf = k as f64;
                            (Complex64::from_polar(1.0, -kf * hi) - Complex64::from_polar(1.0, -kf * lo))
                                / c64(0.0, -TWO_PI * kf)
                        }
                    })
                    .collect()
            })
            .collect();
        let degree = self.degree();
        let mut coeffs = Vec::with_capacity(degree + 1);
        for p in 0..=degree {
            // G B_p per cell, zero where the cell polynomial is shorter
            let blocks: Vec<CMatrix> = (0..self.cells().len())
                .map(|c| {
                    let pot = self.potential(c);
                    pot.coeffs().get(p).map(|b| g * b).unwrap_or_else(|| zeros(f, f))
                })
                .collect();
            let mut galerkin = zeros(dim, dim);
            for j in 0..n {
                for l in 0..n {
                    let idx = (modes[j] - modes[l] + offset) as usize;
                    let mut block = zeros(f, f);
                    for (c, b) in blocks.iter().enumerate() {
                        block += b * cell_coeffs[c][idx];
                    }
                    galerkin.view_mut((j * f, l * f), (f, f)).copy_from(&block);
                }
            }
            let mut m = &big_synth * galerkin * big_synth.adjoint();
            if p == 0 {
                for j in 0..n {
                    for l in 0..n {
                        if d[(j, l)] != Complex64::new(0.0, 0.0) {
                            let mut v = m.view_mut((j * f, l * f), (f, f));
                            v += g * d[(j, l)];
                        }
                    }
                }
            }
            coeffs.push(HermitianMatrix::from_hermitian_part(&m));
        }
        Ok(PiecewiseAnalyticPath::single(MatrixPolyPath::new(self.s_domain(), coeffs)?))
    }
}

/// Wavenumbers `-(n-1)/2 ..= n/2` used by the Fourier discretization.
pub fn wavenumbers(n: usize) -> Vec<i64> {
    let kmin = -(((n - 1) / 2) as i64);
    (0..n as i64).map(|j| kmin + j).collect()
}

/// Unitary matrix taking mode coefficients to values at the cell-centred grid.
pub fn fourier_synthesis(n: usize) -> CMatrix {
    let ts = grid_points(n);
    let modes = wavenumbers(n);
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |j, m| Complex64::from_polar(scale, modes[m] as f64 * ts[j]))
}

/// Cell-centred grid `t_j = (j + 1/2) 2π / n`.
pub fn grid_points(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) * TWO_PI / n as f64).collect()
}

/// Skew-Hermitian Fourier differentiation matrix on `n` equispaced points,
/// with wavenumbers `-n/2 + 1 ..= n/2` for even `n` and `-(n-1)/2 ..= (n-1)/2`
/// for odd `n`. Only constants are in its kernel.
pub fn fourier_derivative(n: usize) -> CMatrix {
    let h = TWO_PI / n as f64;
    let modes = wavenumbers(n);
    let mut d = zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let dt = (j as f64 - l as f64) * h;
            let mut acc = c64(0.0, 0.0);
            for &k in &modes {
                let kf = k as f64;
                acc += c64(0.0, kf) * Complex64::from_polar(1.0, kf * dt);
            }
            d[(j, l)] = acc / n as f64;
        }
    }
    d
}
