//! Analytic approximation of continuous (sampled) paths with fixed endpoints.
//!
//! The sampled path is read as its piecewise-linear interpolant `phi`, cut off
//! by a smooth step `chi` and convolved with the Gaussian
//! `sqrt(alpha/pi) exp(-alpha x^2)`. The convolution is fitted by a polynomial
//! on a Chebyshev grid and finally corrected by an affine term so that both
//! endpoint values are reproduced.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c64, spectral_norm, zeros, CMatrix, HermitianMatrix};
use crate::path::{MatrixPolyPath, SampledPath};

#[derive(Debug, Clone)]
pub struct MollifyOptions {
    pub max_degree: usize,
    pub fit_nodes: usize,
    pub check_points: usize,
}

impl Default for MollifyOptions {
    fn default() -> Self {
        Self { max_degree: 12, fit_nodes: 64, check_points: 401 }
    }
}

#[derive(Debug, Clone)]
pub struct Mollified {
    pub path: MatrixPolyPath,
    pub alpha: f64,
    pub degree: usize,
    /// Sup-norm distance to the piecewise-linear interpolant on the check grid.
    pub sup_error: f64,
}

fn bump_factor(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn smooth_step(u: f64) -> f64 {
    let a = bump_factor(u);
    let b = bump_factor(1.0 - u);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Smooth cutoff: 1 on `[0, 1]`, supported in `[-0.5, 1.5]`.
pub fn cutoff(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        1.0
    } else if t < 0.0 {
        smooth_step((t + 0.5) / 0.5)
    } else {
        smooth_step((1.5 - t) / 0.5)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let dp = {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    n as f64 * (z * q1 - q0) / (z * z - 1.0)
                };
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

struct Interpolant {
    grid: Vec<f64>,
    values: Vec<CMatrix>,
}

impl Interpolant {
    fn eval(&self, t: f64) -> CMatrix {
        let g = &self.grid;
        if g.len() == 1 {
            return self.values[0].clone();
        }
        let j = g[1..g.len() - 1].iter().take_while(|&&x| t > x).count();
        let w = (t - g[j]) / (g[j + 1] - g[j]);
        &self.values[j] * c64(1.0 - w, 0.0) + &self.values[j + 1] * c64(w, 0.0)
    }
}

/// `phi_alpha(s)` by composite Gauss-Legendre quadrature, with panel breaks at
/// the interpolation kinks.
fn convolve(phi: &Interpolant, alpha: f64, s: f64, gl: &(Vec<f64>, Vec<f64>)) -> CMatrix {
    let width = 1.0 / alpha.sqrt();
    let lo = (s - 9.0 * width).max(-0.5);
    let hi = (s + 9.0 * width).min(1.5);
    let n = phi.values[0].nrows();
    let mut acc = zeros(n, n);
    if hi <= lo {
        return acc;
    }
    let mut breaks = vec![lo, hi, 0.0, 1.0];
    breaks.extend(phi.grid.iter().copied());
    let panels = 48;
    breaks.extend((1..panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64));
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let norm = (alpha / std::f64::consts::PI).sqrt();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in gl.0.iter().zip(gl.1.iter()) {
            let t = mid + half * x;
            let k = norm * (-alpha * (s - t) * (s - t)).exp() * cutoff(t) * wt * half;
            if k != 0.0 {
                acc += phi.eval(t) * c64(k, 0.0);
            }
        }
    }
    acc
}

/// Monomial coefficients (in `s`) of the shifted Chebyshev polynomials `T_k(2s - 1)`.
fn shifted_chebyshev_monomials(d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
    if d >= 1 {
        out.push(vec![-1.0, 2.0]);
    }
    for k in 2..=d {
        let prev = &out[k - 1];
        let prev2 = &out[k - 2];
        let mut next = vec![0.0; k + 1];
        for (j, &c) in prev.iter().enumerate() {
            next[j] -= 2.0 * c;
            next[j + 1] += 4.0 * c;
        }
        for (j, &c) in prev2.iter().enumerate() {
            next[j] -= c;
        }
        out.push(next);
    }
    out
}

fn chebyshev_values(x: f64, d: usize) -> Vec<f64> {
    let mut t = vec![1.0; d + 1];
    if d >= 1 {
        t[1] = x;
    }
    for k in 2..=d {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t
}

fn horner(coeffs: &[CMatrix], s: f64) -> CMatrix {
    let n = coeffs[0].nrows();
    let mut acc = zeros(n, n);
    for c in coeffs.iter().rev() {
        acc = acc * c64(s, 0.0) + c;
    }
    acc
}

/// Least-squares fit of degree `d` to matrix data at Chebyshev nodes, returned
/// as monomial coefficients in `s`.
fn fit(nodes: &[f64], data: &[CMatrix], d: usize) -> Vec<CMatrix> {
    let n = data[0].nrows();
    let rows = nodes.len();
    let v = DMatrix::<f64>::from_fn(rows, d + 1, |i, k| chebyshev_values(2.0 * nodes[i] - 1.0, d)[k]);
    let y = DMatrix::<f64>::from_fn(rows, 2 * n * n, |i, c| {
        let z = data[i][(c / 2 % n, c / 2 / n)];
        if c % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let cheb = v.svd(true, true).solve(&y, 1e-14).expect("SVD solve with U and V");
    let mono = shifted_chebyshev_monomials(d);
    let mut out = vec![zeros(n, n); d + 1];
    for k in 0..=d {
        let ck = CMatrix::from_fn(n, n, |i, j| {
            let c = 2 * (i + j * n);
            c64(cheb[(k, c)], cheb[(k, c + 1)])
        });
        for (j, &m) in mono[k].iter().enumerate() {
            out[j] += &ck * c64(m, 0.0);
        }
    }
    out
}

fn validate(path: &SampledPath) -> Result<()> {
    let (a, b) = path.domain();
    if path.grid().len() > 1 && ((a - 0.0).abs() > 1e-12 || (b - 1.0).abs() > 1e-12) {
        return Err(Error::Precondition(format!("sampled path must be rescaled to [0, 1], got [{a}, {b}]")));
    }
    Ok(())
}

/// Mollifies with a fixed `alpha`, choosing the lowest polynomial degree whose
/// result lies within `2 epsilon` of the piecewise-linear interpolant.
pub fn mollify(path: &SampledPath, alpha: f64, epsilon: f64) -> Result<MatrixPolyPath> {
    mollify_with(path, alpha, epsilon, &MollifyOptions::default()).map(|m| m.path)
}

pub fn mollify_with(path: &SampledPath, alpha: f64, epsilon: f64, opts: &MollifyOptions) -> Result<Mollified> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Contract(format!("epsilon must be positive, got {epsilon}")));
    }
    validate(path)?;
    if path.grid().len() == 1 {
        let p = MatrixPolyPath::constant((0.0, 1.0), path.values()[0].clone())?;
        return Ok(Mollified { path: p, alpha, degree: 0, sup_error: 0.0 });
    }
    let phi = Interpolant { grid: path.grid().to_vec(), values: path.values().iter().map(|v| v.matrix().clone()).collect() };
    let gl = gauss_legendre(10);
    let m = opts.fit_nodes.max(opts.max_degree + 2);
    let nodes: Vec<f64> =
        (0..m).map(|i| 0.5 - 0.5 * (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos()).collect();
    let data: Vec<CMatrix> = nodes.iter().map(|&s| convolve(&phi, alpha, s, &gl)).collect();

    let mut checks: Vec<f64> = (0..opts.check_points).map(|i| i as f64 / (opts.check_points - 1) as f64).collect();
    checks.extend(path.grid().iter().copied());
    let targets: Vec<CMatrix> = checks.iter().map(|&s| phi.eval(s)).collect();
    let phi0 = path.values()[0].matrix().clone();
    let phi1 = path.values().last().unwrap().matrix().clone();

    let mut best = f64::INFINITY;
    for d in 0..=opts.max_degree {
        let mut coeffs = fit(&nodes, &data, d);
        if coeffs.len() < 2 {
            coeffs.push(zeros(phi0.nrows(), phi0.ncols()));
        }
        let e0 = &phi0 - horner(&coeffs, 0.0);
        let e1 = &phi1 - horner(&coeffs, 1.0);
        coeffs[0] += &e0;
        coeffs[1] += &e1 - &e0;
        let mut coeffs: Vec<CMatrix> = coeffs.iter().map(crate::linalg::hermitian_part).collect();
        coeffs[0] = phi0.clone();
        for _ in 0..4 {
            let r = crate::linalg::hermitian_part(&(&phi1 - horner(&coeffs, 1.0)));
            if r.norm() == 0.0 {
                break;
            }
            coeffs[1] += r;
        }
        let err = checks
            .iter()
            .zip(targets.iter())
            .map(|(&s, t)| spectral_norm(&(horner(&coeffs, s) - t)))
            .fold(0.0, f64::max);
        if err <= 2.0 * epsilon {
            let path = MatrixPolyPath::new((0.0, 1.0), coeffs.into_iter().map(|c| HermitianMatrix::from_hermitian_part(&c)).collect())?;
            return Ok(Mollified { path, alpha, degree: d, sup_error: err });
        }
        best = best.min(err);
    }
    Err(Error::Approximation { requested: 2.0 * epsilon, achieved: best })
}

/// Searches `alpha` over a geometric ladder and returns the first success.
pub fn mollify_auto(path: &SampledPath, epsilon: f64, opts: &MollifyOptions) -> Result<Mollified> {
    let mut best = f64::INFINITY;
    let mut alpha = 10.0;
    while alpha <= 1e7 {
        match mollify_with(path, alpha, epsilon, opts) {
            Ok(m) => return Ok(m),
            Err(Error::Approximation { achieved, .. }) => best = best.min(achieved),
            Err(e) => return Err(e),
        }
        alpha *= 4.0;
    }
    Err(Error::Approximation { requested: 2.0 * epsilon, achieved: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_linear(a0: &HermitianMatrix, a1: &HermitianMatrix, m: usize) -> SampledPath {
        let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let values = grid.iter().map(|&s| &(a1 * s) + a0).collect();
        SampledPath::new(grid, values).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let integral: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(-0.5), 0.0);
        assert_eq!(cutoff(1.6), 0.0);
        assert!(cutoff(-0.25) > 0.0 && cutoff(-0.25) < 1.0);
    }

    #[test]
    fn constant_path_stays_constant() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, -2.0]);
        let sp = sample_linear(&a, &HermitianMatrix::zeros(2), 5);
        let p = mollify(&sp, 100.0, 1e-6).unwrap();
        assert_eq!(p.degree(), 1);
        assert!(p.coeffs()[1].norm() < 1e-15);
        assert_eq!(p.coeffs()[0], a);
    }

    #[test]
    fn linear_path_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a0 = random_hermitian(3, &mut rng);
        let a1 = random_hermitian(3, &mut rng);
        let sp = sample_linear(&a0, &a1, 7);
        let p = mollify(&sp, 2.0e4, 0.5e-8).unwrap();
        for i in 0..=200 {
            let s = i as f64 / 200.0;
            let exact = a0.matrix() + a1.matrix() * c64(s, 0.0);
            assert!(spectral_norm(&(p.eval(s).unwrap().matrix() - exact)) <= 1e-8);
        }
    }

    #[test]
    fn endpoints_exact_and_failure_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let values: Vec<_> = grid.iter().map(|_| random_hermitian(2, &mut rng)).collect();
        let sp = SampledPath::new(grid, values.clone()).unwrap();
        let m = mollify_auto(&sp, 0.5, &MollifyOptions::default()).unwrap();
        let p = &m.path;
        assert!((p.eval(0.0).unwrap().matrix() - values[0].matrix()).norm() <= 1e-13);
        assert!((p.eval(1.0).unwrap().matrix() - values[5].matrix()).norm() <= 1e-13);
        assert!(m.sup_error <= 1.0);
        match mollify(&sp, 10.0, 1e-9) {
            Err(Error::Approximation { achieved, .. }) => assert!(achieved > 1e-9),
            other => panic!("expected approximation failure, got {other:?}"),
        }
    }

    #[test]
    fn single_sample_is_constant() {
        let a = HermitianMatrix::from_real_diagonal(&[3.0]);
        let sp = SampledPath::new(vec![0.0], vec![a.clone()]).unwrap();
        let p = mollify(&sp, 1.0, 1.0).unwrap();
        assert_eq!(p.degree(), 0);
        assert_eq!(p.coeffs()[0], a);
    }
}
