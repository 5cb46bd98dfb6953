use std::f64::consts::PI;

use serde::Serialize;

use super::spectrum::scan_minima;
use super::{CircleDiracFamily, TWO_PI};
use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianCurve, LagrangianFrame, SampledFrames};
use crate::linalg::{
    block_diag, c64, eig_herm, identity, null_space, nullity, smallest_singular_value, spectral_norm, vstack, zeros,
    CMatrix, Frame,
};
use crate::maslov::{span_signatures, DoubledSpace, MaslovOptions};
use crate::path::MatrixPolynomial;
use crate::series::MatSeries;
use crate::sigflow::{find_degeneracies, partial_signatures, SignatureTable};

/// Relative size of `sigma_min(M - I)` below which the monodromy is taken to fix a vector.
const FIXED_TOL: f64 = 1e-9;

/// Largest isotropy defect of an orthonormalized Cauchy data span that is
/// attributed to rounding (it grows like `eps |T|` with the transfer norm).
const PROJECTION_LIMIT: f64 = 1e-6;

fn polynomial_about(series: &MatSeries, s0: f64) -> MatrixPolynomial {
    // coefficients in h = s - s0, re-expressed in s
    MatrixPolynomial::new(series.coeffs().to_vec()).expect("nonempty").reparametrize(-s0, 1.0)
}

impl CircleDiracFamily {
    /// Spanning matrices `[I; T+]` and `[T-; I]` of the Cauchy data spaces.
    pub fn cauchy_spans(&self, s: f64) -> (CMatrix, CMatrix) {
        let f = self.f();
        let plus = self.transfer(s, 0.0, 0.0, PI).expect("X+ is one arc");
        let minus = self.transfer(s, 0.0, PI, TWO_PI).expect("X- is one arc");
        (vstack(&identity(f), &plus), vstack(&minus, &identity(f)))
    }

    /// `H+(s)` and `H-(s)` in the boundary space.
    pub fn cauchy_data(&self, s: f64) -> Result<(LagrangianFrame, LagrangianFrame)> {
        let (p, m) = self.cauchy_spans(s);
        let sp = self.boundary_space().clone();
        Ok((
            LagrangianFrame::from_span_projected(sp.clone(), &p, PROJECTION_LIMIT)?,
            LagrangianFrame::from_span_projected(sp, &m, PROJECTION_LIMIT)?,
        ))
    }

    /// Truncated Taylor expansions at `s0` of the spanning matrices, as
    /// polynomials in `s`.
    pub fn cauchy_span_jets(&self, s0: f64, order: usize) -> Result<(MatrixPolynomial, MatrixPolynomial)> {
        let f = self.f();
        let plus = self.transfer_jets(s0, 0.0, 0.0, PI, order)?;
        let minus = self.transfer_jets(s0, 0.0, PI, TWO_PI, order)?;
        let id = MatSeries::constant(identity(f), order + 1);
        let stack = |top: &MatSeries, bottom: &MatSeries| {
            MatSeries::new(top.coeffs().iter().zip(bottom.coeffs()).map(|(a, b)| vstack(a, b)).collect())
        };
        Ok((polynomial_about(&stack(&id, &plus), s0), polynomial_about(&stack(&minus, &id), s0)))
    }

    /// The two Cauchy data curves sampled on `grid`.
    pub fn cauchy_curves(&self, grid: &[f64]) -> Result<(LagrangianCurve, LagrangianCurve)> {
        let mut plus = Vec::with_capacity(grid.len());
        let mut minus = Vec::with_capacity(grid.len());
        for &s in grid {
            let (p, m) = self.cauchy_data(s)?;
            plus.push(p);
            minus.push(m);
        }
        Ok((
            LagrangianCurve::sampled(SampledFrames::new(grid.to_vec(), plus)?)?,
            LagrangianCurve::sampled(SampledFrames::new(grid.to_vec(), minus)?)?,
        ))
    }

    /// `(|M+^H J_Y M+|, |M-^H J_Y M-|)` for the unnormalized spanning matrices,
    /// relative to `|M|^2`.
    pub fn lagrangian_defects(&self, s: f64) -> (f64, f64) {
        let (p, m) = self.cauchy_spans(s);
        let j = self.boundary_space().j();
        let rel = |x: &CMatrix| spectral_norm(&(x.adjoint() * j * x)) / spectral_norm(x).powi(2);
        (rel(&p), rel(&m))
    }

    /// Green's formula on `X+` for solutions of `P u = lambda_u u`, `P v = lambda_v v`:
    /// `(lambda_u - lambda_v) <u, v>_{X+}` against `-<J_Y u|_Y, v|_Y>`. Returns the
    /// mismatch relative to the size of the terms.
    pub fn green_stokes_residual(&self, s: f64, lambdas: (f64, f64), u0: &CMatrix, v0: &CMatrix) -> f64 {
        let (lu, lv) = lambdas;
        let mut u = u0.clone();
        let mut v = v0.clone();
        let mut inner = c64(0.0, 0.0);
        let f = self.f();
        for (cell, c) in self.cells().iter().enumerate() {
            if c.arc.0 >= PI {
                break;
            }
            let len = c.arc.1 - c.arc.0;
            let au = self.generator(cell, s, lu);
            let av = self.generator(cell, s, lv);
            // int_0^len exp(au^H r) exp(av r) dr from the block exponential
            let mut big = zeros(2 * f, 2 * f);
            big.view_mut((0, 0), (f, f)).copy_from(&(-au.adjoint() * c64(len, 0.0)));
            big.view_mut((0, f), (f, f)).copy_from(&(identity(f) * c64(len, 0.0)));
            big.view_mut((f, f), (f, f)).copy_from(&(&av * c64(len, 0.0)));
            let e = big.exp();
            let gram = (au.adjoint() * c64(len, 0.0)).exp() * e.view((0, f), (f, f));
            inner += (u.adjoint() * gram * &v)[(0, 0)];
            u = (&au * c64(len, 0.0)).exp() * u;
            v = (&av * c64(len, 0.0)).exp() * v;
        }
        let gu = vstack(u0, &u);
        let gv = vstack(v0, &v);
        let j = self.boundary_space().j();
        let boundary = ((j * &gu).adjoint() * &gv)[(0, 0)];
        let lhs = -inner * (lu - lv);
        let scale = 1.0 + boundary.norm() + lhs.norm() + gu.norm() * gv.norm();
        (lhs - boundary).norm() / scale
    }

    /// `sigma_min(M(s, 0) - I)` relative to `1 + |M|`.
    pub fn fixed_point_defect(&self, s: f64) -> f64 {
        let m = self.monodromy(s, 0.0);
        smallest_singular_value(&(&m - identity(self.f()))) / (1.0 + spectral_norm(&m))
    }

    /// `dim (H+(s) ∩ H-(s)) = dim ker (M(s, 0) - I)`.
    pub fn intersection_dim(&self, s: f64) -> usize {
        let m = self.monodromy(s, 0.0);
        nullity(&(&m - identity(self.f())), 1e3 * FIXED_TOL)
    }

    /// Parameters where `H+` and `H-` intersect, located by scanning the fixed-point
    /// defect of the monodromy; with the intersection dimension.
    pub fn boundary_degeneracies(&self, points: usize) -> Vec<(f64, usize)> {
        let (a, b) = self.s_domain();
        let defect = |s: f64| self.fixed_point_defect(s);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for (s, d) in scan_minima(&defect, a, b, points, 1e-13 * (b - a)) {
            if d <= FIXED_TOL {
                if out.last().is_some_and(|l| (s - l.0).abs() <= 1e-9 * (b - a)) {
                    continue;
                }
                out.push((s, self.intersection_dim(s).max(1)));
            }
        }
        out
    }

    /// Intersection dimension at generic parameters.
    pub fn generic_intersection_dim(&self) -> usize {
        let f = self.f();
        let eval = |s: f64| self.monodromy(s, 0.0) - identity(f);
        crate::roots::generic_nullity(&eval, self.s_domain(), 1e3 * FIXED_TOL)
    }

    /// Partial signatures of the pair `(H+, H-)` at `s0`, from exact Taylor
    /// coefficients of the spanning matrices; the reduction stops at `kmax`.
    pub fn boundary_signatures(&self, s0: f64, kmax: usize, opts: &MaslovOptions) -> Result<SignatureTable> {
        let d = DoubledSpace::new(self.boundary_space().clone())?;
        let f = self.f();
        let span = |len: usize| -> Result<MatSeries> {
            let order = len.max(1) - 1;
            let plus = self.transfer_jets(s0, 0.0, 0.0, PI, order)?;
            let minus = self.transfer_jets(s0, 0.0, PI, TWO_PI, order)?;
            let coeffs = (0..=order)
                .map(|k| {
                    let id = if k == 0 { identity(f) } else { zeros(f, f) };
                    block_diag(&vstack(&id, plus.coeff(k)), &vstack(minus.coeff(k), &id))
                })
                .collect();
            Ok(MatSeries::new(coeffs))
        };
        span_signatures(&span, s0, d.diagonal(), None, self.generic_intersection_dim(), kmax, opts)
    }
}

#[derive(Debug, Clone)]
pub struct KernelBoundaryOptions {
    /// Resolution of the discretized operator.
    pub n: usize,
    /// Discrete degeneracies within this distance of `s0` are attributed to it;
    /// `None` uses a twentieth of the domain, shrunk to stay clear of other degeneracies.
    pub radius: Option<f64>,
    pub tol: f64,
    /// Highest contact order the boundary reduction may reach.
    pub kmax: usize,
    pub maslov: MaslovOptions,
}

impl Default for KernelBoundaryOptions {
    fn default() -> Self {
        Self { n: 64, radius: None, tol: 1e-9, kmax: 24, maslov: MaslovOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelBoundaryReport {
    pub s0: f64,
    /// `dim Delta ∩ (H+ ⊕ H-)`.
    pub intersection_dim: usize,
    /// Total kernel dimension of the discrete degeneracies attributed to `s0`.
    pub operator_kernel_dim: usize,
    /// Discrete degeneracies attributed to `s0`.
    pub operator_points: Vec<f64>,
    /// Largest sine of the angle between a sampled boundary solution and the span
    /// of the eigenvectors of the discretized operator closest to zero.
    pub solution_residual: f64,
    pub boundary_table: SignatureTable,
    pub operator_table: SignatureTable,
    pub tables_equal: bool,
}

impl CircleDiracFamily {
    /// Solutions of `P(s0) u = 0` with `u|_Y = (g, g)` for `g` in `H+ ∩ H-`,
    /// sampled at the cell-centred grid of size `n` (columns, orthonormalized).
    pub fn kernel_solutions(&self, s0: f64, n: usize) -> Result<CMatrix> {
        let f = self.f();
        let m = self.monodromy(s0, 0.0);
        let vs = null_space(&(&m - identity(f)), 1e3 * FIXED_TOL * (1.0 + spectral_norm(&m)));
        let ts = super::grid_points(n);
        let mut out = zeros(f * n, vs.ncols());
        for c in 0..vs.ncols() {
            let v = vs.columns(c, 1).into_owned();
            for (j, &t) in ts.iter().enumerate() {
                let u = self.propagate(s0, 0.0, &v, t)?;
                out.view_mut((j * f, c), (f, 1)).copy_from(&u);
            }
        }
        Ok(Frame::orthonormalize(&out, 1e-12).into_basis())
    }

    /// Matches `Delta ∩ (H+(s0) ⊕ H-(s0))` with the kernel of the discretized
    /// operator near `s0` and compares the two signature tables.
    pub fn kernel_boundary_map(&self, s0: f64, opts: &KernelBoundaryOptions) -> Result<KernelBoundaryReport> {
        let (a, b) = self.s_domain();
        if s0 < a || s0 > b {
            return Err(Error::Domain { value: s0, lo: a, hi: b });
        }
        let intersection_dim = self.intersection_dim(s0);
        if intersection_dim == 0 {
            return Err(Error::Precondition(format!("H+ and H- are transversal at s = {s0}")));
        }
        let radius = match opts.radius {
            Some(r) => r,
            None => {
                let others = self.boundary_degeneracies(400);
                let nearest = others
                    .iter()
                    .map(|(s, _)| (s - s0).abs())
                    .filter(|d| *d > 1e-6 * (b - a))
                    .fold(f64::INFINITY, f64::min);
                (0.05 * (b - a)).min(0.5 * nearest)
            }
        };
        let path = self.discretize(opts.n)?;
        let seg = &path.segments()[0];
        let degs = find_degeneracies(seg, opts.tol)?;
        let near: Vec<(f64, usize)> = degs.points.iter().copied().filter(|(s, _)| (s - s0).abs() <= radius).collect();
        let operator_kernel_dim: usize = near.iter().map(|p| p.1).sum();
        if operator_kernel_dim != intersection_dim {
            return Err(Error::ModelInconsistency(format!(
                "at s = {s0}: boundary intersection has dimension {intersection_dim}, discretized kernel near it {operator_kernel_dim} (points {near:?})"
            )));
        }
        let tables = near.iter().map(|(s, _)| partial_signatures(seg, *s, opts.tol)).collect::<Result<Vec<_>>>()?;
        let operator_table = SignatureTable::merge(&tables, s0);
        let boundary_table = self.boundary_signatures(s0, opts.kmax, &opts.maslov)?;

        let sols = self.kernel_solutions(s0, opts.n)?;
        let eig = eig_herm(&path.eval(s0)?);
        let mut order: Vec<usize> = (0..eig.values.len()).collect();
        order.sort_by(|&i, &j| eig.values[i].abs().partial_cmp(&eig.values[j].abs()).unwrap());
        let near_vecs = crate::linalg::columns(eig.vectors.basis(), &order[..intersection_dim]);
        let proj = &near_vecs * near_vecs.adjoint();
        let solution_residual = (0..sols.ncols())
            .map(|c| {
                let x = sols.column(c).into_owned();
                (&x - &proj * &x).norm()
            })
            .fold(0.0, f64::max);

        let tables_equal = boundary_table.same_signatures(&operator_table);
        Ok(KernelBoundaryReport {
            s0,
            intersection_dim,
            operator_kernel_dim,
            operator_points: near.iter().map(|p| p.0).collect(),
            solution_residual,
            boundary_table,
            operator_table,
            tables_equal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn free_cauchy_data_are_the_diagonal() {
        let fam = CircleDiracFamily::scalar_model(vec![], (0.0, 1.0)).unwrap();
        let (p, m) = fam.cauchy_data(0.3).unwrap();
        assert_eq!(p.intersection_dim(&m, 1e-9), 2);
        assert_eq!(fam.intersection_dim(0.3), 2);
    }

    #[test]
    fn massive_model_is_transversal() {
        let fam = CircleDiracFamily::scalar_model(vec![0.4], (0.0, 1.0)).unwrap();
        let (p, m) = fam.cauchy_data(0.5).unwrap();
        assert_eq!(p.intersection_dim(&m, 1e-9), 0);
        assert_eq!(fam.intersection_dim(0.5), 0);
    }

    #[test]
    fn green_formula_holds() {
        let fam = CircleDiracFamily::scalar_model(vec![0.3, -1.0, 0.5], (0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (lu, lv) in [(0.0, 0.0), (0.7, -0.2), (1.3, 0.4)] {
            let u = random_complex(2, 1, &mut rng);
            let v = random_complex(2, 1, &mut rng);
            assert!(fam.green_stokes_residual(0.4, (lu, lv), &u, &v) < 1e-12);
        }
        let (dp, dm) = fam.lagrangian_defects(0.4);
        assert!(dp < 1e-12 && dm < 1e-12);
    }

    #[test]
    fn crossing_model_degeneracy_and_tables() {
        let fam = CircleDiracFamily::scalar_model(vec![-0.5, 1.0], (0.0, 1.0)).unwrap();
        let degs = fam.boundary_degeneracies(200);
        assert_eq!(degs.len(), 1);
        assert!((degs[0].0 - 0.5).abs() < 1e-9);
        assert_eq!(degs[0].1, 2);
        let rep = fam.kernel_boundary_map(degs[0].0, &KernelBoundaryOptions::default()).unwrap();
        assert_eq!(rep.intersection_dim, 2);
        assert!(rep.tables_equal, "{rep:?}");
        assert_eq!((rep.boundary_table.n_plus(1), rep.boundary_table.n_minus(1)), (1, 1));
        assert!(rep.solution_residual < 1e-8);
    }

    #[test]
    fn span_jets_match_values() {
        let fam = CircleDiracFamily::scalar_model(vec![0.1, 0.7, -0.3], (0.0, 1.0)).unwrap();
        let (p, _) = fam.cauchy_span_jets(0.4, 12).unwrap();
        let (exact, _) = fam.cauchy_spans(0.45);
        assert!(crate::linalg::frobenius(&(p.eval(0.45) - exact)) < 1e-10);
    }
}
