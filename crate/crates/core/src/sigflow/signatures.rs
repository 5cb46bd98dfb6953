//! Root spaces, the derived forms `B_k` and partial signatures at a degeneracy.
//!
//! The filtration is computed by repeated Schur-complement reduction of the
//! Taylor series `X_0(h) = T(s0 + h)`. At level `j` the constant term of
//! `X_j` is the matrix of `B_j` in an orthonormal basis `E_j` of `W_j`. With
//! `U = [U_n, U_k]` splitting `X_j(0)` into its nondegenerate part and its
//! kernel, write `X_j` in that basis as `[[P, C], [C^H, A]]`; then
//! `Psi = U_n (-P^{-1} C) + U_k` satisfies `Psi^H X_j Psi = A - C^H P^{-1} C`,
//! which vanishes at `h = 0` and divided by `h` gives `X_{j+1}`. The product
//! `Phi_{j+1} = Psi_0 ... Psi_j` is a family of root functions of order
//! `>= j + 1` whose value at `h = 0` spans `W_{j+1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, columns, eig_herm, hermitian_defect, identity, inertia, zero_threshold, CMatrix, Frame, HermitianMatrix};
use crate::path::MatrixPolyPath;
use crate::roots::{rank_drops, RootOptions};
use crate::series::MatSeries;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignatureRow {
    pub k: usize,
    pub dim_w: usize,
    pub n_minus: usize,
    pub n_plus: usize,
    pub sigma: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureTable {
    pub s0: f64,
    pub kernel_dim: usize,
    pub rows: Vec<SignatureRow>,
    pub null_branch_dim: usize,
}

impl SignatureTable {
    pub fn empty(s0: f64) -> Self {
        Self { s0, kernel_dim: 0, rows: Vec::new(), null_branch_dim: 0 }
    }

    pub fn n_minus(&self, k: usize) -> usize {
        self.rows.iter().find(|r| r.k == k).map_or(0, |r| r.n_minus)
    }

    pub fn n_plus(&self, k: usize) -> usize {
        self.rows.iter().find(|r| r.k == k).map_or(0, |r| r.n_plus)
    }

    pub fn sigma(&self, k: usize) -> i64 {
        self.n_plus(k) as i64 - self.n_minus(k) as i64
    }

    /// Integer content only, with trailing all-zero rows ignored.
    pub fn same_signatures(&self, other: &SignatureTable) -> bool {
        let strip = |t: &SignatureTable| -> Vec<(usize, usize, usize, usize)> {
            let mut v: Vec<_> = t.rows.iter().map(|r| (r.k, r.dim_w, r.n_minus, r.n_plus)).collect();
            while v.last().is_some_and(|r| r.2 == 0 && r.3 == 0) {
                v.pop();
            }
            v
        };
        self.kernel_dim == other.kernel_dim && self.null_branch_dim == other.null_branch_dim && strip(self) == strip(other)
    }

    /// Branch multiset `(order, sign)` with sign `+1`/`-1`, sorted.
    pub fn branches(&self) -> Vec<(usize, i32)> {
        let mut out = Vec::new();
        for r in &self.rows {
            out.extend(std::iter::repeat((r.k, -1)).take(r.n_minus));
            out.extend(std::iter::repeat((r.k, 1)).take(r.n_plus));
        }
        out.sort();
        out
    }

    /// Combines tables of nearby degeneracies by adding branch counts.
    pub fn merge(tables: &[SignatureTable], s0: f64) -> SignatureTable {
        let kmax = tables.iter().flat_map(|t| t.rows.iter().map(|r| r.k)).max().unwrap_or(0);
        let kernel_dim: usize = tables.iter().map(|t| t.kernel_dim).sum();
        let null_branch_dim: usize = tables.iter().map(|t| t.null_branch_dim).sum();
        let mut rows = Vec::new();
        let mut dim_w = kernel_dim;
        for k in 1..=kmax {
            let n_minus: usize = tables.iter().map(|t| t.n_minus(k)).sum();
            let n_plus: usize = tables.iter().map(|t| t.n_plus(k)).sum();
            rows.push(SignatureRow { k, dim_w, n_minus, n_plus, sigma: n_plus as i64 - n_minus as i64 });
            dim_w -= n_minus + n_plus;
        }
        SignatureTable { s0, kernel_dim, rows, null_branch_dim }
    }

    /// Checks the internal bookkeeping of the table.
    pub fn check_invariants(&self) -> Result<()> {
        let mut w = self.kernel_dim;
        for (i, r) in self.rows.iter().enumerate() {
            if r.k != i + 1 || r.dim_w != w || r.sigma != r.n_plus as i64 - r.n_minus as i64 || r.n_plus + r.n_minus > w {
                return Err(Error::Contract(format!("inconsistent signature row {r:?}")));
            }
            w -= r.n_plus + r.n_minus;
        }
        if w != self.null_branch_dim {
            return Err(Error::Contract(format!("{w} dimensions unaccounted for, {} null branches", self.null_branch_dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LocalFlows {
    pub left: i64,
    pub right: i64,
    pub through: i64,
}

/// Flows on `[s0 - eps, s0]`, `[s0, s0 + eps]` and `[s0 - eps, s0 + eps]`.
pub fn local_flows(table: &SignatureTable) -> LocalFlows {
    let mut left = 0i64;
    let mut right = 0i64;
    let mut through = 0i64;
    for r in &table.rows {
        if r.k % 2 == 1 {
            left += r.n_plus as i64;
            through += r.sigma;
        } else {
            left += r.n_minus as i64;
        }
        right -= r.n_minus as i64;
    }
    debug_assert_eq!(through, left + right);
    LocalFlows { left, right, through }
}

/// One level of the filtration.
#[derive(Debug, Clone)]
pub struct RootSpace {
    pub k: usize,
    /// Orthonormal basis `E_k` of `W_k`.
    pub frame: Frame,
    /// `jets[r]` holds `u^{(r)}(s0)` for the basis root functions (`r = 0..=k`);
    /// `jets[0] = E_k`.
    pub jets: Vec<CMatrix>,
    /// Matrix of `B_k` in the basis `E_k`.
    pub form: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub kernel_dim: usize,
    pub levels: Vec<RootSpace>,
    pub null_branch_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ReductionOptions {
    pub tol: f64,
    pub kmax: usize,
    pub generic_nullity: usize,
}

fn hermitian_series(x: &MatSeries) -> MatSeries {
    MatSeries::new(x.coeffs().iter().map(crate::linalg::hermitian_part).collect())
}

/// Runs the reduction on the series supplied by `series(len)`, doubling the
/// truncation length whenever the levels consume it.
pub fn reduce(series: &dyn Fn(usize) -> Result<MatSeries>, opts: &ReductionOptions) -> Result<Reduction> {
    let mut len = 8usize;
    loop {
        match reduce_once(&series(len)?, opts)? {
            Some(r) => return Ok(r),
            None => len *= 2,
        }
        if len > 4 * opts.kmax + 64 {
            return Err(Error::Stabilization { kmax: opts.kmax, remaining: 0, expected_null: opts.generic_nullity });
        }
    }
}

fn reduce_once(t: &MatSeries, opts: &ReductionOptions) -> Result<Option<Reduction>> {
    let n = t.nrows();
    let len = t.len();
    let g = opts.generic_nullity;
    let mut x = hermitian_series(t);
    let mut phi = MatSeries::constant(identity(n), len);
    let mut levels: Vec<RootSpace> = Vec::new();
    let mut kernel_dim = 0;
    let mut level = 0usize;
    loop {
        let x0 = HermitianMatrix::from_hermitian_part(x.coeff(0));
        let eig = eig_herm(&x0);
        let thr = zero_threshold(&eig.values, opts.tol);
        let nk: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() > thr).collect();
        let kk: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() <= thr).collect();
        if let Some(prev) = levels.last_mut() {
            prev.form = x0.clone();
        } else {
            kernel_dim = kk.len();
        }
        if kk.len() <= g || kk.is_empty() {
            let null = kk.len();
            return Ok(Some(Reduction { kernel_dim, levels, null_branch_dim: null }));
        }
        if level >= opts.kmax {
            return Err(Error::Stabilization { kmax: opts.kmax, remaining: kk.len(), expected_null: g });
        }
        if x.len() < 3 || phi.len() < level + 3 {
            return Ok(None);
        }
        let u = eig.vectors.basis();
        let un = columns(u, &nk);
        let uk = columns(u, &kk);
        let p = x.compress(&un, &un);
        let c = x.compress(&un, &uk);
        let a = x.compress(&uk, &uk);
        let (psi, r) = if nk.is_empty() {
            (MatSeries::constant(uk.clone(), x.len()), a)
        } else {
            let pinv = p.inverse()?;
            let y = pinv.mul(&c); // P^{-1} C
            let psi = MatSeries::constant(uk.clone(), x.len()).sub(&y.left_mul(&un));
            let r = a.sub(&c.adjoint().mul(&y));
            (psi, r)
        };
        phi = phi.mul(&psi);
        x = hermitian_series(&r.shift_down());
        level += 1;
        let frame = Frame::new_unchecked(phi.coeff(0).clone());
        let mut fact = 1.0;
        let jets: Vec<CMatrix> = (0..=level.min(phi.len() - 1))
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                phi.coeff(r) * c64(fact, 0.0)
            })
            .collect();
        let q = frame.rank();
        levels.push(RootSpace { k: level, frame, jets, form: HermitianMatrix::zeros(q) });
    }
}

fn table_from_reduction(s0: f64, red: &Reduction, tol: f64) -> SignatureTable {
    let mut rows = Vec::new();
    for lvl in &red.levels {
        let vals = crate::linalg::eigenvalues_herm(&lvl.form);
        let thr = zero_threshold(&vals, tol);
        let (neg, _, pos) = inertia(&vals, thr);
        rows.push(SignatureRow { k: lvl.k, dim_w: lvl.frame.rank(), n_minus: neg, n_plus: pos, sigma: pos as i64 - neg as i64 });
    }
    SignatureTable { s0, kernel_dim: red.kernel_dim, rows, null_branch_dim: red.null_branch_dim }
}

/// Partial signatures from a Taylor-series provider.
pub fn signatures_from_series(
    s0: f64,
    series: &dyn Fn(usize) -> Result<MatSeries>,
    opts: &ReductionOptions,
) -> Result<SignatureTable> {
    let red = reduce(series, opts)?;
    Ok(table_from_reduction(s0, &red, opts.tol))
}

fn path_options(path: &MatrixPolyPath, tol: f64) -> ReductionOptions {
    let eval = |s: f64| path.polynomial().eval(s);
    let g = crate::roots::generic_nullity(&eval, path.domain(), tol);
    ReductionOptions { tol, kmax: path.degree() * path.dim() + 1, generic_nullity: g }
}

/// `W_1 ⊇ ... ⊇ W_kmax` with jets of basis root functions.
pub fn root_spaces(path: &MatrixPolyPath, s0: f64, kmax: usize, tol: f64) -> Result<Vec<RootSpace>> {
    if kmax == 0 {
        return Err(Error::Contract("kmax must be at least 1".into()));
    }
    let k0 = crate::linalg::kernel(&path.eval(s0)?, tol)?;
    if k0.rank() == 0 {
        return Err(Error::Precondition(format!("T({s0}) has trivial kernel")));
    }
    let mut opts = path_options(path, tol);
    opts.kmax = kmax;
    let series = |len: usize| path.taylor(s0, len);
    match reduce(&series, &opts) {
        Ok(red) => {
            let mut levels = red.levels;
            levels.truncate(kmax);
            Ok(levels)
        }
        Err(e) => Err(e),
    }
}

/// Matrix of `B_k(u0, v0) = (1/k!) <(T u)^{(k)}(s0), v0>` in the basis of `space`.
pub fn bilinear_form(path: &MatrixPolyPath, s0: f64, k: usize, space: &RootSpace, tol: f64) -> Result<HermitianMatrix> {
    if space.jets.len() < k + 1 {
        return Err(Error::Contract(format!("need jets up to order {k}, have {}", space.jets.len() - 1)));
    }
    let t = path.taylor(s0, k + 1)?;
    let n = path.dim();
    let q = space.frame.rank();
    let mut fact = vec![1.0; k + 1];
    for r in 1..=k {
        fact[r] = fact[r - 1] * r as f64;
    }
    // Taylor coefficient of h^r in T(s0 + h) u(s0 + h)
    let coeff = |r: usize| -> CMatrix {
        let mut acc = CMatrix::zeros(n, q);
        for i in 0..=r {
            acc += t.coeff(i) * &space.jets[r - i] * c64(1.0 / fact[r - i], 0.0);
        }
        acc
    };
    let scale = t.max_coeff_norm().max(1.0);
    for r in 0..k {
        let res = coeff(r).norm();
        if res > 1e3 * tol * scale {
            return Err(Error::Contract(format!("jets do not solve the recursion at order {r} (residual {res:.3e})")));
        }
    }
    let b = space.jets[0].adjoint() * coeff(k);
    let defect = hermitian_defect(&b);
    if defect > 1e-9 * b.norm().max(1.0) {
        return Err(Error::Contract(format!("B_{k} is not Hermitian (defect {defect:.3e})")));
    }
    Ok(HermitianMatrix::from_hermitian_part(&b))
}

pub fn partial_signatures(path: &MatrixPolyPath, s0: f64, tol: f64) -> Result<SignatureTable> {
    let opts = path_options(path, tol);
    path.eval(s0)?;
    let series = |len: usize| path.taylor(s0, len);
    signatures_from_series(s0, &series, &opts)
}

/// Degeneracies of one polynomial segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracies {
    pub domain: (f64, f64),
    pub points: Vec<(f64, usize)>,
    pub null_branch_dim: usize,
}

pub fn find_degeneracies(path: &MatrixPolyPath, tol: f64) -> Result<Degeneracies> {
    let opts = RootOptions { tol, ..RootOptions::default() };
    let drops = rank_drops(path.polynomial(), path.domain(), &opts)?;
    Ok(Degeneracies {
        domain: path.domain(),
        points: drops.points.iter().map(|p| (p.s0, p.nullity)).collect(),
        null_branch_dim: drops.generic_nullity,
    })
}
