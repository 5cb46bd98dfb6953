//! Maslov indices of Lagrangian curves and pairs: directly, as spectral flow
//! of chart images over a chart covering, and from partial signatures at the
//! intersections with the reference Lagrangian.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian::{find_complementary, gap_distance, ChartContext, LagrangianCurve, LagrangianFrame, SampledFrames, SymplecticSpace};
use crate::linalg::{c64, eigenvalues_herm, identity, zeros, CMatrix, HermitianMatrix};
use crate::path::{MatrixPolyPath, MatrixPolynomial, PiecewiseAnalyticPath, SampledPath};
use crate::roots::{rank_drops, RootOptions};
use crate::series::MatSeries;
use crate::sigflow::{
    contribution, local_flows, placement_of, signatures_from_series, spectral_flow_sampled, LocalFlows, Placement,
    ReductionOptions, SignatureTable,
};

#[derive(Debug, Clone)]
pub struct MaslovOptions {
    pub tol: f64,
    /// Samples per knot interval used when an analytic curve is discretized.
    pub samples_per_segment: usize,
    pub seed: u64,
    /// Largest chart-value norm accepted before a new chart is started.
    pub max_chart_norm: f64,
    /// Smallest principal-angle sine accepted between the curve and the complement.
    pub min_margin: f64,
    /// Number of upcoming samples a new complement must be transversal to.
    pub lookahead: usize,
    pub attempts: usize,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        Self {
            tol: crate::linalg::DEFAULT_RANK_TOL,
            samples_per_segment: 200,
            seed: 0,
            max_chart_norm: 1e3,
            min_margin: 1e-6,
            lookahead: 16,
            attempts: 200,
        }
    }
}

/// `H + H` with `J^ = diag(J, -J)` and its diagonal Lagrangian.
#[derive(Debug, Clone)]
pub struct DoubledSpace {
    base: Arc<SymplecticSpace>,
    space: Arc<SymplecticSpace>,
    diagonal: LagrangianFrame,
}

impl DoubledSpace {
    pub fn new(base: Arc<SymplecticSpace>) -> Result<Self> {
        let j = base.j();
        let space = SymplecticSpace::new(crate::linalg::block_diag(j, &(-j)))?;
        let n = base.dim();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut d = zeros(2 * n, n);
        for i in 0..n {
            d[(i, i)] = c64(r, 0.0);
            d[(n + i, i)] = c64(r, 0.0);
        }
        let diagonal = LagrangianFrame::new(space.clone(), d)?;
        Ok(Self { base, space, diagonal })
    }

    pub fn base(&self) -> &Arc<SymplecticSpace> {
        &self.base
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn diagonal(&self) -> &LagrangianFrame {
        &self.diagonal
    }

    pub fn double_frame(&self, a: &LagrangianFrame, b: &LagrangianFrame) -> Result<LagrangianFrame> {
        LagrangianFrame::new(self.space.clone(), crate::linalg::block_diag(a.basis(), b.basis()))
    }

    /// `gamma0 + gamma1`. Two analytic curves give an analytic curve on the
    /// merged knots; otherwise both are sampled on the sampled curve's grid.
    pub fn double_curve(&self, g0: &LagrangianCurve, g1: &LagrangianCurve) -> Result<LagrangianCurve> {
        let (a0, b0) = g0.domain();
        let (a1, b1) = g1.domain();
        let slack = 1e-12 * (1.0 + a0.abs().max(b0.abs()));
        if (a0 - a1).abs() > slack || (b0 - b1).abs() > slack {
            return Err(Error::Contract(format!("curves have different domains [{a0}, {b0}] and [{a1}, {b1}]")));
        }
        if let (Some((k0, s0)), Some((k1, s1))) = (g0.polynomial_pieces(), g1.polynomial_pieces()) {
            let knots = merge_knots(&k0, &k1);
            let segs = knots
                .windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    poly_block_diag(&s0[piece_index(&k0, mid)], &s1[piece_index(&k1, mid)])
                })
                .collect();
            return LagrangianCurve::basis(self.space.clone(), knots, segs);
        }
        let grid = match (g0.samples_ref(), g1.samples_ref()) {
            (Some(s), _) | (None, Some(s)) => s.grid().to_vec(),
            (None, None) => unreachable!("analytic pairs handled above"),
        };
        let f0 = g0.samples_on(&grid)?;
        let f1 = g1.samples_on(&grid)?;
        let frames = f0
            .frames()
            .iter()
            .zip(f1.frames())
            .map(|(a, b)| self.double_frame(a, b))
            .collect::<Result<Vec<_>>>()?;
        LagrangianCurve::sampled(SampledFrames::new(grid, frames)?)
    }
}

fn merge_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let scale = 1.0 + all.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out: Vec<f64> = Vec::new();
    for x in all {
        if out.last().is_none_or(|&l| x - l > 1e-12 * scale) {
            out.push(x);
        }
    }
    out
}

fn piece_index(knots: &[f64], s: f64) -> usize {
    knots[1..knots.len() - 1].iter().take_while(|&&k| s > k).count()
}

fn poly_block_diag(a: &MatrixPolynomial, b: &MatrixPolynomial) -> MatrixPolynomial {
    let len = a.coeffs().len().max(b.coeffs().len());
    let coeffs = (0..len)
        .map(|k| {
            let ca = a.coeffs().get(k).cloned().unwrap_or_else(|| zeros(a.nrows(), a.ncols()));
            let cb = b.coeffs().get(k).cloned().unwrap_or_else(|| zeros(b.nrows(), b.ncols()));
            crate::linalg::block_diag(&ca, &cb)
        })
        .collect();
    MatrixPolynomial::new(coeffs).expect("nonempty")
}

/// One chart of a covering and the spectral flow of the chart image over it.
#[derive(Debug, Clone, Serialize)]
pub struct ChartPiece {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    pub flow: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectMaslov {
    pub index: i64,
    pub pieces: Vec<ChartPiece>,
    /// `(s, eigenvalues of the chart value)` at every sample.
    #[serde(skip)]
    pub trace: Vec<(f64, Vec<f64>)>,
}

fn separation(t: &HermitianMatrix) -> f64 {
    let v = eigenvalues_herm(t);
    let rho = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())) / rho
}

/// Greedy chart covering of sampled frames against `L0`; sums the spectral
/// flows of the chart images.
pub fn maslov_sampled(samples: &SampledFrames, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<DirectMaslov> {
    let grid = samples.grid();
    let frames = samples.frames();
    let n = grid.len() - 1;
    let mut i0 = 0usize;
    let mut pieces = Vec::new();
    let mut trace = Vec::new();
    let mut index = 0i64;
    let mut piece_no = 0u64;
    while i0 < n {
        let ahead = (i0 + opts.lookahead).min(n);
        let mut targets = vec![l0.clone()];
        targets.extend(frames[i0..=ahead].iter().cloned());
        let l1 = find_complementary(&targets, opts.attempts, opts.seed.wrapping_add(piece_no), opts.min_margin)
            .or_else(|_| {
                let few = [l0.clone(), frames[i0].clone(), frames[i0 + 1].clone()];
                find_complementary(&few, opts.attempts, opts.seed.wrapping_add(piece_no) ^ 0x9e37, opts.min_margin)
            })
            .map_err(|e| Error::Resolution(format!("no chart covers s = {}: {e}", grid[i0])))?;
        piece_no += 1;
        let ctx = ChartContext::new(l0, &l1)?;
        // a step is accepted only if both ends stay clear of L1 by more than
        // the step itself, so the chart value cannot pass through infinity
        let value = |i: usize| -> Option<HermitianMatrix> {
            let step = if i > 0 { gap_distance(&frames[i - 1], &frames[i]) } else { 0.0 };
            let need = opts.min_margin.max(2.0 * step);
            if frames[i].margin(&l1) < need || (i > 0 && frames[i - 1].margin(&l1) < need) {
                return None;
            }
            ctx.value(&frames[i]).ok().filter(|t| t.norm() <= opts.max_chart_norm)
        };
        let first = ctx.value(&frames[i0]).ok().filter(|t| t.norm() <= opts.max_chart_norm);
        let mut values = match first {
            Some(v) => vec![v],
            None => return Err(Error::Resolution(format!("chart covering failed at s = {}", grid[i0]))),
        };
        let mut j = i0;
        while j < n {
            match value(j + 1) {
                Some(v) => {
                    values.push(v);
                    j += 1;
                }
                None => break,
            }
        }
        if j == i0 {
            return Err(Error::Resolution(format!(
                "chart covering cannot advance past s = {}; refine the sampling",
                grid[i0]
            )));
        }
        let mut end = j;
        if j < n {
            // hand over where the chart value is furthest from singular
            let lo = (i0 + 1).max(j.saturating_sub(opts.lookahead / 2));
            end = (lo..=j)
                .max_by(|&a, &b| separation(&values[a - i0]).partial_cmp(&separation(&values[b - i0])).unwrap())
                .unwrap_or(j);
            values.truncate(end - i0 + 1);
        }
        let piece_grid = grid[i0..=end].to_vec();
        for (s, v) in piece_grid.iter().zip(values.iter()) {
            trace.push((*s, eigenvalues_herm(v)));
        }
        let path = SampledPath::new(piece_grid, values)?;
        let flow = spectral_flow_sampled(&path, opts.tol)?;
        index += flow;
        pieces.push(ChartPiece { start: grid[i0], end: grid[end], samples: end - i0 + 1, flow });
        i0 = end;
    }
    Ok(DirectMaslov { index, pieces, trace })
}

/// Samples an analytic curve finely enough that consecutive frames are close.
fn adequate_samples(gamma: &LagrangianCurve, opts: &MaslovOptions) -> Result<SampledFrames> {
    let mut per = opts.samples_per_segment.max(2);
    loop {
        let s = gamma.samples(per)?;
        if !gamma.is_analytic() || s.max_step() <= 0.02 || per >= 1 << 14 {
            return Ok(s);
        }
        per *= 2;
    }
}

pub fn maslov_single_report(gamma: &LagrangianCurve, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<DirectMaslov> {
    crate::lagrangian::check_same_space(gamma.space(), l0.space())?;
    let samples = adequate_samples(gamma, opts)?;
    maslov_sampled(&samples, l0, opts)
}

/// `mu_{L0}(gamma)`: sum of spectral flows of chart images over a chart covering.
pub fn maslov_single(gamma: &LagrangianCurve, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<i64> {
    maslov_single_report(gamma, l0, opts).map(|r| r.index)
}

pub fn maslov_pair_report(g0: &LagrangianCurve, g1: &LagrangianCurve, opts: &MaslovOptions) -> Result<DirectMaslov> {
    crate::lagrangian::check_same_space(g0.space(), g1.space())?;
    let d = DoubledSpace::new(g0.space().clone())?;
    let doubled = d.double_curve(g0, g1)?;
    maslov_single_report(&doubled, d.diagonal(), opts)
}

/// `mu(gamma0, gamma1) = mu_Delta(gamma0 + gamma1)` in the doubled space.
pub fn maslov_pair(g0: &LagrangianCurve, g1: &LagrangianCurve, opts: &MaslovOptions) -> Result<i64> {
    maslov_pair_report(g0, g1, opts).map(|r| r.index)
}

/// Matrix polynomial `(J M0)^H M(s)`, whose kernel is `gamma(s) ∩ L0` in the
/// coordinates of `M(s)`.
fn intersection_polynomial(seg: &MatrixPolynomial, l0: &LagrangianFrame) -> MatrixPolynomial {
    let jm0h = l0.j_image().basis().adjoint();
    seg.left_mul(&jm0h)
}

/// Taylor series of the chart value `K Y(h) X(h)^{-1}` from the Taylor series
/// of a spanning matrix `M(s0 + h)`.
fn chart_series(ctx: &ChartContext, taylor: &MatSeries) -> Result<MatSeries> {
    let len = taylor.coeffs().len();
    let mut xs = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    for c in taylor.coeffs() {
        let (x, y) = ctx.coordinates(c)?;
        xs.push(x);
        ys.push(ctx.k() * y);
    }
    let x = MatSeries::new(xs).inverse()?;
    Ok(MatSeries::new(ys).mul(&x))
}

/// Partial signatures at `s0` of the Lagrangian spanned by the columns of
/// `M(s0 + h)` against `L0`. `span(len)` returns the first `len` Taylor
/// coefficients of `M` in `h`; the reduction gives up past order `kmax`.
pub fn span_signatures(
    span: &dyn Fn(usize) -> Result<MatSeries>,
    s0: f64,
    l0: &LagrangianFrame,
    l1: Option<&LagrangianFrame>,
    generic_nullity: usize,
    kmax: usize,
    opts: &MaslovOptions,
) -> Result<SignatureTable> {
    let space = l0.space().clone();
    let here = LagrangianFrame::from_span_projected(space, span(1)?.coeff(0), 1e-6)?;
    let l1 = match l1 {
        Some(l) => {
            if here.margin(l) < opts.min_margin {
                return Err(Error::ChartDomain { intersection_dim: here.intersection_dim(l, 1e-8).max(1) });
            }
            l.clone()
        }
        None => find_complementary(&[l0.clone(), here], opts.attempts, opts.seed ^ s0.to_bits(), opts.min_margin)?,
    };
    let ctx = ChartContext::new(l0, &l1)?;
    let ropts = ReductionOptions { tol: opts.tol, kmax, generic_nullity };
    let series = |len: usize| chart_series(&ctx, &span(len)?);
    signatures_from_series(s0, &series, &ropts)
}

fn segment_signatures(
    seg: &MatrixPolynomial,
    s0: f64,
    l0: &LagrangianFrame,
    l1: Option<&LagrangianFrame>,
    generic: usize,
    opts: &MaslovOptions,
) -> Result<SignatureTable> {
    let span = |len: usize| Ok(seg.taylor(s0, len));
    span_signatures(&span, s0, l0, l1, generic, l0.dim() * seg.degree().max(1) + 1, opts)
}

fn analytic_pieces(gamma: &LagrangianCurve, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<(Vec<f64>, Vec<MatrixPolynomial>, Option<f64>)> {
    if let Some((k, s)) = gamma.polynomial_pieces() {
        return Ok((k, s, None));
    }
    let fit = fit_chart_curve(gamma.samples_ref().expect("sampled"), l0, 12, opts)?;
    let (k, s) = fit.curve.polynomial_pieces().expect("fitted curves are analytic");
    Ok((k, s, Some(fit.residual)))
}

/// Partial signatures of `gamma` against `L0` at `s0`, computed in a chart
/// `(L0, L1)`; `L1` is searched for when not given.
pub fn lagrangian_signatures_with(
    gamma: &LagrangianCurve,
    s0: f64,
    l0: &LagrangianFrame,
    l1: Option<&LagrangianFrame>,
    opts: &MaslovOptions,
) -> Result<SignatureTable> {
    crate::lagrangian::check_same_space(gamma.space(), l0.space())?;
    if !gamma.is_analytic() {
        return Err(Error::Representation(
            "signatures need an analytic curve; fit the samples with fit_chart_curve first".into(),
        ));
    }
    let (knots, segs, _) = analytic_pieces(gamma, l0, opts)?;
    let (a, b) = (knots[0], *knots.last().unwrap());
    if s0 < a - 1e-12 * (1.0 + a.abs()) || s0 > b + 1e-12 * (1.0 + b.abs()) {
        return Err(Error::Domain { value: s0, lo: a, hi: b });
    }
    let j = piece_index(&knots, s0);
    let ropts = RootOptions { tol: opts.tol, seed: opts.seed, ..RootOptions::default() };
    let f = intersection_polynomial(&segs[j], l0);
    let g = crate::roots::generic_nullity(&|s| f.eval(s), (knots[j], knots[j + 1]), ropts.tol);
    let here = LagrangianFrame::from_span(l0.space().clone(), &segs[j].eval(s0))?;
    if here.intersection_dim(l0, 1e-8) == 0 {
        return Err(Error::Precondition(format!("gamma({s0}) is transversal to L0")));
    }
    segment_signatures(&segs[j], s0, l0, l1, g, opts)
}

pub fn lagrangian_signatures(gamma: &LagrangianCurve, s0: f64, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<SignatureTable> {
    lagrangian_signatures_with(gamma, s0, l0, None, opts)
}

/// Signatures of the pair at `s0`: those of `gamma0 + gamma1` against the diagonal.
pub fn pair_signatures(g0: &LagrangianCurve, g1: &LagrangianCurve, s0: f64, opts: &MaslovOptions) -> Result<SignatureTable> {
    let d = DoubledSpace::new(g0.space().clone())?;
    let doubled = d.double_curve(g0, g1)?;
    lagrangian_signatures(&doubled, s0, d.diagonal(), opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyContribution {
    pub segment: usize,
    pub s0: f64,
    pub placement: Placement,
    pub table: SignatureTable,
    pub local_flows: LocalFlows,
    pub contribution: i64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EndpointTerms {
    pub start: i64,
    pub end: i64,
    pub interior: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaslovFlags {
    /// Some segment lies entirely in the Maslov cycle (identically nonzero intersection).
    pub maslov_cycle: bool,
    pub null_branch_dims: Vec<usize>,
    /// Residual of the polynomial fit for sampled inputs.
    pub fit_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignatureMaslov {
    pub index: i64,
    pub per_degeneracy: Vec<DegeneracyContribution>,
    pub endpoint_terms: EndpointTerms,
    pub flags: MaslovFlags,
}

/// Maslov index assembled from local contributions at the intersections with
/// `L0`: interior points contribute the odd signatures, a degeneracy at the
/// start of a segment `-sum n_k^-`, and one at the end `sum n_{2k}^- + n_{2k-1}^+`.
pub fn maslov_single_via_signatures(gamma: &LagrangianCurve, l0: &LagrangianFrame, opts: &MaslovOptions) -> Result<SignatureMaslov> {
    crate::lagrangian::check_same_space(gamma.space(), l0.space())?;
    let (knots, segs, fit_residual) = analytic_pieces(gamma, l0, opts)?;
    let ropts = RootOptions { tol: opts.tol, seed: opts.seed, ..RootOptions::default() };
    let (a, b) = (knots[0], *knots.last().unwrap());
    let mut entries = Vec::new();
    let mut nulls = Vec::new();
    let mut terms = EndpointTerms { start: 0, end: 0, interior: 0 };
    for (j, seg) in segs.iter().enumerate() {
        let dom = (knots[j], knots[j + 1]);
        let f = intersection_polynomial(seg, l0);
        let drops = rank_drops(&f, dom, &ropts)?;
        nulls.push(drops.generic_nullity);
        for p in &drops.points {
            let table = segment_signatures(seg, p.s0, l0, None, drops.generic_nullity, opts)?;
            let flows = local_flows(&table);
            let placement = placement_of(p.s0, dom);
            let c = contribution(&flows, placement);
            if p.s0 == a {
                terms.start += c;
            } else if p.s0 == b {
                terms.end += c;
            } else {
                terms.interior += c;
            }
            entries.push(DegeneracyContribution { segment: j, s0: p.s0, placement, table, local_flows: flows, contribution: c });
        }
    }
    let index = entries.iter().map(|e| e.contribution).sum();
    let flags = MaslovFlags { maslov_cycle: nulls.iter().any(|&g| g > 0), null_branch_dims: nulls, fit_residual };
    Ok(SignatureMaslov { index, per_degeneracy: entries, endpoint_terms: terms, flags })
}

pub fn maslov_pair_via_signatures(g0: &LagrangianCurve, g1: &LagrangianCurve, opts: &MaslovOptions) -> Result<SignatureMaslov> {
    crate::lagrangian::check_same_space(g0.space(), g1.space())?;
    let d = DoubledSpace::new(g0.space().clone())?;
    let doubled = d.double_curve(g0, g1)?;
    maslov_single_via_signatures(&doubled, d.diagonal(), opts)
}

#[derive(Debug, Clone)]
pub struct ChartFit {
    pub curve: LagrangianCurve,
    pub degree: usize,
    /// Largest spectral-norm deviation of the fitted chart values at the samples.
    pub residual: f64,
}

/// Least-squares polynomial fit of the chart values of sampled frames in a
/// chart `(L0, L1)` with `L1` transversal to every sample. The lowest degree
/// reaching a relative residual of `1e-8` is used, else `max_degree`.
pub fn fit_chart_curve(samples: &SampledFrames, l0: &LagrangianFrame, max_degree: usize, opts: &MaslovOptions) -> Result<ChartFit> {
    let mut targets = vec![l0.clone()];
    targets.extend(samples.frames().iter().cloned());
    let l1 = find_complementary(&targets, opts.attempts, opts.seed, opts.min_margin)?;
    let ctx = ChartContext::new(l0, &l1)?;
    let values = samples.frames().iter().map(|f| ctx.value(f)).collect::<Result<Vec<_>>>()?;
    let grid = samples.grid();
    let (a, b) = (grid[0], *grid.last().unwrap());
    let m = l0.dim();
    let scale = values.iter().fold(1.0f64, |s, v| s.max(v.norm()));
    let u: Vec<f64> = grid.iter().map(|&s| (2.0 * s - a - b) / (b - a)).collect();
    let mut best: Option<(usize, Vec<CMatrix>, f64)> = None;
    for deg in 0..=max_degree.min(grid.len() - 1) {
        let v = nalgebra::DMatrix::<f64>::from_fn(grid.len(), deg + 1, |i, k| u[i].powi(k as i32));
        let svd = v.clone().svd(true, true);
        let mut coeffs = vec![zeros(m, m); deg + 1];
        for r in 0..m {
            for c in 0..m {
                let re = nalgebra::DVector::from_iterator(grid.len(), values.iter().map(|t| t.matrix()[(r, c)].re));
                let im = nalgebra::DVector::from_iterator(grid.len(), values.iter().map(|t| t.matrix()[(r, c)].im));
                let xr = svd.solve(&re, 1e-14).map_err(|e| Error::Contract(e.into()))?;
                let xi = svd.solve(&im, 1e-14).map_err(|e| Error::Contract(e.into()))?;
                for k in 0..=deg {
                    coeffs[k][(r, c)] = c64(xr[k], xi[k]);
                }
            }
        }
        let poly_u = MatrixPolynomial::new(coeffs.clone())?;
        let resid = u
            .iter()
            .zip(values.iter())
            .map(|(&x, t)| crate::linalg::spectral_norm(&(poly_u.eval(x) - t.matrix())))
            .fold(0.0, f64::max);
        let better = best.as_ref().is_none_or(|b| resid < b.2);
        if better {
            best = Some((deg, coeffs, resid));
        }
        if resid <= 1e-8 * scale {
            break;
        }
    }
    let (degree, coeffs, residual) = best.expect("at least degree 0 is tried");
    // u = alpha + beta s
    let beta = 2.0 / (b - a);
    let alpha = -(a + b) / (b - a);
    let in_s = MatrixPolynomial::new(coeffs)?.reparametrize(alpha, beta);
    let path = MatrixPolyPath::from_polynomial_hermitian_part((a, b), &in_s)?;
    let curve = LagrangianCurve::chart(l0, &l1, PiecewiseAnalyticPath::single(path))?;
    Ok(ChartFit { curve, degree, residual })
}

/// `U(s) = I` helper for callers that need an identity polynomial of the space's size.
pub fn identity_polynomial(space: &SymplecticSpace) -> MatrixPolynomial {
    MatrixPolynomial::constant(identity(space.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{chart_transition, stabilizer_path, unitary_lift};
    use crate::linalg::{diag_real, random_complex, random_hermitian, random_unitary};
    use crate::sigflow::spectral_flow_direct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize, seed: u64) -> (Arc<SymplecticSpace>, LagrangianFrame, LagrangianFrame, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = SymplecticSpace::standard(m);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l1 = LagrangianFrame::random(sp.clone(), &mut rng);
        (sp, l0, l1, rng)
    }

    fn chart_curve(l0: &LagrangianFrame, l1: &LagrangianFrame, domain: (f64, f64), coeffs: Vec<CMatrix>) -> LagrangianCurve {
        let p = MatrixPolyPath::from_matrices(domain, coeffs).unwrap();
        LagrangianCurve::chart(l0, l1, PiecewiseAnalyticPath::single(p)).unwrap()
    }

    #[test]
    fn doubled_space_is_symplectic() {
        let sp = SymplecticSpace::standard(2);
        let d = DoubledSpace::new(sp).unwrap();
        assert!(d.diagonal().isotropy_defect() < 1e-15);
        assert_eq!(d.space().dim(), 8);
    }

    #[test]
    fn basic_examples() {
        let (_, l0, l1, _) = setup(3, 1);
        let opts = MaslovOptions::default();
        let up = chart_curve(&l0, &l1, (-1.0, 1.0), vec![zeros(3, 3), identity(3)]);
        assert_eq!(maslov_single(&up, &l0, &opts).unwrap(), 3);
        assert_eq!(maslov_single_via_signatures(&up, &l0, &opts).unwrap().index, 3);
        let constant = LagrangianCurve::constant(&l1, (0.0, 1.0)).unwrap();
        assert_eq!(maslov_single(&constant, &l0, &opts).unwrap(), 0);
        let l0c = LagrangianCurve::constant(&l0, (-1.0, 1.0)).unwrap();
        assert_eq!(maslov_pair(&up, &l0c, &opts).unwrap(), 3);
        assert_eq!(maslov_pair(&l0c, &l0c, &opts).unwrap(), 0);
        let via = maslov_pair_via_signatures(&l0c, &l0c, &opts).unwrap();
        assert_eq!(via.index, 0);
        assert!(via.flags.maslov_cycle);
    }

    #[test]
    fn endpoint_examples() {
        let (_, l0, l1, _) = setup(1, 2);
        let opts = MaslovOptions::default();
        let s = chart_curve(&l0, &l1, (0.0, 1.0), vec![zeros(1, 1), identity(1)]);
        let ms = chart_curve(&l0, &l1, (0.0, 1.0), vec![zeros(1, 1), -identity(1)]);
        assert_eq!(maslov_single(&s, &l0, &opts).unwrap(), 0);
        assert_eq!(maslov_single_via_signatures(&s, &l0, &opts).unwrap().index, 0);
        assert_eq!(maslov_single(&ms, &l0, &opts).unwrap(), -1);
        let via = maslov_single_via_signatures(&ms, &l0, &opts).unwrap();
        assert_eq!(via.index, -1);
        assert_eq!(via.endpoint_terms.start, -1);
    }

    #[test]
    fn signature_tables_of_chart_curves() {
        let (_, l0, l1, _) = setup(2, 3);
        let opts = MaslovOptions::default();
        let c = chart_curve(&l0, &l1, (-1.0, 1.0), vec![zeros(2, 2), diag_real(&[1.0, -1.0])]);
        let t = lagrangian_signatures(&c, 0.0, &l0, &opts).unwrap();
        assert_eq!((t.n_plus(1), t.n_minus(1), t.sigma(1)), (1, 1, 0));
        let c1 = chart_curve(&l0, &l1, (-1.0, 1.0), vec![diag_real(&[0.0, 2.0]), diag_real(&[1.0, 0.0])]);
        assert_eq!(lagrangian_signatures(&c1, 0.0, &l0, &opts).unwrap().n_plus(1), 1);
    }

    #[test]
    fn chart_independence_of_direct_index() {
        for seed in 0..5 {
            let (sp, l0, l1, mut rng) = setup(3, 10 + seed);
            let coeffs: Vec<CMatrix> = (0..3).map(|_| random_hermitian(3, &mut rng).into_matrix()).collect();
            let c = chart_curve(&l0, &l1, (-1.0, 1.0), coeffs);
            let (_, values) = c.chart_data().unwrap();
            let reference = spectral_flow_direct(values, 1e-9).unwrap();
            let a = maslov_single(&c, &l0, &MaslovOptions { seed: 1, ..Default::default() }).unwrap();
            let b = maslov_single(&c, &l0, &MaslovOptions { seed: 2, ..Default::default() }).unwrap();
            assert_eq!(a, reference);
            assert_eq!(b, reference);
            // values in another chart, where they stay in its domain
            let l1p = LagrangianFrame::random(sp, &mut rng);
            let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
            if grid.iter().all(|&s| c.frame_at(s).unwrap().margin(&l1p) > 0.1) {
                let moved: Vec<HermitianMatrix> =
                    grid.iter().map(|&s| chart_transition(&l0, &l1, &l1p, &values.eval(s).unwrap()).unwrap()).collect();
                let p = SampledPath::new(grid, moved).unwrap();
                assert_eq!(spectral_flow_sampled(&p, 1e-9).unwrap(), reference);
            }
        }
    }

    #[test]
    fn identities_on_random_curves() {
        for seed in 0..4 {
            let (sp, l0, l1, mut rng) = setup(2, 40 + seed);
            let coeffs: Vec<CMatrix> = (0..3).map(|_| random_hermitian(2, &mut rng).into_matrix()).collect();
            let g = chart_curve(&l0, &l1, (-1.0, 1.0), coeffs);
            let opts = MaslovOptions { seed, ..Default::default() };
            let mu = maslov_single(&g, &l0, &opts).unwrap();
            // pair with a constant
            let l0c = LagrangianCurve::constant(&l0, (-1.0, 1.0)).unwrap();
            assert_eq!(maslov_pair(&g, &l0c, &opts).unwrap(), mu);
            // symplectic path fixing L0
            let a = random_complex(2, 2, &mut rng) + identity(2);
            let s = MatrixPolynomial::new(vec![
                random_hermitian(2, &mut rng).into_matrix(),
                random_hermitian(2, &mut rng).into_matrix(),
            ])
            .unwrap();
            let u = stabilizer_path(&l0, &a, &s).unwrap();
            assert_eq!(maslov_single(&g.transform(&u).unwrap(), &l0, &opts).unwrap(), mu);
            // lift of a second curve
            let other: Vec<CMatrix> = (0..2).map(|_| random_hermitian(2, &mut rng).into_matrix()).collect();
            let g1 = chart_curve(&l1, &l0, (-1.0, 1.0), other);
            let frames = g1.samples(200).unwrap();
            let eta = unitary_lift(frames.frames(), &l0).unwrap();
            let inv: Vec<_> = eta.iter().map(|e| e.inverse()).collect();
            let moved = g.transform_sampled(frames.grid(), &inv).unwrap();
            let pair = maslov_pair(&g, &LagrangianCurve::sampled(frames.clone()).unwrap(), &opts).unwrap();
            assert_eq!(maslov_single(&moved, &l0, &opts).unwrap(), pair);
            let _ = sp;
        }
    }

    #[test]
    fn pair_signatures_examples_and_conjugation() {
        let (sp, l0, l1, mut rng) = setup(2, 70);
        let opts = MaslovOptions::default();
        let up = chart_curve(&l0, &l1, (-1.0, 1.0), vec![diag_real(&[0.0, 1.0]), diag_real(&[1.0, 0.0])]);
        let l0c = LagrangianCurve::constant(&l0, (-1.0, 1.0)).unwrap();
        let t = pair_signatures(&up, &l0c, 0.0, &opts).unwrap();
        assert_eq!((t.kernel_dim, t.n_plus(1), t.n_minus(1)), (1, 1, 0));
        let same = pair_signatures(&l0c, &l0c, 0.0, &opts).unwrap();
        assert_eq!(same.null_branch_dim, 2);
        assert!(same.rows.iter().all(|r| r.n_plus == 0 && r.n_minus == 0));

        // a fixed unitary map commuting with J acts on both curves
        let (pe, me) = (sp.plus_eigenspace().clone(), sp.minus_eigenspace().clone());
        let (a, b) = (random_unitary(pe.ncols(), &mut rng), random_unitary(me.ncols(), &mut rng));
        let u = &pe * a * pe.adjoint() + &me * b * me.adjoint();
        let u = MatrixPolynomial::constant(u);
        let coeffs: Vec<CMatrix> = (0..2).map(|_| random_hermitian(2, &mut rng).into_matrix()).collect();
        let g1 = chart_curve(&l0, &l1, (-1.0, 1.0), coeffs.clone());
        // chart values differ by diag(s, 1): one transversal intersection at 0
        let g0 = chart_curve(&l0, &l1, (-1.0, 1.0), vec![&coeffs[0] + diag_real(&[0.0, 1.0]), &coeffs[1] + diag_real(&[1.0, 0.0])]);
        let plain = pair_signatures(&g0, &g1, 0.0, &opts).unwrap();
        let moved = pair_signatures(&g0.transform(&u).unwrap(), &g1.transform(&u).unwrap(), 0.0, &opts).unwrap();
        assert_eq!(plain.kernel_dim, 1);
        assert!(plain.same_signatures(&moved), "{plain:?} vs {moved:?}");
        // swapping the curves negates every signature
        let swapped = pair_signatures(&g1, &g0, 0.0, &opts).unwrap();
        for k in 1..=plain.rows.len() {
            assert_eq!((swapped.n_plus(k), swapped.n_minus(k)), (plain.n_minus(k), plain.n_plus(k)));
        }
    }

    #[test]
    fn fitted_sampled_curve() {
        let (_, l0, _, mut rng) = setup(2, 60);
        let l1 = l0.j_image();
        let coeffs: Vec<CMatrix> = (0..3).map(|_| random_hermitian(2, &mut rng).into_matrix()).collect();
        let g = chart_curve(&l0, &l1, (-1.0, 1.0), coeffs);
        let samples = g.samples(120).unwrap();
        let fit = fit_chart_curve(&samples, &l0, 12, &MaslovOptions::default()).unwrap();
        assert!(fit.residual < 1e-6, "{}", fit.residual);
        let sampled = LagrangianCurve::sampled(samples).unwrap();
        let via = maslov_single_via_signatures(&sampled, &l0, &MaslovOptions::default()).unwrap();
        assert_eq!(via.index, maslov_single(&g, &l0, &MaslovOptions::default()).unwrap());
        assert!(via.flags.fit_residual.is_some());
    }
}
