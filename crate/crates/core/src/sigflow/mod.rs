//! Spectral flow of Hermitian paths and its computation from partial signatures.

mod flow;
mod signatures;

pub use flow::{
    count_window, eigen_trace, eigen_trace_sampled, flow_on_partition, flow_partition, flow_partition_sampled,
    spectral_flow_direct, spectral_flow_sampled, trace_to_csv, FlowPartition,
};
pub use signatures::{
    bilinear_form, find_degeneracies, local_flows, partial_signatures, reduce, root_spaces, signatures_from_series,
    Degeneracies, LocalFlows, Reduction, ReductionOptions, RootSpace, SignatureRow, SignatureTable,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{identity, kernel, CMatrix};
use crate::path::{MatrixPolyPath, MatrixPolynomial, PiecewiseAnalyticPath};

/// Where a degeneracy sits relative to the interval it is assembled over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Start,
    Interior,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyEntry {
    pub segment: usize,
    pub placement: Placement,
    pub table: SignatureTable,
    pub local_flows: LocalFlows,
    pub contribution: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureFlowReport {
    pub spectral_flow: i64,
    pub degeneracies: Vec<DegeneracyEntry>,
    pub null_branch_dims: Vec<usize>,
    /// Knots where the number of identically-zero branches changes.
    pub flagged_knots: Vec<f64>,
}

/// Contribution of a degeneracy at the start of an interval (flow on
/// `[s0, s0 + eps]`), in the interior, or at its end (flow on `[s0 - eps, s0]`).
pub fn contribution(flows: &LocalFlows, placement: Placement) -> i64 {
    match placement {
        Placement::Start => flows.right,
        Placement::Interior => flows.through,
        Placement::End => flows.left,
    }
}

pub fn placement_of(s0: f64, domain: (f64, f64)) -> Placement {
    if s0 == domain.0 {
        Placement::Start
    } else if s0 == domain.1 {
        Placement::End
    } else {
        Placement::Interior
    }
}

/// Spectral flow assembled from local flows at every degeneracy, segment by
/// segment; identically-zero branches contribute nothing.
pub fn spectral_flow_report(path: &PiecewiseAnalyticPath, tol: f64) -> Result<SignatureFlowReport> {
    let mut total = 0;
    let mut entries = Vec::new();
    let mut nulls = Vec::new();
    for (j, seg) in path.segments().iter().enumerate() {
        let deg = find_degeneracies(seg, tol)?;
        nulls.push(deg.null_branch_dim);
        for &(s0, _) in &deg.points {
            let table = partial_signatures(seg, s0, tol)?;
            let flows = local_flows(&table);
            let placement = placement_of(s0, seg.domain());
            let c = contribution(&flows, placement);
            total += c;
            entries.push(DegeneracyEntry { segment: j, placement, table, local_flows: flows, contribution: c });
        }
    }
    let flagged = (1..nulls.len()).filter(|&j| nulls[j] != nulls[j - 1]).map(|j| path.knots()[j]).collect();
    Ok(SignatureFlowReport { spectral_flow: total, degeneracies: entries, null_branch_dims: nulls, flagged_knots: flagged })
}

pub fn spectral_flow_via_signatures(path: &PiecewiseAnalyticPath, tol: f64) -> Result<i64> {
    spectral_flow_report(path, tol).map(|r| r.spectral_flow)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeReport {
    pub original: SignatureTable,
    pub gauged: SignatureTable,
    pub equal: bool,
}

/// Compares the partial signatures of `T` and `T U` at `s0`, for `U` commuting
/// in the sense `U^H T = T U` and restricting to the identity on `ker T(s0)`.
pub fn gauge_check(path: &MatrixPolyPath, u: &MatrixPolynomial, s0: f64, tol: f64) -> Result<GaugeReport> {
    let n = path.dim();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Contract("gauge must be square of the path dimension".into()));
    }
    let t = path.polynomial();
    let tu = t.mul(u);
    let uht = u.adjoint().mul(t);
    let scale = tu.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    let defect = tu
        .coeffs()
        .iter()
        .zip(uht.coeffs().iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if defect > 1e-9 * scale {
        return Err(Error::Precondition(format!("U^H T != T U (defect {defect:.3e})")));
    }
    let k = kernel(&path.eval(s0)?, tol)?;
    let on_kernel: CMatrix = (u.eval(s0) - identity(n)) * k.basis();
    if on_kernel.norm() > 1e-9 * u.eval(s0).norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "U(s0) is not the identity on ker T(s0) (defect {:.3e})",
            on_kernel.norm()
        )));
    }
    let gauged = MatrixPolyPath::from_polynomial_hermitian_part(path.domain(), &tu)?;
    let original = partial_signatures(path, s0, tol)?;
    let gauged = partial_signatures(&gauged, s0, tol)?;
    let equal = original.same_signatures(&gauged);
    Ok(GaugeReport { original, gauged, equal })
}
