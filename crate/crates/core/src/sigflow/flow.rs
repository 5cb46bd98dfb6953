//! Spectral flow from the partition-and-threshold definition:
//! `sf = sum_j m(s_j, delta_j) - m(s_{j-1}, delta_j)`, where `m(s, delta)`
//! counts eigenvalues of `T(s)` in `[0, delta]` (closed at zero).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_herm, zero_threshold, HermitianMatrix};
use crate::path::{PiecewiseAnalyticPath, SampledPath};

/// Knots `s_0 < ... < s_n` with one threshold per interval. On each interval
/// no eigenvalue comes within `0.1 delta_j` of `+-delta_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowPartition {
    pub knots: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl FlowPartition {
    /// Bisects every interval; thresholds carry over since the certificate of
    /// an interval holds on its pieces.
    pub fn refine(&self) -> FlowPartition {
        let mut knots = vec![self.knots[0]];
        let mut thresholds = Vec::new();
        for (w, &d) in self.knots.windows(2).zip(self.thresholds.iter()) {
            knots.push(0.5 * (w[0] + w[1]));
            knots.push(w[1]);
            thresholds.push(d);
            thresholds.push(d);
        }
        FlowPartition { knots, thresholds }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// `m(s, delta)`: eigenvalues in `[0, delta]`, where `|lambda| <= zero_abs`
/// counts as zero.
pub fn count_window(values: &[f64], delta: f64, zero_abs: f64) -> usize {
    values.iter().filter(|&&v| v >= -zero_abs && v <= delta).count()
}

fn spectrum(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let v = eigenvalues_herm(a);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Resolution("non-finite eigenvalues; the path cannot be resolved".into()));
    }
    Ok(v)
}

/// Absolute-value envelopes `[lo, hi]` of each eigenvalue over an interval,
/// given the sorted spectra at both ends and a bound on how far eigenvalues
/// can travel (`reach = L h` for Lipschitz constant `L`).
fn envelopes(left: &[f64], right: &[f64], reach: f64) -> Vec<(f64, f64)> {
    left.iter()
        .zip(right.iter())
        .map(|(&x, &y)| {
            let lo = (x - reach).max(y - reach).max(0.5 * (x + y - reach));
            let hi = (x + reach).min(y + reach).min(0.5 * (x + y + reach));
            let (lo, hi) = (lo.min(x.min(y)), hi.max(x.max(y)));
            if lo <= 0.0 && hi >= 0.0 {
                (0.0, (-lo).max(hi))
            } else {
                (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()))
            }
        })
        .collect()
}

/// Smallest admissible threshold for the given envelopes, and whether it lies
/// in the topmost gap (above the whole spectrum).
fn pick_threshold(env: &mut [(f64, f64)]) -> (f64, bool) {
    env.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for &(lo, hi) in env.iter() {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let mut gap_lo = 0.0;
    for &(lo, hi) in &merged {
        let (dmin, dmax) = (gap_lo / 0.9, lo / 1.1);
        if lo > 0.0 && dmin < dmax {
            let delta = if gap_lo == 0.0 { 0.5 * dmax } else { (dmin * dmax).sqrt() };
            return (delta, false);
        }
        gap_lo = hi;
    }
    let delta = if gap_lo > 0.0 { 1.5 * gap_lo / 0.9 } else { 1.0 };
    (delta, true)
}

struct Builder<'a> {
    eval: &'a dyn Fn(f64) -> HermitianMatrix,
    lipschitz: &'a dyn Fn(f64, f64) -> Option<f64>,
    max_depth: usize,
    knots: Vec<f64>,
    thresholds: Vec<f64>,
}

impl Builder<'_> {
    fn interval(&mut self, x: f64, y: f64, lx: &[f64], ly: &[f64], depth: usize) -> Result<()> {
        let reach = match (self.lipschitz)(x, y) {
            Some(l) => l * (y - x),
            None => lx.iter().zip(ly.iter()).map(|(a, b)| 0.5 * (a - b).abs()).fold(0.0, f64::max),
        };
        if !reach.is_finite() {
            return Err(Error::Resolution("eigenvalue motion bound is not finite".into()));
        }
        let mut env = envelopes(lx, ly, reach);
        let (delta, top) = pick_threshold(&mut env);
        let promising = top && !pick_threshold(&mut envelopes(lx, ly, 0.0)).1;
        if promising && depth < self.max_depth && self.lipschitz_known(x, y) {
            let m = 0.5 * (x + y);
            let lm = spectrum(&(self.eval)(m))?;
            self.interval(x, m, lx, &lm, depth + 1)?;
            return self.interval(m, y, &lm, ly, depth + 1);
        }
        self.knots.push(y);
        self.thresholds.push(delta);
        Ok(())
    }

    fn lipschitz_known(&self, x: f64, y: f64) -> bool {
        (self.lipschitz)(x, y).is_some()
    }
}

/// Certified partition of an analytic path. Each segment is first cut into
/// `initial` pieces; pieces are bisected while only the trivial threshold
/// (above the whole spectrum) is admissible.
pub fn flow_partition(path: &PiecewiseAnalyticPath, initial: usize) -> Result<FlowPartition> {
    let initial = initial.max(1);
    let mut knots = vec![path.domain().0];
    let mut thresholds = Vec::new();
    for seg in path.segments() {
        let (a, b) = seg.domain();
        let eval = |s: f64| seg.eval_unchecked(s);
        let lip = |x: f64, y: f64| Some(seg.derivative_bound(x, y));
        let mut builder = Builder { eval: &eval, lipschitz: &lip, max_depth: 6, knots: Vec::new(), thresholds: Vec::new() };
        let mut prev = spectrum(&eval(a))?;
        for i in 0..initial {
            let x = a + (b - a) * i as f64 / initial as f64;
            let y = if i + 1 == initial { b } else { a + (b - a) * (i + 1) as f64 / initial as f64 };
            let next = spectrum(&eval(y))?;
            builder.interval(x, y, &prev, &next, 0)?;
            prev = next;
        }
        knots.extend(builder.knots);
        thresholds.extend(builder.thresholds);
    }
    Ok(FlowPartition { knots, thresholds })
}

/// Partition of a sampled path on its own grid.
pub fn flow_partition_sampled(path: &SampledPath) -> Result<FlowPartition> {
    let grid = path.grid();
    let mut thresholds = Vec::new();
    if grid.len() == 1 {
        return Ok(FlowPartition { knots: grid.to_vec(), thresholds });
    }
    let eval = |_s: f64| -> HermitianMatrix { unreachable!("sampled paths are not refined") };
    let lip = |_: f64, _: f64| None;
    let mut builder = Builder { eval: &eval, lipschitz: &lip, max_depth: 0, knots: Vec::new(), thresholds: Vec::new() };
    let spectra = path.values().iter().map(spectrum).collect::<Result<Vec<_>>>()?;
    for j in 1..grid.len() {
        builder.interval(grid[j - 1], grid[j], &spectra[j - 1], &spectra[j], 0)?;
    }
    thresholds.extend(builder.thresholds);
    Ok(FlowPartition { knots: grid.to_vec(), thresholds })
}

/// Sums `m(s_j, delta_j) - m(s_{j-1}, delta_j)` over the partition.
pub fn flow_on_partition(eval: &dyn Fn(f64) -> HermitianMatrix, partition: &FlowPartition, tol: f64) -> Result<i64> {
    let mut total = 0i64;
    let mut prev = spectrum(&eval(partition.knots[0]))?;
    for (j, &delta) in partition.thresholds.iter().enumerate() {
        let next = spectrum(&eval(partition.knots[j + 1]))?;
        let zl = zero_threshold(&prev, tol);
        let zr = zero_threshold(&next, tol);
        total += count_window(&next, delta, zr) as i64 - count_window(&prev, delta, zl) as i64;
        prev = next;
    }
    Ok(total)
}

pub fn spectral_flow_direct(path: &PiecewiseAnalyticPath, tol: f64) -> Result<i64> {
    let partition = flow_partition(path, 8)?;
    let eval = |s: f64| path.eval(s).expect("partition knots lie in the domain");
    flow_on_partition(&eval, &partition, tol)
}

pub fn spectral_flow_sampled(path: &SampledPath, tol: f64) -> Result<i64> {
    let partition = flow_partition_sampled(path)?;
    let grid = path.grid();
    let eval = |s: f64| {
        let i = grid.iter().position(|&g| g == s).expect("partition knots are grid points");
        path.values()[i].clone()
    };
    flow_on_partition(&eval, &partition, tol)
}

/// `(s, eigenvalues ascending)` rows sampled uniformly on every segment.
pub fn eigen_trace(path: &PiecewiseAnalyticPath, per_segment: usize) -> Vec<(f64, Vec<f64>)> {
    let sp = path.sample(per_segment);
    sp.grid().iter().zip(sp.values().iter()).map(|(&s, v)| (s, eigenvalues_herm(v))).collect()
}

pub fn eigen_trace_sampled(path: &SampledPath) -> Vec<(f64, Vec<f64>)> {
    path.grid().iter().zip(path.values().iter()).map(|(&s, v)| (s, eigenvalues_herm(v))).collect()
}

/// CSV with header `s,lambda_1,...,lambda_n`.
pub fn trace_to_csv(trace: &[(f64, Vec<f64>)]) -> String {
    let n = trace.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::from("s");
    for i in 1..=n {
        out.push_str(&format!(",lambda_{i}"));
    }
    out.push('\n');
    for (s, v) in trace {
        out.push_str(&format!("{s:.12e}"));
        for x in v {
            out.push_str(&format!(",{x:.12e}"));
        }
        out.push('\n');
    }
    out
}
