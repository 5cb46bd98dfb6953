use std::sync::Arc;

use serde_json::{json, Value};

use super::{check_same_space, gap_distance, isotropy_defect, ChartContext, LagrangianFrame, SymplecticMap, SymplecticSpace};
use crate::error::{Error, Result};
use crate::linalg::{nullity, spectral_norm, CMatrix};
use crate::path::{AnyPath, MatrixPolynomial, PiecewiseAnalyticPath};

/// Frames attached to a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct SampledFrames {
    grid: Vec<f64>,
    frames: Vec<LagrangianFrame>,
}

impl SampledFrames {
    pub fn new(grid: Vec<f64>, frames: Vec<LagrangianFrame>) -> Result<Self> {
        if grid.len() != frames.len() || grid.is_empty() {
            return Err(Error::Contract("grid and frames must be nonempty and of equal length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::Contract("grid must be finite and strictly increasing".into()));
        }
        for f in &frames[1..] {
            check_same_space(frames[0].space(), f.space())?;
        }
        Ok(Self { grid, frames })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn frames(&self) -> &[LagrangianFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Largest gap between consecutive frames (both directions).
    pub fn max_step(&self) -> f64 {
        self.frames
            .windows(2)
            .map(|w| gap_distance(&w[0], &w[1]).max(gap_distance(&w[1], &w[0])))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Chart { ctx: ChartContext, values: PiecewiseAnalyticPath },
    Basis { space: Arc<SymplecticSpace>, knots: Vec<f64>, segments: Vec<MatrixPolynomial> },
    Sampled(SampledFrames),
}

/// A continuous curve of Lagrangians, given by polynomial chart values in a
/// fixed chart, by a polynomial spanning matrix `M(s)` per segment, or by
/// samples.
#[derive(Debug, Clone)]
pub struct LagrangianCurve {
    repr: Repr,
}

const CHECK_POINTS: usize = 7;

impl LagrangianCurve {
    pub fn chart(l0: &LagrangianFrame, l1: &LagrangianFrame, values: PiecewiseAnalyticPath) -> Result<Self> {
        if values.dim() != l0.dim() {
            return Err(Error::Contract(format!("chart values must be {0}x{0}", l0.dim())));
        }
        let ctx = ChartContext::new(l0, l1)?;
        Ok(Self { repr: Repr::Chart { ctx, values } })
    }

    /// Curve spanned by the columns of `M(s)` on each knot interval. Every
    /// `M(s)` must have full column rank and isotropic span.
    pub fn basis(space: Arc<SymplecticSpace>, knots: Vec<f64>, segments: Vec<MatrixPolynomial>) -> Result<Self> {
        if knots.len() < 2 || segments.len() + 1 != knots.len() {
            return Err(Error::Contract("need n+1 knots for n segments".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Contract("knots must be strictly increasing".into()));
        }
        let (n, m) = (space.dim(), space.half_dim());
        for (j, seg) in segments.iter().enumerate() {
            if seg.nrows() != n || seg.ncols() != m {
                return Err(Error::Contract(format!("segment {j} must be {n}x{m}")));
            }
            for i in 0..CHECK_POINTS {
                let s = knots[j] + (knots[j + 1] - knots[j]) * i as f64 / (CHECK_POINTS - 1) as f64;
                let mm = seg.eval(s);
                let scale = spectral_norm(&mm).powi(2).max(f64::MIN_POSITIVE);
                if nullity(&mm, 1e-10) > 0 {
                    return Err(Error::Contract(format!("spanning matrix loses rank at s = {s}")));
                }
                let iso = isotropy_defect(&space, &mm);
                if iso > 1e-9 * scale {
                    return Err(Error::Contract(format!("span is not isotropic at s = {s} (defect {iso:.3e})")));
                }
            }
        }
        for j in 1..segments.len() {
            let l = LagrangianFrame::from_span(space.clone(), &segments[j - 1].eval(knots[j]))?;
            let r = LagrangianFrame::from_span(space.clone(), &segments[j].eval(knots[j]))?;
            let g = gap_distance(&l, &r);
            if g > 1e-8 {
                return Err(Error::Contract(format!("curve is discontinuous at knot {} (gap {g:.3e})", knots[j])));
            }
        }
        Ok(Self { repr: Repr::Basis { space, knots, segments } })
    }

    /// Sampled curve; consecutive samples must be closer than 0.5 in the gap metric.
    pub fn sampled(samples: SampledFrames) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Contract("a sampled curve needs at least two samples".into()));
        }
        for (i, w) in samples.frames.windows(2).enumerate() {
            let g = gap_distance(&w[0], &w[1]);
            if g >= 0.5 {
                return Err(Error::Resolution(format!(
                    "samples {i} and {} are too far apart (gap {g:.3}); refine the grid",
                    i + 1
                )));
            }
        }
        Ok(Self { repr: Repr::Sampled(samples) })
    }

    pub fn constant(l: &LagrangianFrame, domain: (f64, f64)) -> Result<Self> {
        Self::basis(l.space().clone(), vec![domain.0, domain.1], vec![MatrixPolynomial::constant(l.basis().clone())])
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        match &self.repr {
            Repr::Chart { ctx, .. } => ctx.l0().space(),
            Repr::Basis { space, .. } => space,
            Repr::Sampled(s) => s.frames[0].space(),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Chart { values, .. } => values.domain(),
            Repr::Basis { knots, .. } => (knots[0], *knots.last().unwrap()),
            Repr::Sampled(s) => (s.grid[0], *s.grid.last().unwrap()),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.repr, Repr::Sampled(_))
    }

    /// Chart context and values when the curve is given in a chart.
    pub fn chart_data(&self) -> Option<(&ChartContext, &PiecewiseAnalyticPath)> {
        match &self.repr {
            Repr::Chart { ctx, values } => Some((ctx, values)),
            _ => None,
        }
    }

    pub fn samples_ref(&self) -> Option<&SampledFrames> {
        match &self.repr {
            Repr::Sampled(s) => Some(s),
            _ => None,
        }
    }

    /// Knots and polynomial spanning matrices of an analytic curve. For chart
    /// curves the span is `M0 + M1 K^{-1} T(s)`.
    pub fn polynomial_pieces(&self) -> Option<(Vec<f64>, Vec<MatrixPolynomial>)> {
        match &self.repr {
            Repr::Chart { ctx, values } => {
                let segs = values
                    .segments()
                    .iter()
                    .map(|seg| {
                        let coeffs = seg
                            .coeffs()
                            .iter()
                            .enumerate()
                            .map(|(k, c)| {
                                let lifted = ctx.inverse_span(c.matrix());
                                if k == 0 {
                                    lifted
                                } else {
                                    lifted - ctx.l0().basis()
                                }
                            })
                            .collect();
                        MatrixPolynomial::new(coeffs).expect("nonempty coefficients")
                    })
                    .collect();
                Some((values.knots().to_vec(), segs))
            }
            Repr::Basis { knots, segments, .. } => Some((knots.clone(), segments.clone())),
            Repr::Sampled(_) => None,
        }
    }

    /// Spanning matrix at `s` of an analytic curve.
    pub fn span_at(&self, s: f64) -> Result<CMatrix> {
        match &self.repr {
            Repr::Chart { ctx, values } => Ok(ctx.inverse_span(values.eval(s)?.matrix())),
            Repr::Basis { knots, segments, .. } => {
                let (a, b) = (knots[0], *knots.last().unwrap());
                let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
                if !(s >= a - slack && s <= b + slack) {
                    return Err(Error::Domain { value: s, lo: a, hi: b });
                }
                let j = knots[1..knots.len() - 1].iter().take_while(|&&k| s > k).count();
                Ok(segments[j].eval(s))
            }
            Repr::Sampled(sm) => {
                let i = sm.grid.iter().position(|&g| g == s).ok_or_else(|| {
                    Error::Contract(format!("sampled curve has no sample at s = {s}"))
                })?;
                Ok(sm.frames[i].basis().clone())
            }
        }
    }

    pub fn frame_at(&self, s: f64) -> Result<LagrangianFrame> {
        if let Repr::Sampled(sm) = &self.repr {
            if let Some(i) = sm.grid.iter().position(|&g| g == s) {
                return Ok(sm.frames[i].clone());
            }
        }
        LagrangianFrame::from_span(self.space().clone(), &self.span_at(s)?)
    }

    /// Knots of an analytic curve, or the grid of a sampled one.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Chart { values, .. } => values.knots().to_vec(),
            Repr::Basis { knots, .. } => knots.clone(),
            Repr::Sampled(s) => s.grid.clone(),
        }
    }

    /// `per_segment` uniform samples per knot interval (knots included); the
    /// samples themselves for a sampled curve.
    pub fn samples(&self, per_segment: usize) -> Result<SampledFrames> {
        if let Repr::Sampled(s) = &self.repr {
            return Ok(s.clone());
        }
        let per = per_segment.max(1);
        let knots = self.breakpoints();
        let mut grid = vec![knots[0]];
        for w in knots.windows(2) {
            for i in 1..=per {
                grid.push(if i == per { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / per as f64 });
            }
        }
        self.samples_on(&grid)
    }

    /// Frames on a given grid; for a sampled curve the grid must be its own.
    pub fn samples_on(&self, grid: &[f64]) -> Result<SampledFrames> {
        if let Repr::Sampled(s) = &self.repr {
            if s.grid.len() == grid.len() && s.grid.iter().zip(grid).all(|(a, b)| (a - b).abs() <= 1e-12) {
                return Ok(s.clone());
            }
            return Err(Error::Contract("sampled curves can only be evaluated on their own grid".into()));
        }
        let frames = grid.iter().map(|&s| self.frame_at(s)).collect::<Result<Vec<_>>>()?;
        SampledFrames::new(grid.to_vec(), frames)
    }

    /// `U(s) gamma(s)` for a polynomial path of symplectic matrices.
    pub fn transform(&self, u: &MatrixPolynomial) -> Result<Self> {
        let n = self.space().dim();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Contract(format!("transformation must be {n}x{n}")));
        }
        match self.polynomial_pieces() {
            Some((knots, segs)) => {
                let segs = segs.iter().map(|m| u.mul(m)).collect();
                Self::basis(self.space().clone(), knots, segs)
            }
            None => {
                let s = self.samples_ref().expect("non-analytic curves are sampled");
                let frames = s
                    .grid
                    .iter()
                    .zip(s.frames.iter())
                    .map(|(&x, f)| LagrangianFrame::from_span(f.space().clone(), &(u.eval(x) * f.basis())))
                    .collect::<Result<Vec<_>>>()?;
                Self::sampled(SampledFrames::new(s.grid.clone(), frames)?)
            }
        }
    }

    /// Pointwise image under maps given on the sample grid.
    pub fn transform_sampled(&self, grid: &[f64], maps: &[SymplecticMap]) -> Result<Self> {
        if grid.len() != maps.len() {
            return Err(Error::Contract("one map per grid point required".into()));
        }
        let s = self.samples_on(grid)?;
        let frames = s.frames.iter().zip(maps).map(|(f, u)| u.apply(f)).collect::<Result<Vec<_>>>()?;
        Self::sampled(SampledFrames::new(grid.to_vec(), frames)?)
    }

    /// Largest polynomial degree of the spanning matrices.
    pub fn degree(&self) -> Option<usize> {
        self.polynomial_pieces().map(|(_, segs)| segs.iter().map(|s| s.degree()).max().unwrap_or(0))
    }

    pub fn to_json(&self) -> Value {
        let space = self.space().to_json();
        match &self.repr {
            Repr::Chart { ctx, values } => json!({
                "space": space,
                "chart": {"l0": ctx.l0().to_json(), "l1": ctx.l1().to_json(), "values": values.to_json()}
            }),
            Repr::Basis { knots, segments, .. } => json!({
                "space": space,
                "basis": {"knots": knots, "segments": segments.iter().map(|s| s.to_json()).collect::<Vec<_>>()}
            }),
            Repr::Sampled(s) => json!({
                "space": space,
                "samples": {"grid": s.grid, "frames": s.frames.iter().map(|f| f.to_json()).collect::<Vec<_>>()}
            }),
        }
    }

    /// Reads `{"space", "chart" | "basis" | "samples"}`; a missing space
    /// defaults to `fallback`.
    pub fn from_json(v: &Value, fallback: Option<&Arc<SymplecticSpace>>) -> Result<Self> {
        let space = match (v.get("space"), fallback) {
            (Some(s), _) => SymplecticSpace::from_json(s)?,
            (None, Some(f)) => f.clone(),
            (None, None) => return Err(Error::Parse("curve needs a 'space'".into())),
        };
        let wrap = |e: Error| Error::Parse(e.to_string());
        if let Some(c) = v.get("chart") {
            let l0 = LagrangianFrame::from_json(space.clone(), field(c, "l0")?)?;
            let l1 = LagrangianFrame::from_json(space, field(c, "l1")?)?;
            let values = AnyPath::from_json(field(c, "values")?)?
                .analytic()
                .ok_or_else(|| Error::Parse("chart values must be a polynomial or piecewise path".into()))?;
            return Self::chart(&l0, &l1, values).map_err(wrap);
        }
        if let Some(b) = v.get("basis") {
            let knots = reals(field(b, "knots")?, "knots")?;
            let segs = field(b, "segments")?
                .as_array()
                .ok_or_else(|| Error::Parse("'segments' must be an array".into()))?
                .iter()
                .map(MatrixPolynomial::from_json)
                .collect::<Result<Vec<_>>>()?;
            return Self::basis(space, knots, segs).map_err(wrap);
        }
        if let Some(s) = v.get("samples") {
            let grid = reals(field(s, "grid")?, "grid")?;
            let frames = field(s, "frames")?
                .as_array()
                .ok_or_else(|| Error::Parse("'frames' must be an array".into()))?
                .iter()
                .map(|f| LagrangianFrame::from_json(space.clone(), f))
                .collect::<Result<Vec<_>>>()?;
            return Self::sampled(SampledFrames::new(grid, frames).map_err(wrap)?).map_err(wrap);
        }
        Err(Error::Parse("curve must have one of 'chart', 'basis', 'samples'".into()))
    }
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| Error::Parse(format!("missing field '{name}'")))
}

fn reals(v: &Value, name: &str) -> Result<Vec<f64>> {
    v.as_array()
        .and_then(|a| a.iter().map(|x| x.as_f64()).collect::<Option<Vec<_>>>())
        .ok_or_else(|| Error::Parse(format!("'{name}' must be an array of numbers")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::chart::chart;
    use crate::linalg::{random_complex, random_hermitian};
    use crate::path::MatrixPolyPath;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_chart_curve(seed: u64) -> (LagrangianCurve, LagrangianFrame, LagrangianFrame) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = SymplecticSpace::standard(3);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l1 = LagrangianFrame::random(sp, &mut rng);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let values = MatrixPolyPath::new((-1.0, 1.0), vec![a, b]).unwrap();
        let c = LagrangianCurve::chart(&l0, &l1, PiecewiseAnalyticPath::single(values)).unwrap();
        (c, l0, l1)
    }

    #[test]
    fn chart_curve_pieces_reproduce_values() {
        let (c, l0, l1) = linear_chart_curve(1);
        let (_, segs) = c.polynomial_pieces().unwrap();
        let (_, values) = c.chart_data().unwrap();
        for s in [-1.0, -0.3, 0.5, 1.0] {
            let l = LagrangianFrame::from_span(c.space().clone(), &segs[0].eval(s)).unwrap();
            let t = chart(&l0, &l1, &l).unwrap();
            assert!((t.matrix() - values.eval(s).unwrap().matrix()).norm() < 1e-9);
        }
        let basis = LagrangianCurve::basis(c.space().clone(), vec![-1.0, 1.0], segs).unwrap();
        assert_eq!(basis.degree(), Some(1));
    }

    #[test]
    fn json_round_trip() {
        let (c, _, _) = linear_chart_curve(2);
        let back = LagrangianCurve::from_json(&c.to_json(), None).unwrap();
        for s in [-1.0, 0.2, 1.0] {
            assert!(gap_distance(&c.frame_at(s).unwrap(), &back.frame_at(s).unwrap()) < 1e-12);
        }
        let sm = LagrangianCurve::sampled(c.samples(20).unwrap()).unwrap();
        let back = LagrangianCurve::from_json(&sm.to_json(), None).unwrap();
        assert_eq!(back.samples_ref().unwrap().len(), 21);
    }

    #[test]
    fn rejects_discontinuous_samples_and_non_isotropic_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = SymplecticSpace::standard(2);
        let l = LagrangianFrame::random(sp.clone(), &mut rng);
        let s = SampledFrames::new(vec![0.0, 1.0], vec![l.clone(), l.j_image()]).unwrap();
        assert!(matches!(LagrangianCurve::sampled(s), Err(Error::Resolution(_))));
        let bad = MatrixPolynomial::new(vec![l.basis().clone(), random_complex(4, 2, &mut rng)]).unwrap();
        assert!(LagrangianCurve::basis(sp, vec![0.0, 1.0], vec![bad]).is_err());
    }
}
