//! Paths of Hermitian matrices: single polynomial segments with exact jets,
//! piecewise-polynomial paths, and sampled paths.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{matrix_from_value, matrix_to_value};
use crate::linalg::{c64, zeros, CMatrix, HermitianMatrix};
use crate::series::MatSeries;

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

fn domain_slack(lo: f64, hi: f64) -> f64 {
    1e-12 * (1.0 + lo.abs().max(hi.abs()))
}

/// A rectangular matrix polynomial `sum_k s^k A_k` with no structure imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Contract("polynomial needs at least one coefficient".into()));
        }
        let shape = coeffs[0].shape();
        if coeffs.iter().any(|c| c.shape() != shape) {
            return Err(Error::Contract("polynomial coefficients differ in shape".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(m: CMatrix) -> Self {
        Self { coeffs: vec![m] }
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn eval(&self, s: f64) -> CMatrix {
        let mut acc = zeros(self.nrows(), self.ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * c64(s, 0.0) + c;
        }
        acc
    }

    /// Evaluation at a complex argument.
    pub fn eval_complex(&self, z: crate::linalg::C64) -> CMatrix {
        let mut acc = zeros(self.nrows(), self.ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Coefficients of the polynomial re-expanded around `s0`: `P(s0 + h) = sum_k C_k h^k`.
    pub fn shifted_coeffs(&self, s0: crate::linalg::C64) -> Vec<CMatrix> {
        let d = self.degree();
        (0..=d)
            .map(|k| {
                let mut acc = zeros(self.nrows(), self.ncols());
                let mut pow = c64(1.0, 0.0);
                for m in k..=d {
                    acc += &self.coeffs[m] * (pow * binomial(m, k));
                    pow *= s0;
                }
                acc
            })
            .collect()
    }

    /// Taylor series at `s0` padded with zeros to `len` terms.
    pub fn taylor(&self, s0: f64, len: usize) -> MatSeries {
        let mut c = self.shifted_coeffs(c64(s0, 0.0));
        c.resize(len.max(c.len()), zeros(self.nrows(), self.ncols()));
        c.truncate(len.max(1));
        MatSeries::new(c)
    }

    pub fn mul(&self, rhs: &MatrixPolynomial) -> MatrixPolynomial {
        let mut out = vec![zeros(self.nrows(), rhs.ncols()); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        MatrixPolynomial { coeffs: out }
    }

    pub fn adjoint(&self) -> MatrixPolynomial {
        MatrixPolynomial { coeffs: self.coeffs.iter().map(|c| c.adjoint()).collect() }
    }

    pub fn left_mul(&self, m: &CMatrix) -> MatrixPolynomial {
        MatrixPolynomial { coeffs: self.coeffs.iter().map(|c| m * c).collect() }
    }

    pub fn right_mul(&self, m: &CMatrix) -> MatrixPolynomial {
        MatrixPolynomial { coeffs: self.coeffs.iter().map(|c| c * m).collect() }
    }

    pub fn add(&self, rhs: &MatrixPolynomial) -> MatrixPolynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..len)
            .map(|k| {
                let mut acc = zeros(self.nrows(), self.ncols());
                if let Some(a) = self.coeffs.get(k) {
                    acc += a;
                }
                if let Some(b) = rhs.coeffs.get(k) {
                    acc += b;
                }
                acc
            })
            .collect();
        MatrixPolynomial { coeffs }
    }

    /// Affine reparametrization `Q(u) = P(alpha + beta u)`.
    pub fn reparametrize(&self, alpha: f64, beta: f64) -> MatrixPolynomial {
        let shifted = self.shifted_coeffs(c64(alpha, 0.0));
        let mut pow = 1.0;
        let coeffs = shifted
            .into_iter()
            .map(|c| {
                let out = c * c64(pow, 0.0);
                pow *= beta;
                out
            })
            .collect();
        MatrixPolynomial { coeffs }
    }

    /// Upper bound for `sup ||P'(s)||_2` over `[x, y]`.
    pub fn derivative_bound(&self, x: f64, y: f64) -> f64 {
        let r = x.abs().max(y.abs());
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c.norm() * r.powi(k as i32 - 1))
            .sum()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.coeffs.iter().map(matrix_to_value).collect())
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| Error::Parse("polynomial must be an array of matrices".into()))?;
        let coeffs = arr.iter().map(matrix_from_value).collect::<Result<Vec<_>>>()?;
        Self::new(coeffs).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `T(s) = sum_k s^k A_k` on `[a, b]` with Hermitian coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolyPath {
    domain: (f64, f64),
    coeffs: Vec<HermitianMatrix>,
    poly: MatrixPolynomial,
}

impl MatrixPolyPath {
    pub fn new(domain: (f64, f64), coeffs: Vec<HermitianMatrix>) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Contract(format!("invalid domain [{a}, {b}]")));
        }
        if coeffs.is_empty() {
            return Err(Error::Contract("path needs at least one coefficient".into()));
        }
        let n = coeffs[0].dim();
        if n == 0 || coeffs.iter().any(|c| c.dim() != n) {
            return Err(Error::Contract("path coefficients must share a positive dimension".into()));
        }
        let poly = MatrixPolynomial { coeffs: coeffs.iter().map(|c| c.matrix().clone()).collect() };
        Ok(Self { domain, coeffs, poly })
    }

    /// Builds a path from raw matrices, validating each coefficient.
    pub fn from_matrices(domain: (f64, f64), coeffs: Vec<CMatrix>) -> Result<Self> {
        let h = coeffs.into_iter().map(HermitianMatrix::new).collect::<Result<Vec<_>>>()?;
        Self::new(domain, h)
    }

    /// Takes Hermitian parts of the coefficients of a polynomial that is known
    /// to be Hermitian up to rounding.
    pub fn from_polynomial_hermitian_part(domain: (f64, f64), p: &MatrixPolynomial) -> Result<Self> {
        let h = p.coeffs.iter().map(HermitianMatrix::from_hermitian_part).collect();
        Self::new(domain, h)
    }

    pub fn constant(domain: (f64, f64), a: HermitianMatrix) -> Result<Self> {
        Self::new(domain, vec![a])
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[HermitianMatrix] {
        &self.coeffs
    }

    pub fn polynomial(&self) -> &MatrixPolynomial {
        &self.poly
    }

    pub fn contains(&self, s: f64) -> bool {
        let (a, b) = self.domain;
        let slack = domain_slack(a, b);
        s >= a - slack && s <= b + slack
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !self.contains(s) || !s.is_finite() {
            return Err(Error::Domain { value: s, lo: self.domain.0, hi: self.domain.1 });
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> Result<HermitianMatrix> {
        self.check_domain(s)?;
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix::from_hermitian_part(&self.poly.eval(s))
    }

    /// `[T(s0), T'(s0), ..., T^{(k)}(s0)]`, exact.
    pub fn eval_jet(&self, s0: f64, k: usize) -> Result<Vec<HermitianMatrix>> {
        self.check_domain(s0)?;
        let taylor = self.poly.taylor(s0, k + 1);
        let mut fact = 1.0;
        Ok(taylor
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j > 0 {
                    fact *= j as f64;
                }
                HermitianMatrix::from_hermitian_part(&(c * c64(fact, 0.0)))
            })
            .collect())
    }

    /// Taylor series of `T(s0 + h)` with `len` terms.
    pub fn taylor(&self, s0: f64, len: usize) -> Result<MatSeries> {
        self.check_domain(s0)?;
        Ok(self.poly.taylor(s0, len))
    }

    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        Self::new((lo, hi), self.coeffs.clone())
    }

    /// Same polynomial on a different domain.
    pub fn with_domain(&self, domain: (f64, f64)) -> Result<Self> {
        Self::new(domain, self.coeffs.clone())
    }

    /// `Q T(s) Q^H` for a constant matrix `Q`.
    pub fn conjugate_by(&self, q: &CMatrix) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.conjugate_by(q)).collect();
        Self::new(self.domain, coeffs).expect("conjugation preserves shape")
    }

    pub fn derivative_bound(&self, x: f64, y: f64) -> f64 {
        self.poly.derivative_bound(x, y)
    }

    pub fn to_json(&self) -> Value {
        json!({"domain": [self.domain.0, self.domain.1], "coeffs": self.poly.to_json()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let domain = parse_pair(v.get("domain"), "domain")?;
        let coeffs = v.get("coeffs").ok_or_else(|| Error::Parse("path is missing 'coeffs'".into()))?;
        let poly = MatrixPolynomial::from_json(coeffs)?;
        Self::from_matrices(domain, poly.coeffs).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn parse_pair(v: Option<&Value>, name: &str) -> Result<(f64, f64)> {
    let arr = v
        .and_then(|d| d.as_array())
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse(format!("'{name}' must be a two-element array")))?;
    let a = arr[0].as_f64().ok_or_else(|| Error::Parse(format!("'{name}' entries must be numbers")))?;
    let b = arr[1].as_f64().ok_or_else(|| Error::Parse(format!("'{name}' entries must be numbers")))?;
    Ok((a, b))
}

fn parse_reals(v: Option<&Value>, name: &str) -> Result<Vec<f64>> {
    let arr = v.and_then(|d| d.as_array()).ok_or_else(|| Error::Parse(format!("'{name}' must be an array")))?;
    arr.iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("'{name}' entries must be numbers"))))
        .collect()
}

/// Polynomial segments on consecutive knot intervals that agree at the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAnalyticPath {
    knots: Vec<f64>,
    segments: Vec<MatrixPolyPath>,
}

impl PiecewiseAnalyticPath {
    pub fn new(knots: Vec<f64>, segments: Vec<MatrixPolyPath>) -> Result<Self> {
        if knots.len() < 2 || segments.len() != knots.len() - 1 {
            return Err(Error::Contract("need n+1 knots for n segments".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Contract("knots must be finite and strictly increasing".into()));
        }
        let n = segments[0].dim();
        if segments.iter().any(|s| s.dim() != n) {
            return Err(Error::Contract("segments differ in dimension".into()));
        }
        // segments are re-domained onto their knot intervals
        let segments = segments
            .into_iter()
            .zip(knots.windows(2))
            .map(|(s, w)| s.with_domain((w[0], w[1])))
            .collect::<Result<Vec<_>>>()?;
        for j in 1..segments.len() {
            let x = knots[j];
            let l = segments[j - 1].eval_unchecked(x);
            let r = segments[j].eval_unchecked(x);
            let scale = l.norm().max(r.norm()).max(1.0);
            let jump = (l.matrix() - r.matrix()).norm();
            if jump > 1e-10 * scale {
                return Err(Error::Contract(format!("segments disagree at knot {x} (jump {jump:.3e})")));
            }
        }
        Ok(Self { knots, segments })
    }

    pub fn single(seg: MatrixPolyPath) -> Self {
        let (a, b) = seg.domain();
        Self { knots: vec![a, b], segments: vec![seg] }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> &[MatrixPolyPath] {
        &self.segments
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    pub fn segment_index(&self, s: f64) -> Result<usize> {
        let (a, b) = self.domain();
        let slack = domain_slack(a, b);
        if !(s >= a - slack && s <= b + slack) {
            return Err(Error::Domain { value: s, lo: a, hi: b });
        }
        Ok(self.knots[1..self.knots.len() - 1].iter().take_while(|&&k| s > k).count())
    }

    pub fn eval(&self, s: f64) -> Result<HermitianMatrix> {
        let j = self.segment_index(s)?;
        Ok(self.segments[j].eval_unchecked(s))
    }

    /// Samples the path at `count` uniformly spaced parameters per segment.
    pub fn sample(&self, per_segment: usize) -> SampledPath {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (j, seg) in self.segments.iter().enumerate() {
            let (a, b) = seg.domain();
            let start = if j == 0 { 0 } else { 1 };
            for i in start..=per_segment.max(1) {
                let s = a + (b - a) * i as f64 / per_segment.max(1) as f64;
                grid.push(s);
                values.push(seg.eval_unchecked(s));
            }
        }
        SampledPath { grid, values }
    }

    pub fn conjugate_by(&self, q: &CMatrix) -> Self {
        Self { knots: self.knots.clone(), segments: self.segments.iter().map(|s| s.conjugate_by(q)).collect() }
    }

    /// Restriction to `[lo, hi]`, splitting segments as needed.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let (a, b) = self.domain();
        if !(lo < hi) || lo < a - domain_slack(a, b) || hi > b + domain_slack(a, b) {
            return Err(Error::Domain { value: if lo < a { lo } else { hi }, lo: a, hi: b });
        }
        let mut knots = vec![lo];
        let mut segs = Vec::new();
        for seg in &self.segments {
            let (x, y) = seg.domain();
            let l = x.max(lo);
            let r = y.min(hi);
            if r - l > 0.0 {
                segs.push(seg.with_domain((l, r))?);
                knots.push(r);
            }
        }
        Self::new(knots, segs)
    }

    pub fn to_json(&self) -> Value {
        json!({"knots": self.knots, "segments": self.segments.iter().map(|s| s.to_json()).collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let knots = parse_reals(v.get("knots"), "knots")?;
        let segs = v
            .get("segments")
            .and_then(|s| s.as_array())
            .ok_or_else(|| Error::Parse("'segments' must be an array".into()))?;
        let mut segments = Vec::new();
        for (j, seg) in segs.iter().enumerate() {
            let coeffs = seg.get("coeffs").unwrap_or(seg);
            let poly = MatrixPolynomial::from_json(coeffs)?;
            let dom = match (knots.get(j), knots.get(j + 1)) {
                (Some(&a), Some(&b)) => (a, b),
                _ => return Err(Error::Parse("more segments than knot intervals".into())),
            };
            segments.push(MatrixPolyPath::from_matrices(dom, poly.coeffs).map_err(|e| Error::Parse(e.to_string()))?);
        }
        Self::new(knots, segments).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Hermitian matrices attached to a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Vec<f64>,
    values: Vec<HermitianMatrix>,
}

impl SampledPath {
    pub fn new(grid: Vec<f64>, values: Vec<HermitianMatrix>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::Contract("grid and values must be nonempty and of equal length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::Contract("grid must be finite and strictly increasing".into()));
        }
        let n = values[0].dim();
        if n == 0 || values.iter().any(|v| v.dim() != n) {
            return Err(Error::Contract("sampled values differ in dimension".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// Piecewise-linear interpolation, extended linearly beyond the grid.
    pub fn interpolate(&self, s: f64) -> CMatrix {
        let g = &self.grid;
        if g.len() == 1 {
            return self.values[0].matrix().clone();
        }
        let j = g[1..g.len() - 1].iter().take_while(|&&x| s > x).count();
        let (x0, x1) = (g[j], g[j + 1]);
        let w = (s - x0) / (x1 - x0);
        self.values[j].matrix() * c64(1.0 - w, 0.0) + self.values[j + 1].matrix() * c64(w, 0.0)
    }

    pub fn to_json(&self) -> Value {
        json!({"grid": self.grid, "values": self.values.iter().map(|v| matrix_to_value(v.matrix())).collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let grid = parse_reals(v.get("grid"), "grid")?;
        let vals = v
            .get("values")
            .and_then(|s| s.as_array())
            .ok_or_else(|| Error::Parse("'values' must be an array".into()))?;
        let values = vals
            .iter()
            .map(|m| matrix_from_value(m).and_then(|m| HermitianMatrix::new(m).map_err(|e| Error::Parse(e.to_string()))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Any of the three path layouts, distinguished by their JSON keys.
#[derive(Debug, Clone)]
pub enum AnyPath {
    Poly(MatrixPolyPath),
    Piecewise(PiecewiseAnalyticPath),
    Sampled(SampledPath),
}

impl AnyPath {
    pub fn from_json(v: &Value) -> Result<Self> {
        if v.get("knots").is_some() {
            Ok(AnyPath::Piecewise(PiecewiseAnalyticPath::from_json(v)?))
        } else if v.get("grid").is_some() {
            Ok(AnyPath::Sampled(SampledPath::from_json(v)?))
        } else if v.get("coeffs").is_some() {
            Ok(AnyPath::Poly(MatrixPolyPath::from_json(v)?))
        } else {
            Err(Error::Parse("path needs 'coeffs', 'knots' or 'grid'".into()))
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            AnyPath::Poly(p) => p.to_json(),
            AnyPath::Piecewise(p) => p.to_json(),
            AnyPath::Sampled(p) => p.to_json(),
        }
    }

    /// The analytic form, if the path has one.
    pub fn analytic(&self) -> Option<PiecewiseAnalyticPath> {
        match self {
            AnyPath::Poly(p) => Some(PiecewiseAnalyticPath::single(p.clone())),
            AnyPath::Piecewise(p) => Some(p.clone()),
            AnyPath::Sampled(_) => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            AnyPath::Poly(p) => p.domain(),
            AnyPath::Piecewise(p) => p.domain(),
            AnyPath::Sampled(p) => p.domain(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyPath::Poly(p) => p.dim(),
            AnyPath::Piecewise(p) => p.dim(),
            AnyPath::Sampled(p) => p.dim(),
        }
    }
}
