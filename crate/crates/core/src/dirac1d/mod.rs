//! Operators `P(s) = G (d/dt + B(s, t))` on a circle of length `2π` cut at
//! `y0 = 0` and `y1 = π`, with `B` piecewise constant in `t` and polynomial in
//! `s`. The arcs `X+ = (0, π)` and `X- = (π, 2π)` carry the Cauchy data.

mod cauchy;
mod spectrum;
mod transfer;
mod yn;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{matrix_from_value, matrix_to_value};
use crate::lagrangian::SymplecticSpace;
use crate::linalg::{block_diag, c64, frobenius, hermitian_defect, identity, random_unitary, zeros, CMatrix};
use crate::path::MatrixPolynomial;

pub use cauchy::{KernelBoundaryOptions, KernelBoundaryReport};
pub use spectrum::{fourier_derivative, fourier_synthesis, grid_points, wavenumbers, SpectrumOptions};
pub use yn::{random_family, yn_check, Convergence, RandomFamilyOptions, YnOptions, YnReport};

pub const TWO_PI: f64 = 2.0 * PI;

/// Snapping tolerance for arc endpoints given in configuration files.
const ARC_SNAP: f64 = 1e-9;

/// `G` and a list of Hermitian matrices anticommuting with it; `B(s)` is a
/// real combination of the list.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordData {
    g: CMatrix,
    sigma: Vec<CMatrix>,
}

impl CliffordData {
    pub fn new(g: CMatrix, sigma: Vec<CMatrix>) -> Result<Self> {
        let f = g.nrows();
        if f == 0 || f % 2 != 0 || g.ncols() != f {
            return Err(Error::Contract(format!("G must be square of even size, got {}x{}", g.nrows(), g.ncols())));
        }
        if frobenius(&(&g * &g + identity(f))) > 1e-10 || frobenius(&(&g + g.adjoint())) > 1e-10 {
            return Err(Error::Contract("G must satisfy G^2 = -I and G^H = -G".into()));
        }
        if g.trace().norm() > 1e-9 {
            return Err(Error::Contract("trace(iG) must vanish".into()));
        }
        for (i, s) in sigma.iter().enumerate() {
            if s.nrows() != f || s.ncols() != f {
                return Err(Error::Contract(format!("Sigma[{i}] has the wrong shape")));
            }
            if hermitian_defect(s) > 1e-10 {
                return Err(Error::Contract(format!("Sigma[{i}] is not Hermitian")));
            }
            if frobenius(&(&g * s + s * &g)) > 1e-10 {
                return Err(Error::Contract(format!("Sigma[{i}] does not anticommute with G")));
            }
        }
        Ok(Self { g, sigma })
    }

    /// `f = 2`, `G = [[0, -1], [1, 0]]`, generators `sigma_3` and `sigma_1`.
    pub fn standard() -> Self {
        let r = |a: f64, b: f64, c: f64, d: f64| crate::linalg::real_matrix(2, 2, &[a, b, c, d]);
        Self { g: r(0.0, -1.0, 1.0, 0.0), sigma: vec![r(1.0, 0.0, 0.0, -1.0), r(0.0, 1.0, 1.0, 0.0)] }
    }

    /// `blocks` copies of the standard fiber, each generator acting on one copy.
    pub fn direct_sum(blocks: usize) -> Self {
        let base = Self::standard();
        let blocks = blocks.max(1);
        let f = 2 * blocks;
        let mut g = zeros(f, f);
        let mut sigma = Vec::new();
        for b in 0..blocks {
            g.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&base.g);
            for s in &base.sigma {
                let mut m = zeros(f, f);
                m.view_mut((2 * b, 2 * b), (2, 2)).copy_from(s);
                sigma.push(m);
            }
        }
        Self { g, sigma }
    }

    pub fn conjugated(&self, q: &CMatrix) -> Result<Self> {
        let qh = q.adjoint();
        Self::new(q * &self.g * &qh, self.sigma.iter().map(|s| q * s * &qh).collect())
    }

    pub fn random<R: Rng + ?Sized>(blocks: usize, rng: &mut R) -> Self {
        let base = Self::direct_sum(blocks);
        let q = random_unitary(base.f(), rng);
        base.conjugated(&q).expect("conjugation preserves the relations")
    }

    pub fn f(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn sigma(&self) -> &[CMatrix] {
        &self.sigma
    }

    /// `sum_i p_i Sigma_i`.
    pub fn combination(&self, p: &[f64]) -> CMatrix {
        let mut b = zeros(self.f(), self.f());
        for (c, s) in p.iter().zip(&self.sigma) {
            b += s * c64(*c, 0.0);
        }
        b
    }

    pub fn to_json(&self) -> Value {
        json!({
            "G": matrix_to_value(&self.g),
            "Sigma": self.sigma.iter().map(matrix_to_value).collect::<Vec<_>>(),
        })
    }

    /// Accepts `{"G", "Sigma"}`, `{"blocks": k}` or `{"blocks": k, "seed": n}`
    /// (randomly conjugated direct sum); `null` means the standard fiber.
    pub fn from_json(v: &Value) -> Result<Self> {
        if v.is_null() {
            return Ok(Self::standard());
        }
        if let Some(g) = v.get("G") {
            let sigma = v
                .get("Sigma")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("fiber: \"Sigma\" must be an array of matrices".into()))?
                .iter()
                .map(matrix_from_value)
                .collect::<Result<Vec<_>>>()?;
            return Self::new(matrix_from_value(g)?, sigma);
        }
        let blocks = v.get("blocks").and_then(Value::as_u64).unwrap_or(1) as usize;
        match v.get("seed").and_then(Value::as_u64) {
            Some(seed) => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                Ok(Self::random(blocks, &mut rng))
            }
            None => Ok(Self::direct_sum(blocks)),
        }
    }
}

/// An arc `[t0, t1]` on which `B(s) = sum_i p_i(s) Sigma_i`; `coeffs[i][k]` is
/// the coefficient of `s^k` in `p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arc: (f64, f64),
    #[serde(rename = "B_coeffs")]
    pub coeffs: Vec<Vec<f64>>,
}

impl Cell {
    pub fn new(arc: (f64, f64), coeffs: Vec<Vec<f64>>) -> Self {
        Self { arc, coeffs }
    }

    pub fn len(&self) -> f64 {
        self.arc.1 - self.arc.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    fn degree(&self) -> usize {
        self.coeffs.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0)
    }

    fn same_potential(&self, other: &Cell) -> bool {
        let trimmed = |c: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let mut out: Vec<Vec<f64>> = c
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    while p.last() == Some(&0.0) {
                        p.pop();
                    }
                    p
                })
                .collect();
            while out.last().is_some_and(|p| p.is_empty()) {
                out.pop();
            }
            out
        };
        trimmed(&self.coeffs) == trimmed(&other.coeffs)
    }

    /// `p_i(s)` for every generator.
    pub fn weights(&self, s: f64) -> Vec<f64> {
        self.coeffs.iter().map(|p| p.iter().rev().fold(0.0, |acc, c| acc * s + c)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CircleDiracFamily {
    clifford: CliffordData,
    cells: Vec<Cell>,
    collar: f64,
    s_domain: (f64, f64),
    space: Arc<SymplecticSpace>,
    potentials: Vec<MatrixPolynomial>,
}

fn snap(t: f64) -> f64 {
    for anchor in [0.0, PI, TWO_PI] {
        if (t - anchor).abs() <= ARC_SNAP {
            return anchor;
        }
    }
    t
}

impl CircleDiracFamily {
    pub fn new(clifford: CliffordData, cells: Vec<Cell>, collar: f64, s_domain: (f64, f64)) -> Result<Self> {
        let (a, b) = s_domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Contract(format!("invalid s-domain [{a}, {b}]")));
        }
        if cells.is_empty() {
            return Err(Error::Contract("at least one cell is required".into()));
        }
        let mut cells = cells;
        for c in cells.iter_mut() {
            c.arc = (snap(c.arc.0), snap(c.arc.1));
            if c.coeffs.len() > clifford.sigma().len() {
                return Err(Error::Contract(format!(
                    "cell [{}, {}] has {} coefficient lists for {} generators",
                    c.arc.0,
                    c.arc.1,
                    c.coeffs.len(),
                    clifford.sigma().len()
                )));
            }
            if c.coeffs.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Contract("non-finite coefficient".into()));
            }
        }
        if cells[0].arc.0 != 0.0 || cells.last().unwrap().arc.1 != TWO_PI {
            return Err(Error::Contract("cells must cover [0, 2π] starting at 0".into()));
        }
        for w in cells.windows(2) {
            if (w[0].arc.1 - w[1].arc.0).abs() > ARC_SNAP {
                return Err(Error::Contract(format!("cells are not contiguous at t = {}", w[0].arc.1)));
            }
        }
        if cells.iter().any(|c| c.is_empty()) {
            return Err(Error::Contract("cells must have positive length".into()));
        }
        let cut = cells
            .iter()
            .position(|c| c.arc.1 == PI)
            .ok_or_else(|| Error::Contract("π must be a cell boundary".into()))?;
        if !(collar > 0.0) {
            return Err(Error::Contract("collar half-width must be positive".into()));
        }
        let pairs = [(cut, cut + 1), (cells.len() - 1, 0)];
        for (l, r) in pairs {
            let at = if l == cut { "π" } else { "0" };
            if cells[l].len() < collar - ARC_SNAP || cells[r].len() < collar - ARC_SNAP {
                return Err(Error::Contract(format!("cells adjacent to the cut at {at} are shorter than the collar")));
            }
            if !cells[l].same_potential(&cells[r]) {
                return Err(Error::Contract(format!("B must be the same on both sides of the cut at {at}")));
            }
        }
        let f = clifford.f();
        let j = block_diag(clifford.g(), &(-clifford.g()));
        let space = SymplecticSpace::new(j)?;
        let potentials = cells
            .iter()
            .map(|c| {
                let coeffs = (0..=c.degree())
                    .map(|k| {
                        let w: Vec<f64> = c.coeffs.iter().map(|p| p.get(k).copied().unwrap_or(0.0)).collect();
                        clifford.combination(&w)
                    })
                    .collect::<Vec<_>>();
                MatrixPolynomial::new(if coeffs.is_empty() { vec![zeros(f, f)] } else { coeffs })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clifford, cells, collar, s_domain, space, potentials })
    }

    /// `B(s) = sum_i p_i(s) Sigma_i` on the whole circle.
    pub fn t_independent(clifford: CliffordData, coeffs: Vec<Vec<f64>>, s_domain: (f64, f64)) -> Result<Self> {
        let cells = vec![Cell::new((0.0, PI), coeffs.clone()), Cell::new((PI, TWO_PI), coeffs)];
        Self::new(clifford, cells, 0.5, s_domain)
    }

    /// Standard fiber with `B(s) = a(s) sigma_3`; `a` lists the coefficients of `a(s)`.
    pub fn scalar_model(a: Vec<f64>, s_domain: (f64, f64)) -> Result<Self> {
        Self::t_independent(CliffordData::standard(), vec![a], s_domain)
    }

    pub fn clifford(&self) -> &CliffordData {
        &self.clifford
    }

    pub fn f(&self) -> usize {
        self.clifford.f()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    pub fn s_domain(&self) -> (f64, f64) {
        self.s_domain
    }

    /// Boundary values `(u(y0), u(y1))` with `J_Y = diag(G, -G)`: `G` relative to
    /// the coordinate pointing into `X+` at each point of `Y`.
    pub fn boundary_space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    /// Largest degree in `s` of the coefficients.
    pub fn degree(&self) -> usize {
        self.potentials.iter().map(MatrixPolynomial::degree).max().unwrap_or(0)
    }

    /// Index of the cell containing `t` (half-open on the right, `2π` in the last cell).
    pub fn cell_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=TWO_PI).contains(&t) {
            return Err(Error::Domain { value: t, lo: 0.0, hi: TWO_PI });
        }
        Ok(self.cells.iter().position(|c| t < c.arc.1).unwrap_or(self.cells.len() - 1))
    }

    pub fn potential(&self, cell: usize) -> &MatrixPolynomial {
        &self.potentials[cell]
    }

    pub fn b_at(&self, s: f64, t: f64) -> Result<CMatrix> {
        Ok(self.potentials[self.cell_index(t)?].eval(s))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "fiber": self.clifford.to_json(),
            "cells": self.cells,
            "cuts": [0.0, PI],
            "collar": self.collar,
            "s_domain": [self.s_domain.0, self.s_domain.1],
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let clifford = CliffordData::from_json(v.get("fiber").unwrap_or(&Value::Null))?;
        let cells: Vec<Cell> = serde_json::from_value(
            v.get("cells").cloned().ok_or_else(|| Error::Parse("family: missing \"cells\"".into()))?,
        )
        .map_err(|e| Error::Parse(format!("family cells: {e}")))?;
        if let Some(cuts) = v.get("cuts") {
            let cuts: Vec<f64> =
                serde_json::from_value(cuts.clone()).map_err(|e| Error::Parse(format!("family cuts: {e}")))?;
            if cuts.len() != 2 || snap(cuts[0]) != 0.0 || snap(cuts[1]) != PI {
                return Err(Error::Contract("the cut points must be [0, π]".into()));
            }
        }
        let collar = v.get("collar").and_then(Value::as_f64).unwrap_or(0.25);
        let s_domain = match v.get("s_domain") {
            Some(d) => {
                let d: (f64, f64) =
                    serde_json::from_value(d.clone()).map_err(|e| Error::Parse(format!("family s_domain: {e}")))?;
                d
            }
            None => (0.0, 1.0),
        };
        Self::new(clifford, cells, collar, s_domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_fiber_relations() {
        let c = CliffordData::standard();
        assert!(CliffordData::new(c.g().clone(), c.sigma().to_vec()).is_ok());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let r = CliffordData::random(2, &mut rng);
        assert_eq!(r.f(), 4);
        assert_eq!(r.sigma().len(), 4);
    }

    #[test]
    fn rejects_bad_fibers() {
        let c = CliffordData::standard();
        assert!(CliffordData::new(identity(2), vec![]).is_err());
        assert!(CliffordData::new(c.g().clone(), vec![identity(2)]).is_err());
    }

    #[test]
    fn collar_and_cut_validation() {
        let c = CliffordData::standard();
        let ok = vec![
            Cell::new((0.0, 0.5), vec![vec![1.0]]),
            Cell::new((0.5, PI), vec![vec![0.0, 1.0]]),
            Cell::new((PI, 4.0), vec![vec![0.0, 1.0]]),
            Cell::new((4.0, TWO_PI), vec![vec![1.0]]),
        ];
        assert!(CircleDiracFamily::new(c.clone(), ok.clone(), 0.4, (0.0, 1.0)).is_ok());
        let mut bad = ok.clone();
        bad[2].coeffs = vec![vec![2.0]];
        assert!(CircleDiracFamily::new(c.clone(), bad, 0.4, (0.0, 1.0)).is_err());
        assert!(CircleDiracFamily::new(c.clone(), ok.clone(), 0.6, (0.0, 1.0)).is_err());
        let no_cut = vec![Cell::new((0.0, 3.0), vec![]), Cell::new((3.0, TWO_PI), vec![])];
        assert!(CircleDiracFamily::new(c, no_cut, 0.1, (0.0, 1.0)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let fam = CircleDiracFamily::scalar_model(vec![-0.5, 1.0], (0.0, 1.0)).unwrap();
        let back = CircleDiracFamily::from_json(&fam.to_json()).unwrap();
        assert_eq!(back.cells(), fam.cells());
        assert_eq!(back.clifford(), fam.clifford());
        assert_eq!(back.s_domain(), fam.s_domain());
    }
}
