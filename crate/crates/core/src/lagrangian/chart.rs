use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_same_space, pair_matrix, LagrangianFrame};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_defect, identity, nullity, random_hermitian, smallest_singular_value, solve, spectral_norm, CMatrix,
    HermitianMatrix,
};

/// Factorized data of a complementary pair `(L0, L1)`, reused across many
/// chart evaluations.
///
/// A subspace spanned by `M` is written `M = M0 X + M1 Y`; when `X` is
/// invertible it is the graph of `S = M1 Y X^{-1}` over `L0` and its chart
/// value is `K Y X^{-1}` with `K = M0^H J M1`.
#[derive(Debug, Clone)]
pub struct ChartContext {
    l0: LagrangianFrame,
    l1: LagrangianFrame,
    lu: nalgebra::LU<crate::linalg::C64, nalgebra::Dyn, nalgebra::Dyn>,
    k: CMatrix,
    k_inv: CMatrix,
}

impl ChartContext {
    pub fn new(l0: &LagrangianFrame, l1: &LagrangianFrame) -> Result<Self> {
        check_same_space(l0.space(), l1.space())?;
        let k = l0.basis().adjoint() * l0.space().j() * l1.basis();
        let smin = smallest_singular_value(&k);
        if smin < 1e-10 {
            return Err(Error::IllConditionedPair(smin));
        }
        let k_inv = crate::linalg::inverse(&k)?;
        let lu = pair_matrix(l0, l1).lu();
        Ok(Self { l0: l0.clone(), l1: l1.clone(), lu, k, k_inv })
    }

    pub fn l0(&self) -> &LagrangianFrame {
        &self.l0
    }

    pub fn l1(&self) -> &LagrangianFrame {
        &self.l1
    }

    /// `K = M0^H J M1`.
    pub fn k(&self) -> &CMatrix {
        &self.k
    }

    /// Coordinates `(X, Y)` of `M = M0 X + M1 Y`.
    pub fn coordinates(&self, m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        let h = self.l0.dim();
        let xy = self.lu.solve(m).ok_or(crate::error::Error::Singular("chart coordinates"))?;
        Ok((xy.rows(0, h).into_owned(), xy.rows(h, h).into_owned()))
    }

    /// Chart value of the span of `m` without symmetrization.
    pub fn value_raw(&self, m: &CMatrix) -> Result<CMatrix> {
        let (x, y) = self.coordinates(m)?;
        let scale = spectral_norm(&x).max(spectral_norm(&y)).max(f64::MIN_POSITIVE);
        let d = nullity(&x, 1e-10);
        if d > 0 || smallest_singular_value(&x) <= 1e-13 * scale {
            return Err(Error::ChartDomain { intersection_dim: d.max(1) });
        }
        let t = &self.k * y * crate::linalg::inverse(&x)?;
        Ok(t)
    }

    pub fn value(&self, l: &LagrangianFrame) -> Result<HermitianMatrix> {
        check_same_space(self.l0.space(), l.space())?;
        let t = self.value_raw(l.basis())?;
        let defect = hermitian_defect(&t);
        if defect > 1e-9 * t.norm().max(1.0) {
            return Err(Error::Contract(format!("chart value is not Hermitian (defect {defect:.3e})")));
        }
        Ok(HermitianMatrix::from_hermitian_part(&t))
    }

    /// Spanning matrix `M0 + M1 K^{-1} T` of the Lagrangian with chart value `T`.
    pub fn inverse_span(&self, t: &CMatrix) -> CMatrix {
        self.l0.basis() + self.l1.basis() * (&self.k_inv * t)
    }

    pub fn inverse(&self, t: &HermitianMatrix) -> Result<LagrangianFrame> {
        if t.dim() != self.l0.dim() {
            return Err(Error::Contract(format!("chart value must be {0}x{0}", self.l0.dim())));
        }
        LagrangianFrame::from_span(self.l0.space().clone(), &self.inverse_span(t.matrix()))
    }
}

/// Chart value of `L` in the chart of `(L0, L1)`: the matrix of `P_{L0} J S` in
/// the basis of `L0`, where `L` is the graph of `S: L0 -> L1`.
pub fn chart(l0: &LagrangianFrame, l1: &LagrangianFrame, l: &LagrangianFrame) -> Result<HermitianMatrix> {
    ChartContext::new(l0, l1)?.value(l)
}

/// Same construction for an arbitrary `N x N/2` matrix; the result is
/// Hermitian only when the span is isotropic.
pub fn chart_of_basis(l0: &LagrangianFrame, l1: &LagrangianFrame, m: &CMatrix) -> Result<CMatrix> {
    ChartContext::new(l0, l1)?.value_raw(m)
}

pub fn chart_inverse(l0: &LagrangianFrame, l1: &LagrangianFrame, t: &HermitianMatrix) -> Result<LagrangianFrame> {
    ChartContext::new(l0, l1)?.inverse(t)
}

/// Change of chart `(L0, L1) -> (L0, L1')` applied to the value `T`:
/// `T (I + Z0 K^{-1} T)^{-1}` where `M1 = M0 Z0 + M1' Z1`.
pub fn chart_transition(
    l0: &LagrangianFrame,
    l1: &LagrangianFrame,
    l1p: &LagrangianFrame,
    t: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let old = ChartContext::new(l0, l1)?;
    let new = ChartContext::new(l0, l1p)?;
    let (z0, _) = new.coordinates(l1.basis())?;
    let h = l0.dim();
    let inner = identity(h) + z0 * (&old.k_inv * t.matrix());
    let d = nullity(&inner, 1e-10);
    if d > 0 {
        return Err(Error::ChartDomain { intersection_dim: d });
    }
    let out = solve(&inner.transpose(), &t.matrix().transpose())?.transpose();
    Ok(HermitianMatrix::from_hermitian_part(&out))
}

/// `sup` over unit `u` in `L` of `dist(u, L')`, i.e. `||(I - P_{L'}) M_L||`.
pub fn gap_distance(l: &LagrangianFrame, lp: &LagrangianFrame) -> f64 {
    let resid = l.basis() - lp.basis() * (lp.basis().adjoint() * l.basis());
    spectral_norm(&resid).min(1.0)
}

fn worst_margin(candidate: &LagrangianFrame, targets: &[LagrangianFrame]) -> f64 {
    targets.iter().map(|t| candidate.margin(t)).fold(1.0, f64::min)
}

/// A Lagrangian transversal to every target, with smallest principal angle
/// sine at least `min_margin`.
///
/// `J L0` is tried first; after that, graphs of random Hermitian maps over
/// `J L0` (complementary to `L0` by construction) at several scales.
pub fn find_complementary(
    targets: &[LagrangianFrame],
    attempts: usize,
    seed: u64,
    min_margin: f64,
) -> Result<LagrangianFrame> {
    let first = targets.first().ok_or_else(|| Error::Contract("no targets given".into()))?;
    for t in targets {
        check_same_space(first.space(), t.space())?;
    }
    let good = min_margin.max(0.05);
    let jl0 = first.j_image();
    let mut best_margin = worst_margin(&jl0, targets);
    let mut best = jl0.clone();
    if best_margin >= good {
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = ChartContext::new(&jl0, first)?;
    let h = first.dim();
    for i in 0..attempts {
        let scale = [0.5, 1.0, 2.0, 0.25][i % 4] / (h as f64).sqrt();
        let t = &random_hermitian(h, &mut rng) * scale;
        let cand = match ctx.inverse(&t) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let margin = worst_margin(&cand, targets);
        if margin > best_margin {
            best_margin = margin;
            best = cand;
        }
        if best_margin >= good {
            return Ok(best);
        }
    }
    if best_margin >= min_margin.max(1e-6) {
        Ok(best)
    } else {
        Err(Error::SearchExhausted { attempts, best_margin })
    }
}

#[cfg(test)]
mod tests {
    use super::super::SymplecticSpace;
    use super::*;
    use crate::linalg::{c64, random_complex};
    use nalgebra::DVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn c2() -> (LagrangianFrame, LagrangianFrame) {
        let j = CMatrix::from_diagonal(&DVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, -1.0)]));
        let sp = SymplecticSpace::new(j).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let l0 = LagrangianFrame::new(sp.clone(), crate::linalg::real_matrix(2, 1, &[r, r])).unwrap();
        let l1 = LagrangianFrame::new(sp, crate::linalg::real_matrix(2, 1, &[r, -r])).unwrap();
        (l0, l1)
    }

    #[test]
    fn two_dimensional_example() {
        let (l0, l1) = c2();
        assert!(chart(&l0, &l1, &l0).unwrap().norm() < 1e-14);
        for t in [-1.0, 0.0, 1.0] {
            let l = chart_inverse(&l0, &l1, &HermitianMatrix::from_real_diagonal(&[t])).unwrap();
            assert!(l.isotropy_defect() < 1e-12);
            assert!((chart(&l0, &l1, &l).unwrap().matrix()[(0, 0)].re - t).abs() < 1e-12);
        }
        assert!(matches!(chart(&l0, &l1, &l1), Err(Error::ChartDomain { intersection_dim: 1 })));
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = SymplecticSpace::standard(3);
        for _ in 0..20 {
            let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
            let l1 = LagrangianFrame::random(sp.clone(), &mut rng);
            let t = random_hermitian(3, &mut rng);
            let l = chart_inverse(&l0, &l1, &t).unwrap();
            let back = chart(&l0, &l1, &l).unwrap();
            assert!((back.matrix() - t.matrix()).norm() < 1e-8);
            // a Lagrangian near L0
            let near = chart_inverse(&l0, &l1, &(&random_hermitian(3, &mut rng) * 1e-2)).unwrap();
            let again = chart_inverse(&l0, &l1, &chart(&l0, &l1, &near).unwrap()).unwrap();
            assert!(gap_distance(&near, &again) < 1e-8);
        }
    }

    #[test]
    fn kernel_matches_intersection_with_l0() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sp = SymplecticSpace::standard(3);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l1 = LagrangianFrame::random(sp, &mut rng);
        let t = HermitianMatrix::from_real_diagonal(&[0.0, 2.0, 0.0]);
        let l = chart_inverse(&l0, &l1, &t).unwrap();
        assert_eq!(l.intersection_dim(&l0, 1e-8), 2);
    }

    #[test]
    fn transition_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sp = SymplecticSpace::standard(4);
        for _ in 0..20 {
            let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
            let l1 = LagrangianFrame::random(sp.clone(), &mut rng);
            let l1p = LagrangianFrame::random(sp.clone(), &mut rng);
            let t = random_hermitian(4, &mut rng);
            let direct = chart(&l0, &l1p, &chart_inverse(&l0, &l1, &t).unwrap()).unwrap();
            let via = chart_transition(&l0, &l1, &l1p, &t).unwrap();
            assert!((direct.matrix() - via.matrix()).norm() < 1e-8 * direct.norm().max(1.0));
            let same = chart_transition(&l0, &l1, &l1, &t).unwrap();
            assert!((same.matrix() - t.matrix()).norm() < 1e-10);
            assert!(chart_transition(&l0, &l1, &l1p, &HermitianMatrix::zeros(4)).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn non_isotropic_frames_give_non_hermitian_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sp = SymplecticSpace::standard(3);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l1 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l = LagrangianFrame::random(sp.clone(), &mut rng);
        let mut prev = 0.0;
        for eps in [1e-6, 1e-4, 1e-2] {
            let m = l.basis() + random_complex(6, 3, &mut ChaCha8Rng::seed_from_u64(1)) * c64(eps, 0.0);
            let iso = super::super::isotropy_defect(&sp, &m);
            let t = chart_of_basis(&l0, &l1, &m).unwrap();
            let d = hermitian_defect(&t);
            assert!(d > 0.0 && d > prev);
            assert!(d / iso > 1e-3 && d / iso < 1e3, "{d} vs {iso}");
            prev = d;
        }
    }

    #[test]
    fn gap_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sp = SymplecticSpace::standard(2);
        let l = LagrangianFrame::random(sp.clone(), &mut rng);
        assert!(gap_distance(&l, &l) < 1e-14);
        assert!((gap_distance(&l, &l.j_image()) - 1.0).abs() < 1e-12);
        // real graphs [I; S]: the sup over complex unit vectors is attained on real ones
        let graph = |s: [f64; 3]| {
            let m = crate::linalg::real_matrix(4, 2, &[1.0, 0.0, 0.0, 1.0, s[0], s[1], s[1], s[2]]);
            LagrangianFrame::from_span(sp.clone(), &m).unwrap()
        };
        let l = graph([0.3, -1.2, 0.5]);
        let lp = graph([-0.8, 0.4, 2.0]);
        let g = gap_distance(&l, &lp);
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let c = crate::linalg::real_matrix(2, 1, &[rng.sample(StandardNormal), rng.sample(StandardNormal)]);
            let x = l.basis() * c;
            let x = x.unscale(x.norm());
            let d = (&x - lp.basis() * (lp.basis().adjoint() * &x)).norm();
            best = best.max(d);
        }
        assert!(best <= g + 1e-12 && g - best < 1e-3, "{g} vs {best}");
    }

    #[test]
    fn complementary_search() {
        let (l0, _) = c2();
        let jl0 = l0.j_image();
        let fast = find_complementary(&[l0.clone()], 10, 1, 1e-6).unwrap();
        assert!(gap_distance(&fast, &jl0) < 1e-14);
        let both = find_complementary(&[l0.clone(), jl0.clone()], 50, 1, 1e-6).unwrap();
        assert!(both.margin(&l0) >= 1e-6 && both.margin(&jl0) >= 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sp = SymplecticSpace::standard(4);
        let targets: Vec<_> = (0..20).map(|_| LagrangianFrame::random(sp.clone(), &mut rng)).collect();
        let l = find_complementary(&targets, 200, 2, 1e-6).unwrap();
        assert!(targets.iter().all(|t| l.margin(t) >= 1e-6));
    }
}
