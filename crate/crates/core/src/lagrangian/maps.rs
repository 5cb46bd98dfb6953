use std::sync::Arc;

use super::{check_same_space, gap_distance, LagrangianFrame, SymplecticSpace};
use crate::error::{Error, Result};
use crate::linalg::{hstack, identity, inverse, smallest_singular_value, spectral_norm, zeros, CMatrix, HermitianMatrix};
use crate::path::MatrixPolynomial;

const MAP_TOL: f64 = 1e-9;

/// An invertible `T` with `T^H J T = J`.
#[derive(Debug, Clone)]
pub struct SymplecticMap {
    space: Arc<SymplecticSpace>,
    t: CMatrix,
    unitary: bool,
}

impl SymplecticMap {
    pub fn new(space: Arc<SymplecticSpace>, t: CMatrix) -> Result<Self> {
        let n = space.dim();
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::Contract(format!("symplectic map must be {n}x{n}")));
        }
        let j = space.j();
        let scale = spectral_norm(&t).powi(2).max(1.0);
        let defect = (t.adjoint() * j * &t - j).norm();
        if defect > MAP_TOL * scale {
            return Err(Error::Contract(format!("map does not preserve omega (defect {defect:.3e})")));
        }
        let commutes = (&t * j - j * &t).norm() <= MAP_TOL * scale;
        let isometric = (t.adjoint() * &t - identity(n)).norm() <= MAP_TOL;
        Ok(Self { space, t, unitary: commutes && isometric })
    }

    pub fn identity(space: Arc<SymplecticSpace>) -> Self {
        let n = space.dim();
        Self { space, t: identity(n), unitary: true }
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.t
    }

    /// Whether the map also commutes with `J` and is unitary.
    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// `T^{-1} = -J T^H J`.
    pub fn inverse(&self) -> SymplecticMap {
        let j = self.space.j();
        let inv = -(j * self.t.adjoint() * j);
        SymplecticMap { space: self.space.clone(), t: inv, unitary: self.unitary }
    }

    pub fn compose(&self, other: &SymplecticMap) -> Result<SymplecticMap> {
        check_same_space(&self.space, &other.space)?;
        SymplecticMap::new(self.space.clone(), &self.t * &other.t)
    }

    pub fn apply(&self, l: &LagrangianFrame) -> Result<LagrangianFrame> {
        check_same_space(&self.space, l.space())?;
        LagrangianFrame::from_span(self.space.clone(), &(&self.t * l.basis()))
    }
}

/// `Q = [M0, J M0]`, a unitary adapted to `L0 + L0^perp`; in these coordinates
/// `J` becomes `[[0, -I], [I, 0]]`.
fn adapted_basis(l0: &LagrangianFrame) -> CMatrix {
    hstack(l0.basis(), l0.j_image().basis())
}

fn block_matrix(a: &CMatrix, s: &CMatrix) -> Result<CMatrix> {
    let m = a.nrows();
    let a_inv_h = inverse(a)?.adjoint();
    let mut tq = zeros(2 * m, 2 * m);
    tq.view_mut((0, 0), (m, m)).copy_from(a);
    tq.view_mut((0, m), (m, m)).copy_from(&(-(a * s)));
    tq.view_mut((m, m), (m, m)).copy_from(&a_inv_h);
    Ok(tq)
}

/// The element of the stabilizer of `L0` with blocks `[[A, -A S], [0, A^{-H}]]`
/// with respect to `L0 + J L0`.
pub fn stabilizer_element(l0: &LagrangianFrame, a: &CMatrix, s: &HermitianMatrix) -> Result<SymplecticMap> {
    let m = l0.dim();
    if a.nrows() != m || a.ncols() != m || s.dim() != m {
        return Err(Error::Contract(format!("A and S must be {m}x{m}")));
    }
    let smin = smallest_singular_value(a);
    if smin <= 1e-12 * spectral_norm(a).max(1.0) {
        return Err(Error::Contract(format!("A is singular (smallest singular value {smin:.3e})")));
    }
    let q = adapted_basis(l0);
    let t = &q * block_matrix(a, s.matrix())? * q.adjoint();
    SymplecticMap::new(l0.space().clone(), t)
}

/// `(A, S)` recovered from a map fixing `L0`.
pub fn extract_stabilizer(l0: &LagrangianFrame, map: &SymplecticMap) -> Result<(CMatrix, HermitianMatrix)> {
    let m = l0.dim();
    let q = adapted_basis(l0);
    let tq = q.adjoint() * map.matrix() * &q;
    let lower = tq.view((m, 0), (m, m)).norm();
    if lower > MAP_TOL * tq.norm().max(1.0) {
        return Err(Error::Precondition(format!("map does not fix L0 (defect {lower:.3e})")));
    }
    let a = tq.view((0, 0), (m, m)).into_owned();
    let s = -(inverse(&a)? * tq.view((0, m), (m, m)));
    Ok((a, HermitianMatrix::from_hermitian_part(&s)))
}

/// `s -> stabilizer_element(L0, A, S(s))` for constant `A` and a polynomial
/// Hermitian `S(s)`, as a matrix polynomial.
pub fn stabilizer_path(l0: &LagrangianFrame, a: &CMatrix, s: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let m = l0.dim();
    if s.nrows() != m || s.ncols() != m {
        return Err(Error::Contract(format!("S(s) must be {m}x{m}")));
    }
    let q = adapted_basis(l0);
    let coeffs = s
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, sk)| -> Result<CMatrix> {
            let mut tq = if k == 0 { block_matrix(a, sk)? } else { zeros(2 * m, 2 * m) };
            if k > 0 {
                tq.view_mut((0, m), (m, m)).copy_from(&(-(a * sk)));
            }
            Ok(&q * tq * q.adjoint())
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixPolynomial::new(coeffs)
}

/// Unitary symplectic maps `eta_i` with `eta_i(L0) = curve_i`.
///
/// With `P`, `Q` the `+i`/`-i` eigenspaces of `J`, a unitary map commuting
/// with `J` acts on unitary coordinates by `W -> B W A^{-1}`. Taking `A = I`
/// and `B = W(curve_i) W(L0)^{-1}` gives `eta_i = P P^H + Q B Q^H`, which is
/// the identity where the curve meets `L0` and varies continuously with it.
pub fn unitary_lift(frames: &[LagrangianFrame], l0: &LagrangianFrame) -> Result<Vec<SymplecticMap>> {
    let space = l0.space().clone();
    for f in frames {
        check_same_space(&space, f.space())?;
    }
    for (i, w) in frames.windows(2).enumerate() {
        let g = gap_distance(&w[0], &w[1]);
        if g >= 0.5 {
            return Err(Error::Resolution(format!("curve jumps between samples {i} and {} (gap {g:.3})", i + 1)));
        }
    }
    let p = space.plus_eigenspace();
    let q = space.minus_eigenspace();
    let pp = p * p.adjoint();
    let w0_inv = l0.unitary_coordinate()?.adjoint();
    frames
        .iter()
        .map(|f| {
            let b = f.unitary_coordinate()? * &w0_inv;
            let eta = &pp + q * b * q.adjoint();
            SymplecticMap::new(space.clone(), eta)
        })
        .collect()
}

impl SymplecticMap {
    /// Operator-norm distance.
    pub fn distance(&self, other: &SymplecticMap) -> f64 {
        spectral_norm(&(&self.t - &other.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::chart::{chart_inverse, gap_distance};
    use crate::linalg::{c64, random_complex, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_stabilizers() {
        let sp = SymplecticSpace::standard(2);
        let l0 = LagrangianFrame::coordinate(sp.clone()).unwrap();
        let id = stabilizer_element(&l0, &identity(2), &HermitianMatrix::zeros(2)).unwrap();
        assert!((id.matrix() - identity(4)).norm() < 1e-14);
        assert!(id.is_unitary());
        let two = stabilizer_element(&l0, &(identity(2) * c64(2.0, 0.0)), &HermitianMatrix::zeros(2)).unwrap();
        assert!(!two.is_unitary());
        assert!(gap_distance(&two.apply(&l0).unwrap(), &l0) < 1e-12);
        assert!(stabilizer_element(&l0, &zeros(2, 2), &HermitianMatrix::zeros(2)).is_err());
    }

    #[test]
    fn random_stabilizers_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = SymplecticSpace::standard(3);
        for _ in 0..100 {
            let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
            let a = random_complex(3, 3, &mut rng) + identity(3) * c64(0.5, 0.0);
            let s = random_hermitian(3, &mut rng);
            let map = stabilizer_element(&l0, &a, &s).unwrap();
            let j = sp.j();
            assert!((map.matrix().adjoint() * j * map.matrix() - j).norm() < 1e-9 * map.matrix().norm().powi(2));
            assert!(gap_distance(&map.apply(&l0).unwrap(), &l0) < 1e-9);
            let (a2, s2) = extract_stabilizer(&l0, &map).unwrap();
            assert!((a2 - &a).norm() < 1e-9 * a.norm());
            assert!((s2.matrix() - s.matrix()).norm() < 1e-9 * s.norm().max(1.0));
            let other = LagrangianFrame::random(sp.clone(), &mut rng);
            assert!(map.apply(&other).unwrap().isotropy_defect() < 1e-9);
            let inv = map.inverse();
            assert!((inv.matrix() * map.matrix() - identity(6)).norm() < 1e-8 * map.matrix().norm().powi(2));
        }
    }

    #[test]
    fn stabilizer_path_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sp = SymplecticSpace::standard(2);
        let l0 = LagrangianFrame::random(sp, &mut rng);
        let a = random_complex(2, 2, &mut rng) + identity(2);
        let s = MatrixPolynomial::new(vec![
            random_hermitian(2, &mut rng).into_matrix(),
            random_hermitian(2, &mut rng).into_matrix(),
            random_hermitian(2, &mut rng).into_matrix(),
        ])
        .unwrap();
        let path = stabilizer_path(&l0, &a, &s).unwrap();
        for x in [-0.7, 0.0, 0.4] {
            let single = stabilizer_element(&l0, &a, &HermitianMatrix::from_hermitian_part(&s.eval(x))).unwrap();
            assert!((path.eval(x) - single.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn lifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sp = SymplecticSpace::standard(4);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let constant = vec![l0.clone(); 5];
        for eta in unitary_lift(&constant, &l0).unwrap() {
            assert!((eta.matrix() - identity(8)).norm() < 1e-12);
        }
        let l1 = LagrangianFrame::random(sp.clone(), &mut rng);
        let h = random_hermitian(4, &mut rng);
        let frames: Vec<_> = (0..=100)
            .map(|i| chart_inverse(&l0, &l1, &(&h * (-1.0 + 0.02 * i as f64))).unwrap())
            .collect();
        let lift = unitary_lift(&frames, &l0).unwrap();
        for (i, (eta, f)) in lift.iter().zip(frames.iter()).enumerate() {
            assert!(eta.is_unitary());
            assert!(gap_distance(&eta.apply(&l0).unwrap(), f) < 1e-8);
            if i > 0 {
                let step = gap_distance(f, &frames[i - 1]).max(gap_distance(&frames[i - 1], f));
                assert!(eta.distance(&lift[i - 1]) <= 10.0 * step + 1e-12);
            }
        }
        let jump = vec![l0.clone(), l0.j_image()];
        assert!(matches!(unitary_lift(&jump, &l0), Err(Error::Resolution(_))));
    }
}
