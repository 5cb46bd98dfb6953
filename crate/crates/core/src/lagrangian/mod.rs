//! Finite-dimensional symplectic Hilbert spaces `(C^N, J)` with
//! `omega(x, y) = <Jx, y>`, their Lagrangian subspaces, the chart atlas, the
//! gap metric, symplectic maps and unitary lifts.

mod chart;
mod curve;
mod maps;

pub use chart::{chart, chart_inverse, chart_of_basis, chart_transition, find_complementary, gap_distance, ChartContext};
pub use curve::{LagrangianCurve, SampledFrames};
pub use maps::{extract_stabilizer, stabilizer_element, stabilizer_path, unitary_lift, SymplecticMap};

use std::sync::Arc;

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{matrix_from_value, matrix_to_value};
use crate::linalg::{c64, hstack, identity, random_unitary, range_basis, zeros, CMatrix, Frame};

const STRUCTURE_TOL: f64 = 1e-12;
const ISOTROPY_TOL: f64 = 1e-9;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// `C^N` with a complex structure `J` (`J^2 = -I`, `J^H = -J`) whose `+i` and
/// `-i` eigenspaces have equal dimension.
#[derive(Debug, Clone)]
pub struct SymplecticSpace {
    j: CMatrix,
    /// Orthonormal bases of the `+i` and `-i` eigenspaces of `J`.
    plus: CMatrix,
    minus: CMatrix,
}

impl PartialEq for SymplecticSpace {
    fn eq(&self, other: &Self) -> bool {
        self.j.shape() == other.j.shape() && (&self.j - &other.j).norm() <= STRUCTURE_TOL
    }
}

impl SymplecticSpace {
    pub fn new(j: CMatrix) -> Result<Arc<Self>> {
        let n = j.nrows();
        if n == 0 || n != j.ncols() || n % 2 != 0 {
            return Err(Error::Contract(format!("J must be square of even size, got {}x{}", j.nrows(), j.ncols())));
        }
        let sq = (&j * &j + identity(n)).norm();
        if sq > STRUCTURE_TOL * n as f64 {
            return Err(Error::Contract(format!("J^2 != -I (defect {sq:.3e})")));
        }
        let skew = (&j + j.adjoint()).norm();
        if skew > STRUCTURE_TOL * n as f64 {
            return Err(Error::Contract(format!("J is not skew-Hermitian (defect {skew:.3e})")));
        }
        let tr = (j.trace() * c64(0.0, 1.0)).norm();
        if tr > 1e-9 {
            return Err(Error::Contract(format!("trace(iJ) = {tr:.3e}; no Lagrangian subspaces exist")));
        }
        let half = identity(n) * c64(0.5, 0.0);
        let ij = &j * c64(0.0, 0.5);
        let plus = range_basis(&(&half - &ij), 1e-8);
        let minus = range_basis(&(&half + &ij), 1e-8);
        if plus.ncols() != n / 2 || minus.ncols() != n / 2 {
            return Err(Error::Contract("eigenspaces of J are unbalanced".into()));
        }
        Ok(Arc::new(Self { j, plus, minus }))
    }

    /// `J = [[0, -I], [I, 0]]` on `C^{2m}`.
    pub fn standard(m: usize) -> Arc<Self> {
        let mut j = zeros(2 * m, 2 * m);
        for i in 0..m {
            j[(i, m + i)] = c64(-1.0, 0.0);
            j[(m + i, i)] = c64(1.0, 0.0);
        }
        Self::new(j).expect("standard structure is valid")
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// Dimension of every Lagrangian subspace.
    pub fn half_dim(&self) -> usize {
        self.j.nrows() / 2
    }

    pub fn j(&self) -> &CMatrix {
        &self.j
    }

    pub fn plus_eigenspace(&self) -> &CMatrix {
        &self.plus
    }

    pub fn minus_eigenspace(&self) -> &CMatrix {
        &self.minus
    }

    /// `omega(x, y) = <Jx, y> = y^H J x`.
    pub fn omega(&self, x: &CMatrix, y: &CMatrix) -> CMatrix {
        y.adjoint() * &self.j * x
    }

    pub fn to_json(&self) -> Value {
        json!({ "J": matrix_to_value(&self.j) })
    }

    pub fn from_json(v: &Value) -> Result<Arc<Self>> {
        if let Some(m) = v.get("standard").and_then(|m| m.as_u64()) {
            return Ok(Self::standard(m as usize));
        }
        let j = v.get("J").ok_or_else(|| Error::Parse("symplectic space needs 'J' or 'standard'".into()))?;
        Self::new(matrix_from_value(j)?).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn same_space(a: &Arc<SymplecticSpace>, b: &Arc<SymplecticSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn check_same_space(a: &Arc<SymplecticSpace>, b: &Arc<SymplecticSpace>) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::Contract("operands live in different symplectic spaces".into()))
    }
}

/// Orthonormal basis `M` (`N x N/2`) of a Lagrangian subspace.
#[derive(Debug, Clone)]
pub struct LagrangianFrame {
    space: Arc<SymplecticSpace>,
    basis: CMatrix,
}

impl LagrangianFrame {
    pub fn new(space: Arc<SymplecticSpace>, basis: CMatrix) -> Result<Self> {
        if basis.nrows() != space.dim() || basis.ncols() != space.half_dim() {
            return Err(Error::Contract(format!(
                "Lagrangian frame must be {}x{}, got {}x{}",
                space.dim(),
                space.half_dim(),
                basis.nrows(),
                basis.ncols()
            )));
        }
        let ortho = (basis.adjoint() * &basis - identity(space.half_dim())).norm();
        if ortho > ORTHONORMAL_TOL {
            return Err(Error::Contract(format!("frame is not orthonormal (error {ortho:.3e})")));
        }
        let iso = isotropy_defect(&space, &basis);
        if iso > ISOTROPY_TOL {
            return Err(Error::Contract(format!("subspace is not isotropic (||M^H J M|| = {iso:.3e})")));
        }
        Ok(Self { space, basis })
    }

    /// Lagrangian spanned by the columns of an arbitrary full-rank `N x N/2` matrix.
    pub fn from_span(space: Arc<SymplecticSpace>, m: &CMatrix) -> Result<Self> {
        let q = range_basis(m, 1e-12);
        if q.ncols() != space.half_dim() {
            return Err(Error::Contract(format!("spanning matrix has rank {} < {}", q.ncols(), space.half_dim())));
        }
        Self::new(space, q)
    }

    /// Like [`from_span`](Self::from_span), but a span that is isotropic only up
    /// to `max_defect` (after orthonormalization) is replaced by the nearest
    /// Lagrangian, whose unitary coordinate is the polar factor of `(Q^H M)(P^H M)^H`.
    /// Used for spans built from badly scaled data such as long transfer matrices.
    pub fn from_span_projected(space: Arc<SymplecticSpace>, m: &CMatrix, max_defect: f64) -> Result<Self> {
        let q = range_basis(m, 1e-12);
        if q.ncols() != space.half_dim() {
            return Err(Error::Contract(format!("spanning matrix has rank {} < {}", q.ncols(), space.half_dim())));
        }
        let iso = isotropy_defect(&space, &q);
        if iso <= ISOTROPY_TOL {
            return Self::new(space, q);
        }
        if iso > max_defect {
            return Err(Error::Contract(format!("subspace is not isotropic (||M^H J M|| = {iso:.3e})")));
        }
        let x = space.plus_eigenspace().adjoint() * &q;
        let y = space.minus_eigenspace().adjoint() * &q;
        let w = crate::linalg::polar_unitary(&(y * x.adjoint()));
        Self::from_unitary(space, &w)
    }

    /// Lagrangian with unitary coordinate `W`: the span of `P + Q W` where `P`,
    /// `Q` are the `+i` and `-i` eigenspace bases of `J`.
    pub fn from_unitary(space: Arc<SymplecticSpace>, w: &CMatrix) -> Result<Self> {
        let m = (space.plus_eigenspace() + space.minus_eigenspace() * w) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_span(space, &m)
    }

    pub fn random<R: Rng + ?Sized>(space: Arc<SymplecticSpace>, rng: &mut R) -> Self {
        let w = random_unitary(space.half_dim(), rng);
        Self::from_unitary(space, &w).expect("unitary coordinates give Lagrangians")
    }

    /// The span of the first `N/2` coordinate vectors; Lagrangian for the standard structure.
    pub fn coordinate(space: Arc<SymplecticSpace>) -> Result<Self> {
        let m = space.half_dim();
        let mut b = zeros(space.dim(), m);
        for i in 0..m {
            b[(i, i)] = c64(1.0, 0.0);
        }
        Self::new(space, b)
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn frame(&self) -> Frame {
        Frame::new_unchecked(self.basis.clone())
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `J L`, the orthogonal complement of `L`.
    pub fn j_image(&self) -> LagrangianFrame {
        LagrangianFrame { space: self.space.clone(), basis: self.space.j() * &self.basis }
    }

    /// Unitary coordinate `W(L) = (Q^H M)(P^H M)^{-1}`; independent of the basis.
    pub fn unitary_coordinate(&self) -> Result<CMatrix> {
        let x = self.space.plus_eigenspace().adjoint() * &self.basis;
        let y = self.space.minus_eigenspace().adjoint() * &self.basis;
        let xinv = crate::linalg::inverse(&x)?;
        Ok(y * xinv)
    }

    pub fn isotropy_defect(&self) -> f64 {
        isotropy_defect(&self.space, &self.basis)
    }

    /// Sine of the smallest principal angle; zero iff the subspaces meet.
    pub fn margin(&self, other: &LagrangianFrame) -> f64 {
        self.frame().min_angle_sine(&other.frame())
    }

    pub fn intersection_dim(&self, other: &LagrangianFrame, tol: f64) -> usize {
        self.frame().intersection_dim(&other.frame(), tol)
    }

    pub fn to_json(&self) -> Value {
        matrix_to_value(&self.basis)
    }

    pub fn from_json(space: Arc<SymplecticSpace>, v: &Value) -> Result<Self> {
        let m = matrix_from_value(v.get("basis").unwrap_or(v))?;
        // an orthonormal basis is kept as given: chart values refer to it
        Self::new(space.clone(), m.clone())
            .or_else(|_| Self::from_span(space, &m))
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn isotropy_defect(space: &SymplecticSpace, m: &CMatrix) -> f64 {
    (m.adjoint() * space.j() * m).norm()
}

/// `[M0, M1]` for a pair of frames.
pub(crate) fn pair_matrix(l0: &LagrangianFrame, l1: &LagrangianFrame) -> CMatrix {
    hstack(l0.basis(), l1.basis())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_space_and_coordinate_lagrangian() {
        let sp = SymplecticSpace::standard(3);
        let l = LagrangianFrame::coordinate(sp.clone()).unwrap();
        assert!(l.isotropy_defect() < 1e-15);
        assert_eq!(sp.plus_eigenspace().ncols(), 3);
    }

    #[test]
    fn rejects_bad_structures() {
        assert!(SymplecticSpace::new(identity(2)).is_err());
        // J = diag(i, i) has trace(iJ) = -2
        let j = CMatrix::from_diagonal_element(2, 2, c64(0.0, 1.0));
        assert!(SymplecticSpace::new(j).is_err());
        let j = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, -1.0)]));
        assert!(SymplecticSpace::new(j).is_ok());
    }

    #[test]
    fn random_lagrangians_are_lagrangian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = SymplecticSpace::standard(4);
        for _ in 0..20 {
            let l = LagrangianFrame::random(sp.clone(), &mut rng);
            assert!(l.isotropy_defect() < 1e-12);
            let w = l.unitary_coordinate().unwrap();
            assert!((w.adjoint() * &w - identity(4)).norm() < 1e-10);
            assert!(l.margin(&l.j_image()) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn non_isotropic_frame_rejected() {
        let sp = SymplecticSpace::standard(1);
        let b = crate::linalg::real_matrix(2, 1, &[0.6, 0.8]);
        // span(0.6, 0.8) in C^2 is Lagrangian for any real J of this form
        assert!(LagrangianFrame::new(sp.clone(), b).is_ok());
        let b = CMatrix::from_column_slice(2, 1, &[c64(0.6, 0.0), c64(0.0, 0.8)]);
        assert!(LagrangianFrame::new(sp, b).is_err());
    }
}
