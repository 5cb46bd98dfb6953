//! Dense complex linear algebra: Hermitian matrices, orthonormal frames,
//! eigen-decompositions and the rank decisions every other module relies on.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance used for every kernel and rank decision unless overridden.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;
const FRAME_TOL: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a complex matrix from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c64(data[i * cols + j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { c64(0.0, 0.0) })
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = singular_values(m);
    if m.nrows() < m.ncols() {
        // a wide matrix always has a nontrivial right kernel
        return 0.0;
    }
    sv.last().copied().unwrap_or(0.0)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Number of singular values at most `tol * max(1, ||m||)`, counting the
/// structural deficiency of wide matrices.
pub fn nullity(m: &CMatrix, tol: f64) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(m);
    let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
    let small = sv.iter().filter(|&&s| s <= tol * scale).count();
    small + m.ncols().saturating_sub(m.nrows().min(m.ncols()))
}

/// Orthonormal basis of the right null space, using an absolute threshold.
pub fn null_space(m: &CMatrix, abs_tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return zeros(0, 0);
    }
    let padded = if m.nrows() < cols {
        let mut p = zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .collect();
    let mut out = zeros(cols, picked.len());
    for (k, &i) in picked.iter().enumerate() {
        for r in 0..cols {
            out[(r, k)] = v_t[(i, r)].conj();
        }
    }
    out
}

/// Orthonormal basis of the column space, keeping singular values above
/// `rel_tol * sigma_max`.
pub fn range_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| smax > 0.0 && sv[i] > rel_tol * smax).collect();
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = zeros(m.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Unitary factor `U V^H` of the polar decomposition of a square matrix.
pub fn polar_unitary(a: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, true);
    svd.u.expect("requested U") * svd.v_t.expect("requested V^H")
}

pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Contract(format!(
            "solve: incompatible shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let x = a.clone().lu().solve(b).ok_or(Error::Singular("linear solve"))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("linear solve"));
    }
    Ok(x)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve(a, &identity(a.nrows()))
}

pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Selects columns by index.
pub fn columns(m: &CMatrix, idx: &[usize]) -> CMatrix {
    let mut out = zeros(m.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &m.column(i));
    }
    out
}

/// A square complex matrix with `||A - A^H||_F <= 1e-12 max(1, ||A||_F)`.
/// The stored matrix is exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Contract(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("matrix has non-finite entries".into()));
        }
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL * m.norm().max(1.0) {
            return Err(Error::Contract(format!("matrix is not Hermitian (defect {defect:.3e})")));
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Takes the Hermitian part without checking the defect.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "Hermitian part of a non-square matrix");
        Self(hermitian_part(m))
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self(diag_real(values))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `Q A Q^H`.
    pub fn conjugate_by(&self, q: &CMatrix) -> Self {
        Self::from_hermitian_part(&(q * &self.0 * q.adjoint()))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        HermitianMatrix(&self.0 * c64(rhs, 0.0))
    }
}

/// Orthonormal basis of a subspace: an `N x k` matrix with `B^H B = I_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    basis: CMatrix,
}

impl Frame {
    pub fn new(basis: CMatrix) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.adjoint() * &basis;
        let err = (gram - identity(k)).norm();
        if err > FRAME_TOL {
            return Err(Error::Contract(format!("frame is not orthonormal (error {err:.3e})")));
        }
        Ok(Self { basis })
    }

    pub(crate) fn new_unchecked(basis: CMatrix) -> Self {
        Self { basis }
    }

    /// Orthonormal basis of the column span of `m`.
    pub fn orthonormalize(m: &CMatrix, rel_tol: f64) -> Self {
        Self { basis: range_basis(m, rel_tol) }
    }

    pub fn empty(ambient: usize) -> Self {
        Self { basis: zeros(ambient, 0) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn into_basis(self) -> CMatrix {
        self.basis
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Frame {
        let n = self.ambient_dim();
        let resid = identity(n) - self.projector();
        Frame { basis: range_basis(&resid, 1e-8) }
    }

    /// Sine of the smallest principal angle with `other`; zero exactly when the
    /// subspaces intersect nontrivially.
    pub fn min_angle_sine(&self, other: &Frame) -> f64 {
        if self.rank() == 0 || other.rank() == 0 {
            return 1.0;
        }
        let resid = &self.basis - other.projector() * &self.basis;
        smallest_singular_value(&resid)
    }

    /// Dimension of the intersection with `other`.
    pub fn intersection_dim(&self, other: &Frame, tol: f64) -> usize {
        if self.rank() == 0 || other.rank() == 0 {
            return 0;
        }
        let resid = &self.basis - other.projector() * &self.basis;
        let sv = singular_values(&resid);
        let structural = self.rank().saturating_sub(sv.len());
        structural + sv.iter().filter(|&&s| s <= tol).count()
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Frame,
}

pub fn eig_herm(a: &HermitianMatrix) -> EigenDecomposition {
    let n = a.dim();
    if n == 0 {
        return EigenDecomposition { values: Vec::new(), vectors: Frame::empty(0) };
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(a.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = columns(&eig.eigenvectors, &order);
    EigenDecomposition { values, vectors: Frame::new_unchecked(vectors) }
}

pub fn eigenvalues_herm(a: &HermitianMatrix) -> Vec<f64> {
    if a.dim() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = a.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Absolute zero threshold used for `a`: `tol * max(1, spectral radius)`.
pub fn zero_threshold(values: &[f64], tol: f64) -> f64 {
    let radius = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    tol * radius.max(1.0)
}

/// Eigenspace of eigenvalues with `|lambda| <= tol * max(1, rho(A))`.
pub fn kernel(a: &HermitianMatrix, tol: f64) -> Result<Frame> {
    if tol <= 0.0 {
        return Err(Error::Contract("kernel tolerance must be positive".into()));
    }
    let eig = eig_herm(a);
    let thr = zero_threshold(&eig.values, tol);
    let idx: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() <= thr).collect();
    Ok(Frame::new_unchecked(columns(eig.vectors.basis(), &idx)))
}

/// `(negative, zero, positive)` counts with the given absolute zero threshold.
pub fn inertia(values: &[f64], zero_abs: f64) -> (usize, usize, usize) {
    let neg = values.iter().filter(|&&v| v < -zero_abs).count();
    let pos = values.iter().filter(|&&v| v > zero_abs).count();
    (neg, values.len() - neg - pos, pos)
}

pub fn random_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_complex(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Hermitian matrix with standard complex Gaussian entries (GUE scaling).
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = random_complex(n, n, rng);
    HermitianMatrix::from_hermitian_part(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_eigenvalues() {
        let e = eig_herm(&HermitianMatrix::identity(3));
        assert_eq!(e.values.len(), 3);
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let e = eig_herm(&HermitianMatrix::from_real_diagonal(&[5.0, -2.0, 0.0]));
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] + 2.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
        assert!((e.values[2] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_of_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 12] {
            let a = random_hermitian(n, &mut rng);
            let e = eig_herm(&a);
            let v = e.vectors.basis();
            let lam = diag_real(&e.values);
            let rec = v * lam * v.adjoint();
            assert!((rec - a.matrix()).norm() <= 1e-9 * a.norm());
            assert!((v.adjoint() * v - identity(n)).norm() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = real_matrix(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::Contract(_))));
        let rect = zeros(2, 3);
        assert!(HermitianMatrix::new(rect).is_err());
    }

    #[test]
    fn kernel_of_diagonal() {
        let k = kernel(&HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 3.0]), 1e-9).unwrap();
        assert_eq!(k.rank(), 2);
        let p = k.projector();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((p[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(p[(2, 2)].norm() < 1e-12);
        assert_eq!(kernel(&HermitianMatrix::identity(4), 1e-9).unwrap().rank(), 0);
        assert!(kernel(&HermitianMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn kernel_of_planted_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_unitary(6, &mut rng);
        let a = HermitianMatrix::from_real_diagonal(&[0.0, 1.3, -0.7, 2.0, 0.4, -3.1]).conjugate_by(&q);
        let k = kernel(&a, 1e-9).unwrap();
        assert_eq!(k.rank(), 1);
        let planted = Frame::new(q.columns(0, 1).into_owned()).unwrap();
        let sine = k.min_angle_sine(&planted);
        assert!(sine < 1e-7, "angle sine {sine}");
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_unitary(7, &mut rng);
        assert!((q.adjoint() * &q - identity(7)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = real_matrix(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
        assert_eq!(nullity(&m, 1e-9), 2);
    }
}
