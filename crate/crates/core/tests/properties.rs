use indexflow::lagrangian::{LagrangianCurve, LagrangianFrame, SymplecticSpace};
use indexflow::linalg::{c64, eig_herm, frobenius, kernel, random_hermitian, random_unitary, CMatrix, HermitianMatrix};
use indexflow::maslov::{maslov_pair, maslov_single, MaslovOptions};
use indexflow::path::{MatrixPolyPath, PiecewiseAnalyticPath};
use indexflow::sigflow::{spectral_flow_direct, spectral_flow_via_signatures};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_path(seed: u64, n: usize, degree: usize, domain: (f64, f64)) -> MatrixPolyPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..=degree).map(|_| random_hermitian(n, &mut rng)).collect();
    MatrixPolyPath::new(domain, coeffs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jets_match_finite_differences(seed in any::<u64>(), s0 in -0.9f64..0.9) {
        let p = random_path(seed, 3, 4, (-1.0, 1.0));
        let jet = p.eval_jet(s0, 2).unwrap();
        let h = 1e-4;
        let at = |s: f64| p.eval(s).unwrap().into_matrix();
        let d1 = (at(s0 + h) - at(s0 - h)) / c64(2.0 * h, 0.0);
        let d2 = (at(s0 + h) - at(s0) * c64(2.0, 0.0) + at(s0 - h)) / c64(h * h, 0.0);
        prop_assert!((jet[1].matrix() - &d1).norm() <= 1e-6 * jet[1].norm().max(1.0));
        prop_assert!((jet[2].matrix() - &d2).norm() <= 1e-4 * jet[2].norm().max(1.0));
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(n, &mut rng);
        let e = eig_herm(&a);
        let v = e.vectors.basis();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, e.values.iter().map(|&x| c64(x, 0.0))));
        prop_assert!(frobenius(&(v * d * v.adjoint() - a.matrix())) <= 1e-9 * frobenius(a.matrix()));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constructed_kernel_is_recovered(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_unitary(n, &mut rng);
        let mut values = vec![0.0];
        values.extend((1..n).map(|i| if i % 2 == 0 { 0.5 + i as f64 } else { -0.5 - i as f64 }));
        let a = HermitianMatrix::from_hermitian_part(&(&q * indexflow::linalg::diag_real(&values) * q.adjoint()));
        let k = kernel(&a, 1e-9).unwrap();
        prop_assert_eq!(k.rank(), 1);
        let overlap = (q.columns(0, 1).adjoint() * k.basis())[(0, 0)].norm();
        prop_assert!((1.0 - overlap * overlap).max(0.0).sqrt() <= 1e-7);
    }

    #[test]
    fn spectral_flow_is_additive_under_concatenation(seed in any::<u64>(), cut in -0.7f64..0.7) {
        let p = random_path(seed, 4, 3, (-1.0, 1.0));
        let whole = PiecewiseAnalyticPath::single(p.clone());
        let left = PiecewiseAnalyticPath::single(p.restrict(-1.0, cut).unwrap());
        let right = PiecewiseAnalyticPath::single(p.restrict(cut, 1.0).unwrap());
        let total = spectral_flow_direct(&whole, 1e-9).unwrap();
        prop_assert_eq!(spectral_flow_direct(&left, 1e-9).unwrap() + spectral_flow_direct(&right, 1e-9).unwrap(), total);
        prop_assert_eq!(
            spectral_flow_via_signatures(&left, 1e-9).unwrap() + spectral_flow_via_signatures(&right, 1e-9).unwrap(),
            total
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn maslov_indices_are_additive_and_reparametrization_invariant(seed in any::<u64>(), cut in -0.6f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = SymplecticSpace::standard(2);
        let l0 = LagrangianFrame::random(sp.clone(), &mut rng);
        let l1 = LagrangianFrame::random(sp, &mut rng);
        let p = random_path(seed ^ 0xa5a5, 2, 2, (-1.0, 1.0));
        let curve = |q: MatrixPolyPath| LagrangianCurve::chart(&l0, &l1, PiecewiseAnalyticPath::single(q)).unwrap();
        let opts = MaslovOptions::default();
        let whole = maslov_single(&curve(p.clone()), &l0, &opts).unwrap();
        let left = maslov_single(&curve(p.restrict(-1.0, cut).unwrap()), &l0, &opts).unwrap();
        let right = maslov_single(&curve(p.restrict(cut, 1.0).unwrap()), &l0, &opts).unwrap();
        prop_assert_eq!(left + right, whole);
        // u in [0, 3] runs through s = -1 + 2u/3
        let stretched = MatrixPolyPath::from_matrices((0.0, 3.0), p.polynomial().reparametrize(-1.0, 2.0 / 3.0).coeffs().to_vec()).unwrap();
        prop_assert_eq!(maslov_single(&curve(stretched), &l0, &opts).unwrap(), whole);
        let constant = LagrangianCurve::constant(&l0, (-1.0, 1.0)).unwrap();
        let pl = maslov_pair(&curve(p.restrict(-1.0, cut).unwrap()), &LagrangianCurve::constant(&l0, (-1.0, cut)).unwrap(), &opts).unwrap();
        let pr = maslov_pair(&curve(p.restrict(cut, 1.0).unwrap()), &LagrangianCurve::constant(&l0, (cut, 1.0)).unwrap(), &opts).unwrap();
        prop_assert_eq!(pl + pr, maslov_pair(&curve(p), &constant, &opts).unwrap());
    }
}
