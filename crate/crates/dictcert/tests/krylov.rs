use dictcert::krylov::{cg, lanczos, psd_norm, Extreme};
use dictcert::rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed);
    let g = DMatrix::from_fn(n, n + 3, |_, _| r.sample::<f64, _>(StandardNormal));
    &g * g.transpose()
}

#[test]
fn lanczos_matches_dense_extremes() {
    let m = spd(30, 1);
    let eig = m.clone().symmetric_eigen();
    let lo = lanczos(30, |v| &m * v, Extreme::Smallest, 1e-12, 100, 2);
    let hi = psd_norm(30, |v| &m * v, 1e-12, 3);
    assert!((lo.value - eig.eigenvalues.min()).abs() < 1e-8 * eig.eigenvalues.max());
    assert!((hi.value - eig.eigenvalues.max()).abs() < 1e-8 * eig.eigenvalues.max());
    assert!(lo.converged && hi.converged);
}

#[test]
fn lanczos_magnitude_on_indefinite() {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[-5.0, 1.0, 2.0, 3.0]));
    let e = lanczos(4, |v| &d * v, Extreme::Magnitude, 1e-12, 50, 1);
    assert!((e.value + 5.0).abs() < 1e-10);
    assert_eq!(lanczos(0, |v| v.clone(), Extreme::Largest, 1e-12, 5, 1).value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn cg_solves_spd_systems(seed in 0u64..100_000, n in 2usize..25) {
        let m = spd(n, seed);
        let mut r = rng::stream(seed ^ 7);
        let b = DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal));
        let sol = cg(|v| &m * v, &b, 1e-13, 50 * n);
        prop_assert!((&m * &sol.x - &b).norm() <= 1e-8 * b.norm() * m.norm());
    }
}
