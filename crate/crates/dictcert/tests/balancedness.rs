use dictcert::balancedness::{
    alpha_bound, apply_r, apply_t, apply_t_hat, dense, psi_term, restricted_min_sv, row_events, BalanceOptions, SvMethod,
};
use dictcert::linalg::Dictionary;
use dictcert::model::{gen_coefficients, gen_dictionary, DictKind, SparseCoeffs};
use dictcert::rng;
use dictcert::tangent::{random_tangent, rip_failure_witness};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn randvec(len: usize, seed: u64) -> DVector<f64> {
    let mut r = rng::stream(seed);
    DVector::from_fn(len, |_, _| r.sample(StandardNormal))
}

fn small(seed: u64) -> (Dictionary, SparseCoeffs) {
    let a = gen_dictionary(4, 4, DictKind::GaussianUnit, seed).unwrap();
    let x = gen_coefficients(4, 6, 2, seed + 50).unwrap();
    (a, x)
}

#[test]
fn matrix_free_operators_match_dense_assembly() {
    for seed in 0..5 {
        let (a, x) = small(seed);
        let xd = x.dense();
        let t = dense::t(&a, xd).unwrap();
        let r = dense::r(&a, xd).unwrap();
        let th = dense::t_hat(&a, xd).unwrap();
        for s in 0..5 {
            let z = randvec(24, 1000 * seed + s);
            let scale = z.norm();
            assert!((apply_t(&a, xd, &z).unwrap() - &t * &z).amax() <= 1e-10 * scale);
            assert!((apply_r(&a, xd, &z).unwrap() - &r * &z).amax() <= 1e-10 * scale);
            assert!((apply_t_hat(&a, xd, &z).unwrap() - &th * &z).amax() <= 1e-10 * scale);
        }
    }
}

#[test]
fn t_hat_plus_r_is_identity_kron_gram() {
    let a = gen_dictionary(6, 8, DictKind::GaussianUnit, 4).unwrap();
    let x = gen_coefficients(8, 30, 3, 5).unwrap();
    let xd = x.dense();
    let z = randvec(8 * 30, 6);
    let sum = apply_t_hat(&a, xd, &z).unwrap() + apply_r(&a, xd, &z).unwrap();
    let zm = DMatrix::from_column_slice(8, 30, z.as_slice());
    let want = a.gram() * zm;
    assert!((sum - DVector::from_column_slice(want.as_slice())).amax() < 1e-10 * z.norm());
}

#[test]
fn witness_lies_in_kernel_of_t() {
    let a = gen_dictionary(6, 6, DictKind::Orthonormal, 2).unwrap();
    let x = gen_coefficients(6, 40, 2, 3).unwrap();
    let perm = [1, 2, 3, 4, 5, 0];
    let (pert, _) = rip_failure_witness(&a, &x, &perm).unwrap();
    let dx = DVector::from_column_slice(pert.delta_x.as_slice());
    let tz = apply_t(&a, x.dense(), &dx).unwrap();
    assert!(tz.norm() <= 1e-10 * dx.norm());
}

#[test]
fn xi_dense_oracle() {
    let a = gen_dictionary(4, 4, DictKind::GaussianUnit, 7).unwrap();
    let x = gen_coefficients(4, 8, 1, 8).unwrap();
    let oracle = dense::xi(&a, &x).unwrap();
    for method in [SvMethod::Dense, SvMethod::Auto, SvMethod::Lanczos] {
        let est = restricted_min_sv(&a, &x, method).unwrap();
        assert!((est.xi - oracle).abs() <= 1e-8, "{method:?}: {} vs {oracle}", est.xi);
    }
}

#[test]
fn xi_healthy_instance() {
    let a = gen_dictionary(8, 8, DictKind::Orthonormal, 1).unwrap();
    let x = gen_coefficients(8, 512, 1, 2).unwrap();
    let est = restricted_min_sv(&a, &x, SvMethod::Auto).unwrap();
    assert!(est.xi > 0.25);
    let dense_xi = dense::xi(&a, &x).unwrap();
    assert!((est.xi - dense_xi).abs() <= 1e-8);
}

#[test]
fn empty_rows_do_not_affect_xi() {
    // With p = 3, k = 1 and n = 6, at least three rows have empty support.
    let a = gen_dictionary(6, 6, DictKind::GaussianUnit, 3).unwrap();
    let x = gen_coefficients(6, 3, 1, 4).unwrap();
    assert!(x.support().rows().iter().any(|r| r.is_empty()));
    // XX* is singular here, so T itself is undefined.
    assert!(restricted_min_sv(&a, &x, SvMethod::Dense).unwrap_err().is_numerical());
}

#[test]
fn psi_terms_sum_to_restricted_r() {
    let (a, x) = small(3);
    let (n, p) = (4, 6);
    let coords = x.support().coords();
    let z = dictcert::balancedness::embed(n, p, &coords, &randvec(coords.len(), 9));
    let mut sum = DMatrix::zeros(n, p);
    for i in 0..n {
        sum += psi_term(&a, &x, i).unwrap().apply(&z);
    }
    let rz = apply_r(&a, x.dense(), &DVector::from_column_slice(z.as_slice())).unwrap();
    let rz = dictcert::balancedness::embed(n, p, &coords, &dictcert::balancedness::restrict(&coords, &DMatrix::from_column_slice(n, p, rz.as_slice())));
    assert!((sum - rz).amax() <= 1e-9);
}

#[test]
fn psi_norm_matches_dense() {
    for seed in 0..4 {
        let (a, x) = small(seed);
        for i in 0..4 {
            let t = psi_term(&a, &x, i).unwrap();
            let d = dense::psi(&a, &x, i).unwrap();
            let want = d.symmetric_eigen().eigenvalues.amax();
            assert!((t.norm - want).abs() <= 1e-6 * want.max(1.0), "row {i}: {} vs {want}", t.norm);
        }
    }
}

#[test]
fn psi_vanishes_on_empty_row_with_orthonormal_a() {
    let a = gen_dictionary(6, 6, DictKind::Orthonormal, 3).unwrap();
    let x = gen_coefficients(6, 3, 1, 4).unwrap();
    let empty = (0..6).find(|&i| x.support().row(i).is_empty()).unwrap();
    let t = psi_term(&a, &x, empty).unwrap();
    assert_eq!(t.norm, 0.0);
    assert!(t.apply(&DMatrix::from_element(6, 3, 1.0)).amax() == 0.0);
}

#[test]
fn psi_bound_on_row_events() {
    let a = gen_dictionary(16, 16, DictKind::Orthonormal, 5).unwrap();
    let (n, k) = (16, 2);
    for seed in 0..5 {
        let x = gen_coefficients(n, 300, k, seed).unwrap();
        let events = row_events(&x);
        for i in 0..n {
            if events[i].holds {
                let t = psi_term(&a, &x, i).unwrap();
                assert!(t.norm <= 4.0 * k as f64 / n as f64 + 1e-9);
            }
        }
    }
}

#[test]
fn decomposition_terms_hold() {
    let a = gen_dictionary(8, 8, DictKind::Orthonormal, 3).unwrap();
    let x = gen_coefficients(8, 600, 1, 4).unwrap();
    let rep = alpha_bound(&a, &x, &BalanceOptions::default()).unwrap();
    let t = rep.terms.unwrap();
    assert!(t.term_identity >= 1.0 - a.mu() - 1e-12);
    assert!(t.chain_ok && t.tdiff_bound_ok && t.psi_sum_ok && t.identity_bound_ok);
    assert!(!rep.degenerate && rep.alpha > 0.0);
}

#[test]
fn alpha_holds_on_random_tangents() {
    let a = gen_dictionary(8, 8, DictKind::GaussianUnit, 11).unwrap();
    let x = gen_coefficients(8, 200, 1, 12).unwrap();
    let rep = alpha_bound(&a, &x, &BalanceOptions { with_terms: false, ..Default::default() }).unwrap();
    assert!(rep.alpha > 0.0);
    let mask = x.support().mask();
    let mut r = rng::stream(13);
    for _ in 0..100 {
        let d = random_tangent(&a, x.dense(), &mut r).unwrap();
        let off: f64 = d.delta_x.iter().zip(mask.iter()).filter(|(_, m)| !**m).map(|(v, _)| v * v).sum::<f64>().sqrt();
        assert!(off >= rep.alpha * d.delta_a.norm() * (1.0 - 1e-6), "off {off} α‖ΔA‖ {}", rep.alpha * d.delta_a.norm());
    }
}

#[test]
fn tangent_directions_consistent_with_t() {
    // T annihilates the Δ_X part of every tangent direction.
    let a = gen_dictionary(6, 6, DictKind::GaussianUnit, 2).unwrap();
    let x = gen_coefficients(6, 40, 2, 3).unwrap();
    let mut r = rng::stream(4);
    for _ in 0..10 {
        let d = random_tangent(&a, x.dense(), &mut r).unwrap();
        let dx = DVector::from_column_slice(d.delta_x.as_slice());
        let tdx = apply_t(&a, x.dense(), &dx).unwrap();
        assert!(tdx.norm() <= 1e-9 * dx.norm().max(1e-300), "‖TΔX‖ {}", tdx.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_psd(seed in 0u64..1_000_000, k in 1usize..4) {
        let a = gen_dictionary(5, 5, DictKind::GaussianUnit, seed).unwrap();
        let x = gen_coefficients(5, 12, k, seed ^ 0xabc).unwrap();
        let xd = x.dense();
        let z = randvec(60, seed ^ 0x55);
        let scale = z.norm_squared();
        if let Ok(tz) = apply_t(&a, xd, &z) {
            prop_assert!(z.dot(&tz) >= -1e-10 * scale);
        }
        let rz = apply_r(&a, xd, &z).unwrap();
        prop_assert!(z.dot(&rz) >= -1e-10 * scale);
    }

    #[test]
    fn compressed_t_is_symmetric(seed in 0u64..1_000_000) {
        let (a, x) = small(seed);
        // an empty row of X makes XX* singular and T undefined
        prop_assume!((0..x.n()).all(|i| !x.support().row(i).is_empty()));
        let k = dense::compressed_t(&a, &x).unwrap();
        prop_assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
    }
}

#[test]
fn sym_eigen_survives_sparse_psi_blocks() {
    // many all-zero rows; nalgebra's default threshold collapses this spectrum
    let a = gen_dictionary(6, 6, DictKind::GaussianUnit, dictcert::rng::derive(3, 0)).unwrap();
    let x = gen_coefficients(6, 20, 2, dictcert::rng::derive(3, 1)).unwrap();
    for i in 0..6 {
        let d = dense::psi(&a, &x, i).unwrap();
        let e = dictcert::linalg::sym_eigen(&d);
        let sv = d.singular_values().max();
        assert!((e.eigenvalues.amax() - sv).abs() <= 1e-10 * sv.max(1.0), "row {i}");
        assert!((e.eigenvalues.norm() - d.norm()).abs() <= 1e-10 * d.norm().max(1.0));
        let t = psi_term(&a, &x, i).unwrap();
        assert!((t.norm - sv).abs() <= 1e-6 * sv.max(1.0), "row {i}: {} vs {sv}", t.norm);
    }
}
