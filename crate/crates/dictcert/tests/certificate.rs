use dictcert::certificate::{build_certificate, deflation_direction, golfing_pass, least_squares_cert, verify_certificate, CertParams};
use dictcert::linalg::Dictionary;
use dictcert::model::{gen_coefficients, gen_dictionary, DictKind, SparseCoeffs};
use dictcert::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn interp_and_offsup(a: &Dictionary, x: &SparseCoeffs, lambda: &DMatrix<f64>) -> (f64, f64) {
    let h = a.entries().tr_mul(lambda);
    let mask = x.support().mask();
    let sig = x.signs();
    let (mut dev, mut off) = (0.0f64, 0.0f64);
    for j in 0..x.p() {
        for i in 0..x.n() {
            if mask[(i, j)] {
                dev = dev.max((h[(i, j)] - sig[(i, j)]).abs());
            } else {
                off = off.max(h[(i, j)].abs());
            }
        }
    }
    (dev, off)
}

/// Tall Gaussian dictionaries are far less coherent than square ones.
fn tall(m: usize, n: usize, seed: u64) -> Dictionary {
    let mut r = rng::stream(seed);
    Dictionary::normalized(DMatrix::from_fn(m, n, |_, _| r.sample(StandardNormal))).unwrap()
}

#[test]
fn least_squares_orthonormal() {
    let a = gen_dictionary(6, 6, DictKind::Orthonormal, 3).unwrap();
    let omega = [1, 4];
    let signs = [1.0, -1.0];
    let l = least_squares_cert(&a, &omega, &signs).unwrap();
    let want = a.entries().column(1) - a.entries().column(4);
    assert!((&l - want).amax() < 1e-14);
    let h = a.entries().tr_mul(&l);
    for i in [0, 2, 3, 5] {
        assert!(h[i].abs() < 1e-14);
    }
}

#[test]
fn least_squares_single_atom() {
    let a = gen_dictionary(5, 9, DictKind::GaussianUnit, 4).unwrap();
    let l = least_squares_cert(&a, &[6], &[-1.0]).unwrap();
    assert!((&l + a.entries().column(6)).amax() < 1e-14);
}

#[test]
fn least_squares_offsupport_bound() {
    let mut checked = 0;
    for seed in 0..40 {
        let k = 2;
        let a = tall(400, 40, seed);
        if k as f64 * a.mu() >= 0.5 {
            continue;
        }
        let omega = [seed as usize % 40, (seed as usize + 11) % 40];
        let l = least_squares_cert(&a, &omega, &[1.0, -1.0]).unwrap();
        let h = a.entries().tr_mul(&l);
        let off = (0..40).filter(|i| !omega.contains(i)).map(|i| h[i].abs()).fold(0.0, f64::max);
        assert!(off <= 2.0 * k as f64 * a.mu() + 1e-12);
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn deflation_examples() {
    let a = gen_dictionary(8, 12, DictKind::GaussianUnit, 2).unwrap();
    let omega = [2, 7];
    let mut x = DVector::zeros(12);
    x[2] = 0.7;
    x[7] = -1.3;
    let params = CertParams::default();
    let z = deflation_direction(&a, &omega, &DMatrix::zeros(8, 12), &x, &params).unwrap();
    assert_eq!(z, DVector::zeros(8));

    let mut r = rng::stream(5);
    for _ in 0..20 {
        let q = DMatrix::from_fn(8, 12, |_, _| r.sample::<f64, _>(StandardNormal));
        let z = deflation_direction(&a, &omega, &q, &x, &params).unwrap();
        assert!((z.norm() - 0.25).abs() < 1e-14);
        for &i in &omega {
            assert!(a.entries().column(i).dot(&z).abs() < 1e-13);
        }
    }
}

#[test]
fn golfing_single_column() {
    let a = gen_dictionary(8, 8, DictKind::GaussianUnit, 9).unwrap();
    let x = gen_coefficients(8, 1, 2, 1).unwrap();
    let pass = golfing_pass(&a, &x, 0..1, 1.0, &CertParams::default()).unwrap();
    assert_eq!(pass.t_star, 1);
    let omega = x.support().col(0).to_vec();
    let signs: Vec<f64> = omega.iter().map(|&i| x.dense()[(i, 0)].signum()).collect();
    let ls = least_squares_cert(&a, &omega, &signs).unwrap();
    assert!((&pass.lambdas[0] - ls).amax() < 1e-14);

    let st = build_certificate(&a, &x, &CertParams::default()).unwrap();
    assert_eq!(st.passes(), 1);
    assert_eq!(st.lambda.ncols(), 1);
}

#[test]
fn golfing_t_star_window() {
    for seed in 0..10 {
        let a = gen_dictionary(10, 10, DictKind::GaussianUnit, seed).unwrap();
        let p = 15 + seed as usize;
        let x = gen_coefficients(10, p, 2, seed + 100).unwrap();
        let pass = golfing_pass(&a, &x, 0..p, 1.0, &CertParams::default()).unwrap();
        assert!(2 * pass.t_star + 1 >= p && pass.t_star <= p, "t⋆ {} p {p}", pass.t_star);
        assert_eq!(pass.q_trajectory.len(), p);
    }
}

#[test]
fn certificate_interpolates_and_stays_small() {
    let a = tall(4096, 16, 3);
    assert!(2.0 * a.mu() < 0.125);
    let (n, p, k) = (16, 400, 2);
    let x = gen_coefficients(n, p, k, 21).unwrap();
    let st = build_certificate(&a, &x, &CertParams::default()).unwrap();
    assert!(!st.coherence_warning);
    let (dev, off) = interp_and_offsup(&a, &x, &st.lambda);
    assert!(dev <= 1e-10, "interp {dev}");
    assert!(off <= 0.5, "offsup {off}");
    assert_eq!(st.per_step.len(), p);
}

#[test]
fn verify_certificate_failure_modes() {
    let a = gen_dictionary(8, 8, DictKind::Orthonormal, 1).unwrap();
    let x = gen_coefficients(8, 40, 2, 2).unwrap();
    let st = build_certificate(&a, &x, &CertParams::default()).unwrap();
    let good = verify_certificate(&a, &x, &st.lambda, 1.0).unwrap();
    assert!(good.interp_ok && good.offsup_ok);
    assert!((good.interp_dev - interp_and_offsup(&a, &x, &st.lambda).0).abs() < 1e-15);

    let zero = verify_certificate(&a, &x, &DMatrix::zeros(8, 40), 1.0).unwrap();
    assert!(!zero.interp_ok);

    let gaussian = gen_dictionary(8, 8, DictKind::GaussianUnit, 4).unwrap();
    let st = build_certificate(&gaussian, &x, &CertParams::default()).unwrap();
    let scaled = verify_certificate(&gaussian, &x, &(st.lambda * 10.0), 1.0).unwrap();
    assert!(!scaled.offsup_ok);
    assert!(verify_certificate(&a, &x, &DMatrix::zeros(8, 3), 1.0).is_err());
}
