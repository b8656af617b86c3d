use dictcert::io::{decode_dlmat, encode_dlmat, read_instance, write_instance};
use dictcert::linalg::{c_a_adjoint, c_a_apply, frob_dot, gram_submatrix_report, mutual_coherence, phi_project, Dictionary};
use dictcert::model::{gen_coefficients, gen_dictionary, gen_instance, is_desirable_support, model_sigma, observe, DictKind, SparseCoeffs, SupportPattern};
use dictcert::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn gauss(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed);
    DMatrix::from_fn(m, n, |_, _| r.sample(StandardNormal))
}

#[test]
fn coherence_examples() {
    let id = Dictionary::new(DMatrix::identity(4, 4)).unwrap();
    assert_eq!(id.mu(), 0.0);
    let s = 0.5f64.sqrt();
    let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, s, s]);
    assert!((mutual_coherence(&a).unwrap() - s).abs() < 1e-15);

    let a = gen_dictionary(8, 16, DictKind::GaussianUnit, 3).unwrap();
    let e = a.entries();
    let mut best: f64 = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            if i != j {
                best = best.max(e.column(i).dot(&e.column(j)).abs());
            }
        }
    }
    assert!((a.mu() - best).abs() < 1e-14);
}

#[test]
fn non_unit_columns_rejected() {
    assert!(Dictionary::new(DMatrix::from_element(3, 2, 1.0)).is_err());
    assert!(Dictionary::normalized(DMatrix::zeros(3, 2)).is_err());
}

#[test]
fn phi_projection_examples() {
    let a = gen_dictionary(6, 9, DictKind::GaussianUnit, 5).unwrap();
    assert!(phi_project(&a, a.entries()).unwrap().amax() < 1e-14);
    let m = gauss(6, 9, 1);
    let n = gauss(6, 9, 2);
    let pm = phi_project(&a, &m).unwrap();
    assert!((phi_project(&a, &pm).unwrap() - &pm).amax() < 1e-13);
    let pn = phi_project(&a, &n).unwrap();
    assert!((frob_dot(&pm, &n) - frob_dot(&m, &pn)).abs() < 1e-10);
}

#[test]
fn c_a_examples() {
    let a = gen_dictionary(5, 7, DictKind::GaussianUnit, 8).unwrap();
    assert_eq!(c_a_apply(&a, &DVector::zeros(7)).unwrap(), DMatrix::zeros(5, 7));
    let mut e = DVector::zeros(7);
    e[3] = 1.0;
    let out = c_a_apply(&a, &e).unwrap();
    for i in 0..7 {
        let want = if i == 3 { a.entries().column(3).norm() } else { 0.0 };
        assert_eq!(out.column(i).norm(), want);
    }
    let z = DVector::from_column_slice(gauss(7, 1, 9).as_slice());
    assert!((c_a_apply(&a, &z).unwrap().norm() - z.norm()).abs() < 1e-12);
    let ones = c_a_adjoint(&a, a.entries()).unwrap();
    assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14));
    let m = gauss(5, 7, 10);
    assert!(c_a_adjoint(&a, &phi_project(&a, &m).unwrap()).unwrap().amax() < 1e-14);
    let lhs = frob_dot(&c_a_apply(&a, &z).unwrap(), &m);
    let rhs = z.dot(&c_a_adjoint(&a, &m).unwrap());
    assert!((lhs - rhs).abs() < 1e-10);
}

#[test]
fn gram_submatrix_bounds() {
    let a = gen_dictionary(4, 4, DictKind::Orthonormal, 1).unwrap();
    let r = gram_submatrix_report(&a, &[0, 2, 3]).unwrap();
    assert!((r.smax_sq - 1.0).abs() < 1e-12 && (r.smin - 1.0).abs() < 1e-12 && (r.inv_norm - 1.0).abs() < 1e-12);
    assert!(r.neumann_dev < 1e-12);

    let mut tried = 0;
    for seed in 0..60 {
        let a = Dictionary::normalized(gauss(400, 20, seed)).unwrap();
        let k = 2;
        if k as f64 * a.mu() >= 0.5 {
            continue;
        }
        tried += 1;
        let r = gram_submatrix_report(&a, &[seed as usize % 20, (seed as usize * 7 + 3) % 20]).unwrap();
        assert!(r.inv_norm <= 2.0);
        assert!(r.neumann_dev < 2.0 * r.k_mu);
        assert!(r.all_ok());
    }
    assert!(tried > 20);
}

#[test]
fn dictionary_generation() {
    let o = gen_dictionary(4, 4, DictKind::Orthonormal, 11).unwrap();
    assert!(o.mu() < 1e-14);
    let g1 = gen_dictionary(8, 12, DictKind::GaussianUnit, 4).unwrap();
    let g2 = gen_dictionary(8, 12, DictKind::GaussianUnit, 4).unwrap();
    assert_eq!(g1.entries().as_slice(), g2.entries().as_slice());

    // Measured: medians of μ for 64×128 sit near 0.47.
    let mut mus: Vec<f64> = (0..50).map(|s| gen_dictionary(64, 128, DictKind::GaussianUnit, s).unwrap().mu()).collect();
    mus.sort_by(f64::total_cmp);
    let med = 0.5 * (mus[24] + mus[25]);
    assert!(med > 0.1 && med < 0.6, "median μ {med}");
}

#[test]
fn coefficient_model() {
    let x = gen_coefficients(6, 4, 2, 3).unwrap();
    assert!((x.sigma() - (6.0f64 / 8.0).sqrt()).abs() < 1e-15);
    assert_eq!(x.sigma(), model_sigma(6, 4, 2));
    for j in 0..4 {
        assert_eq!(x.dense().column(j).iter().filter(|v| **v != 0.0).count(), 2);
    }
    let full = gen_coefficients(5, 7, 5, 3).unwrap();
    assert!(full.dense().iter().all(|v| *v != 0.0));

    let (n, p, k) = (6usize, 5usize, 2usize);
    let trials = 10_000u64;
    let mean: f64 = (0..trials).map(|t| gen_coefficients(n, p, k, rng::derive(77, t)).unwrap().dense().norm_squared()).sum::<f64>() / trials as f64;
    assert!((mean - n as f64).abs() / n as f64 <= 0.02, "mean ‖X‖² {mean}");
}

#[test]
fn observation_examples() {
    let a = gen_dictionary(5, 5, DictKind::Orthonormal, 2).unwrap();
    let x = gen_coefficients(5, 9, 2, 4).unwrap();
    let inst = observe(&a, &x).unwrap();
    assert!((inst.obs.norm() - x.dense().norm()).abs() < 1e-12);

    let zero = SparseCoeffs::from_parts(x.support().clone(), &DMatrix::zeros(5, 9)).unwrap();
    assert_eq!(observe(&a, &zero).unwrap().obs, DMatrix::zeros(5, 9));

    let inst = gen_instance(7, 10, 3, 30, DictKind::GaussianUnit, 5).unwrap();
    let back = inst.dict.entries() * inst.coeffs.dense();
    assert!((&inst.obs - back).norm() / inst.obs.norm() < 1e-12);
}

#[test]
fn support_regularity_examples() {
    let full = SupportPattern::from_columns(3, 3, vec![vec![0, 1, 2]; 4]).unwrap();
    assert!(is_desirable_support(&full).in_o);
    let bad = SupportPattern::from_columns(2, 1, vec![vec![0], vec![0]]).unwrap();
    let r = is_desirable_support(&bad);
    assert_eq!(r.max_row, 2);
    assert!(!r.in_o);
}

#[test]
fn dlmat_roundtrip_and_rejects() {
    let m = gauss(3, 5, 12);
    let back = decode_dlmat(&encode_dlmat(&m)).unwrap();
    assert_eq!(back.as_slice(), m.as_slice());
    let mut bytes = encode_dlmat(&m);
    bytes.truncate(bytes.len() - 3);
    assert!(decode_dlmat(&bytes).is_err());
    assert!(decode_dlmat(b"NOTDLMAT").is_err());
}

#[test]
fn instance_directory_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_instance(6, 8, 2, 20, DictKind::GaussianUnit, 9).unwrap();
    write_instance(dir.path(), &inst, 9).unwrap();
    let (back, side) = read_instance(dir.path()).unwrap();
    assert_eq!((side.n, side.m, side.p, side.k, side.seed), (8, 6, 20, 2, 9));
    assert_eq!(back.obs.as_slice(), inst.obs.as_slice());
    assert_eq!(back.coeffs.dense().as_slice(), inst.coeffs.dense().as_slice());
}

#[test]
fn seed_derivation_is_pure() {
    assert_eq!(rng::derive(5, 3), rng::derive(5, 3));
    assert_ne!(rng::derive(5, 3), rng::derive(5, 4));
    assert_eq!(rng::derive_path(1, &[2, 3]), rng::derive(rng::derive(1, 2), 3));
    let v = rng::par_map(20, |i| i * i);
    assert_eq!(v, (0..20).map(|i| i * i).collect::<Vec<_>>());
}

#[test]
fn sym_eigen_handles_zero_rows_and_blocks() {
    use dictcert::linalg::sym_eigen;
    let z = DMatrix::<f64>::zeros(3, 3);
    let e = sym_eigen(&z);
    assert!(e.eigenvalues.iter().all(|v| *v == 0.0));
    let mut m = DMatrix::<f64>::zeros(5, 5);
    m[(1, 1)] = 1.0;
    m[(1, 3)] = 0.5;
    m[(3, 1)] = 0.5;
    m[(3, 3)] = 2.0;
    let e = sym_eigen(&m);
    let mut vals: Vec<f64> = e.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    let r = 0.5f64.sqrt();
    let want = [0.0, 0.0, 0.0, 1.5 - r, 1.5 + r];
    for (v, w) in vals.iter().zip(want) {
        assert!((v - w).abs() <= 1e-12, "{vals:?}");
    }
    let recon = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues) * e.eigenvectors.transpose();
    assert!((recon - &m).amax() <= 1e-12);
}

#[test]
fn jacobi_matches_library_eigen() {
    use dictcert::linalg::{jacobi_eigen, sym_eigen};
    let g = DMatrix::from_fn(7, 7, |i, j| ((3 * i + 5 * j) as f64).sin());
    let m = &g + g.transpose();
    let mut a: Vec<f64> = jacobi_eigen(&m).eigenvalues.iter().copied().collect();
    let mut b: Vec<f64> = sym_eigen(&m).eigenvalues.iter().copied().collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-11 * m.norm(), "{a:?} vs {b:?}");
    }
    let j = jacobi_eigen(&m);
    let recon = &j.eigenvectors * DMatrix::from_diagonal(&j.eigenvalues) * j.eigenvectors.transpose();
    assert!((recon - &m).amax() <= 1e-12 * m.norm());
}
