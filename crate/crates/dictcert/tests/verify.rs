use dictcert::certificate::{golfing_pass, CertParams};
use dictcert::model::{gen_coefficients, gen_dictionary, DictKind};
use dictcert::verify::*;
use nalgebra::DMatrix;

fn zero_diag(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64).sin());
    m.fill_diagonal(0.0);
    m
}

#[test]
fn frequency_interval_brackets() {
    let (lo, hi) = frequency_interval(0, 100);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0 && hi < 0.05);
    let (lo, hi) = frequency_interval(100, 100);
    assert_eq!(hi, 1.0);
    assert!(lo > 0.95);
    let (lo, hi) = frequency_interval(50, 100);
    assert!(lo < 0.5 && hi > 0.5);
}

#[test]
fn eig_event_examples() {
    let r = mc_eig_event(8, 2000, 2, 0.5, 1000, 1).unwrap();
    assert!(r.passed && r.estimate >= 0.99);
    let r = mc_eig_event(6, 40, 2, 0.5, 10_000, 2).unwrap();
    assert!(r.extras["mean_xx_max_entry_dev"] <= 0.05);
    let small = mc_eig_event(6, 200, 6, 0.5, 200, 3).unwrap();
    let large = mc_eig_event(6, 3000, 6, 0.5, 200, 3).unwrap();
    assert!(large.estimate >= small.estimate && large.estimate >= 0.99);
    assert!(mc_eig_event(6, 40, 2, 0.7, 10, 1).is_err());
}

#[test]
fn support_regularity_examples() {
    let r = mc_support_regularity(32, 4096, 4, 1000, 1).unwrap();
    assert!(r.passed && r.estimate >= r.bound);
    let full = mc_support_regularity(8, 64, 8, 100, 1).unwrap();
    assert_eq!(full.estimate, 1.0);
    let m = mc_support_regularity(16, 256, 2, 10_000, 4).unwrap();
    assert!((m.extras["mean_row_size_ratio"] - 1.0).abs() <= 0.02);
}

#[test]
fn row_event_examples() {
    let a = mc_row_events(16, 2048, 2, 1000, 1).unwrap();
    assert!(a.passed);
    assert!(a.estimate >= 1.0 - 256.0 * (-4.0f64 * 2048.0 / (4.0 * 256.0)).exp());
    assert_eq!(a.violations, 0);
    let b = mc_row_events(16, 2048, 2, 1000, 1).unwrap();
    assert_eq!(a.estimate, b.estimate);
}

#[test]
fn psi_bound_examples() {
    let a = gen_dictionary(16, 16, DictKind::Orthonormal, 1).unwrap();
    let r = mc_psi_bound(&a, 512, 2, 1000, 1).unwrap();
    assert!(r.passed);
    assert_eq!(r.violations, 0);
    assert!((r.bound - 4.0 * 2.0 / 16.0).abs() < 1e-12);
    let g = gen_dictionary(16, 16, DictKind::GaussianUnit, 2).unwrap();
    let r = mc_psi_bound(&g, 512, 2, 200, 2).unwrap();
    assert_eq!(r.violations, 0);
}

#[test]
fn decoupling_examples() {
    let z = mc_decoupling(&DMatrix::zeros(6, 6), 2, 100, 1).unwrap();
    assert_eq!(z.estimate, 0.0);
    assert!(z.passed);
    let full = mc_decoupling(&zero_diag(6), 6, 100, 1).unwrap();
    assert!((full.extras["ratio"] - 1.0).abs() < 1e-12);
    assert!(full.passed);
    let r = mc_decoupling(&zero_diag(16), 4, 10_000, 1).unwrap();
    assert!(r.passed);
    assert!(r.extras["ratio"] > 0.0);
    assert!(mc_decoupling(&DMatrix::identity(4, 4), 2, 10, 1).is_err());
}

#[test]
fn khintchine_examples() {
    let sigma = 0.7;
    let mut e = DMatrix::zeros(5, 5);
    e[(0, 0)] = 1.0;
    let r = mc_khintchine(&e, sigma, 100_000, 1).unwrap();
    assert!(r.passed);
    let half_normal = sigma * (2.0 / std::f64::consts::PI).sqrt();
    assert!((r.estimate - half_normal).abs() <= 4.0 * r.ci_halfwidth);
    let id = mc_khintchine(&DMatrix::identity(6, 6), sigma, 10_000, 2).unwrap();
    assert!(id.passed && id.estimate <= sigma * 6f64.sqrt());
    let m = DMatrix::from_fn(8, 8, |i, j| ((i * 5 + j * 11) as f64).cos());
    assert!(mc_khintchine(&m, sigma, 100_000, 3).unwrap().passed);
}

#[test]
fn chernoff_examples() {
    let r = mc_chernoff_demo(8, 200, 1.0, 1000, 1).unwrap();
    assert!(r.passed);
    for t in CHERNOFF_TS {
        assert!(r.extras[&format!("tail_t{t}")] <= r.extras[&format!("bound_t{t}")] + 0.01);
    }
    assert!(chernoff_tail_bound(8, 25.0, 1.0, 0.0) >= 1.0);
    assert!((r.extras["mean_sum_lambda_max"] - r.extras["mu_max"]).abs() <= 0.02 * r.extras["mu_max"]);
}

#[test]
fn q_scaling_examples() {
    let r = mc_q_scaling(16, 16, 2, &[250, 500, 1000, 2000], 50, 1, DictKind::Orthonormal).unwrap();
    assert!(r.passed, "slope {}", r.estimate);
    assert!(r.estimate >= -0.7 && r.estimate <= -0.3);
    assert!(r.extras["tau_ratio_spread"] <= 2.0);

    // One column: Q₁ is the only step, so ‖Q₁‖_F = √τ̂ with τ̂ its energy.
    let a = gen_dictionary(8, 8, DictKind::GaussianUnit, 3).unwrap();
    let x = gen_coefficients(8, 1, 2, 4).unwrap();
    let pass = golfing_pass(&a, &x, 0..1, 1.0, &CertParams::default()).unwrap();
    let tau = pass.steps[0].step_energy;
    assert!(pass.q_at_t_star.norm() <= tau.sqrt() * (1.0 + 1e-12));
}

#[test]
fn truncation_examples() {
    let r = mc_truncation_check(16, 1024, 2, 4.0, 1000, 1).unwrap();
    assert!(r.passed);
    assert_eq!(r.estimate, 0.0);
    let m = r.extras["fourth_moment"];
    let exact = r.extras["fourth_moment_exact"];
    assert!((m - exact).abs() <= 0.05 * exact);

    let one = mc_truncation_check(8, 64, 1, 4.0, 2000, 2).unwrap();
    let sigma2 = 8.0 / 64.0;
    assert!((one.extras["fourth_moment_exact"] - 3.0 * sigma2 * sigma2).abs() < 1e-15);
    assert!((one.extras["fourth_moment"] - 3.0 * sigma2 * sigma2).abs() <= 0.05 * 3.0 * sigma2 * sigma2);
}

#[test]
fn ls_slope_recovers_lines() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
    assert!((ls_slope(&pts) + 0.5).abs() < 1e-14);
}
