//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string; the `*_json` functions underneath are ordinary Rust so they can
//! be tested natively.

use dictcert::balancedness::{alpha_bound, BalanceOptions};
use dictcert::certificate::{build_certificate, verify_certificate, CertParams};
use dictcert::linalg::gram_submatrix_report;
use dictcert::model::{gen_coefficients, gen_dictionary, uniform_subset, DictKind};
use dictcert::{rng, Dictionary, SparseCoeffs};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest n·p the page will attempt; keeps the tab responsive.
pub const MAX_CELLS: usize = 40_000;

fn kind(orthonormal: bool) -> DictKind {
    if orthonormal {
        DictKind::Orthonormal
    } else {
        DictKind::GaussianUnit
    }
}

fn draw(n: usize, k: usize, p: usize, seed: u64, orthonormal: bool) -> Result<(Dictionary, SparseCoeffs), String> {
    if n * p > MAX_CELLS {
        return Err(format!("n·p = {} is above the demo limit {MAX_CELLS}", n * p));
    }
    let a = gen_dictionary(n, n, kind(orthonormal), rng::derive(seed, 0)).map_err(|e| e.to_string())?;
    let x = gen_coefficients(n, p, k, rng::derive(seed, 1)).map_err(|e| e.to_string())?;
    Ok((a, x))
}

#[derive(Serialize)]
struct CertificateView {
    mu: f64,
    k_mu: f64,
    q_norm: Vec<f64>,
    offsup: Vec<f64>,
    restarts: Vec<usize>,
    interp_dev: f64,
    offsup_inf: f64,
    phi_norm: f64,
    alpha: f64,
    all_ok: bool,
}

/// Golfing certificate on a fresh square instance: per-column ‖Q‖_F and
/// off-support sup norms, plus the three verification conditions.
pub fn certificate_json(n: usize, k: usize, p: usize, seed: u64, orthonormal: bool) -> Result<String, String> {
    let (a, x) = draw(n, k, p, seed, orthonormal)?;
    let st = build_certificate(&a, &x, &CertParams::default()).map_err(|e| e.to_string())?;
    let bal = alpha_bound(&a, &x, &BalanceOptions { with_terms: false, ..Default::default() }).map_err(|e| e.to_string())?;
    let r = verify_certificate(&a, &x, &st.lambda, bal.alpha).map_err(|e| e.to_string())?;
    let view = CertificateView {
        mu: a.mu(),
        k_mu: k as f64 * a.mu(),
        q_norm: st.per_step.iter().map(|s| s.q_norm).collect(),
        offsup: st.per_step.iter().map(|s| s.offsup_inf).collect(),
        restarts: st.restart_boundaries.clone(),
        interp_dev: r.interp_dev,
        offsup_inf: r.offsup_inf,
        phi_norm: r.phi_norm,
        alpha: r.alpha,
        all_ok: r.all_ok(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// ξ, α and ‖XX* − I‖ for a fresh instance.
pub fn balance_json(n: usize, k: usize, p: usize, seed: u64, orthonormal: bool) -> Result<String, String> {
    let (a, x) = draw(n, k, p, seed, orthonormal)?;
    let opts = BalanceOptions { with_terms: false, ..Default::default() };
    let r = alpha_bound(&a, &x, &opts).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct GramView {
    mu: f64,
    subsets: usize,
    smax_sq: Vec<f64>,
    smin: Vec<f64>,
    upper: f64,
    lower: f64,
    violations: usize,
}

/// Extreme eigenvalues of A_L*A_L over random k-subsets L against
/// 1 ± kμ(A).
pub fn gram_json(m: usize, n: usize, k: usize, subsets: usize, seed: u64) -> Result<String, String> {
    if m * n > MAX_CELLS || subsets > 2000 {
        return Err("problem too large for the demo".into());
    }
    let a = gen_dictionary(m, n, DictKind::GaussianUnit, rng::derive(seed, 0)).map_err(|e| e.to_string())?;
    if k == 0 || k > m.min(n) {
        return Err(format!("need 1 ≤ k ≤ min(m, n), got k = {k}"));
    }
    let mut r = rng::stream(rng::derive(seed, 1));
    let (mut smax_sq, mut smin) = (Vec::new(), Vec::new());
    let mut violations = 0;
    for _ in 0..subsets {
        let l = uniform_subset(&mut r, n, k);
        match gram_submatrix_report(&a, &l) {
            Ok(rep) => {
                violations += usize::from(!(rep.smax_bound_ok && rep.smin_bound_ok));
                smax_sq.push(rep.smax_sq);
                smin.push(rep.smin);
            }
            Err(_) => smin.push(0.0),
        }
    }
    let k_mu = k as f64 * a.mu();
    let view = GramView { mu: a.mu(), subsets, smax_sq, smin, upper: 1.0 + k_mu, lower: 1.0 - k_mu, violations };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn certificate(n: usize, k: usize, p: usize, seed: u32, orthonormal: bool) -> Result<String, JsError> {
    certificate_json(n, k, p, seed as u64, orthonormal).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn balance(n: usize, k: usize, p: usize, seed: u32, orthonormal: bool) -> Result<String, JsError> {
    balance_json(n, k, p, seed as u64, orthonormal).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gram(m: usize, n: usize, k: usize, subsets: usize, seed: u32) -> Result<String, JsError> {
    gram_json(m, n, k, subsets, seed as u64).map_err(|e| JsError::new(&e))
}
