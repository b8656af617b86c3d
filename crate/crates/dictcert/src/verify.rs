//! Monte Carlo checks of the probabilistic lemmas. Every check draws trial
//! `t` from `rng::derive(seed, t)` and reduces with sums and maxima in
//! trial order, so a report depends only on (seed, trials).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::balancedness::{psi_term, row_events};
use crate::certificate::{golfing_pass, CertParams};
use crate::error::{Error, Result};
use crate::linalg::{gram_submatrix_report, spectral_norm, sym_eigen, Dictionary};
use crate::model::{gen_coefficients, gen_dictionary, is_desirable_support, uniform_subset, DictKind};
use crate::rng;

const MODULE: &str = "verify";
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
/// Quantile used for point-equality checks of constants.
const Z_EQ: f64 = 3.290_526_731_491_926;

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub name: String,
    pub trials: usize,
    pub estimate: f64,
    pub bound: f64,
    pub passed: bool,
    pub seed: u64,
    pub ci_halfwidth: f64,
    /// Hard violations of deterministic claims.
    pub violations: u64,
    pub extras: BTreeMap<String, f64>,
}

/// Normal-approximation interval for a frequency, switching to Wilson
/// when fewer than five successes or failures were seen.
pub fn frequency_interval(hits: usize, trials: usize) -> (f64, f64) {
    let t = trials as f64;
    let f = hits as f64 / t;
    if hits >= 5 && trials - hits >= 5 {
        let h = Z95 * (f * (1.0 - f) / t).sqrt();
        return (f - h, f + h);
    }
    let z2 = Z95 * Z95;
    let centre = (f + z2 / (2.0 * t)) / (1.0 + z2 / t);
    let half = Z95 / (1.0 + z2 / t) * (f * (1.0 - f) / t + z2 / (4.0 * t * t)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Sample mean and 95% half-width.
fn mean_ci(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, Z95 * (var / t).sqrt())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::validation(MODULE, "trials must be positive"));
    }
    Ok(())
}

fn check_nk(n: usize, k: usize, p: usize) -> Result<()> {
    if n == 0 || k == 0 || k > n || p == 0 {
        return Err(Error::validation(MODULE, format!("need 1 ≤ k ≤ n and p ≥ 1 (n = {n}, k = {k}, p = {p})")));
    }
    Ok(())
}

/// Lower-bound claim on a frequency.
fn frequency_at_least(name: &str, hits: usize, trials: usize, bound: f64, seed: u64) -> McReport {
    let (lo, hi) = frequency_interval(hits, trials);
    let est = hits as f64 / trials as f64;
    McReport {
        name: name.into(),
        trials,
        estimate: est,
        bound,
        passed: hi >= bound,
        seed,
        ci_halfwidth: (hi - lo) / 2.0,
        violations: 0,
        extras: BTreeMap::new(),
    }
}

/// ℙ[‖XX* − I‖ ≥ t] from the truncated matrix Chernoff argument with β = 4.
pub fn eig_event_failure_bound(n: usize, p: usize, t: f64) -> f64 {
    let beta: f64 = 4.0;
    let (nf, pf) = (n as f64, p as f64);
    let lp = pf.ln().max(f64::MIN_POSITIVE);
    let upper = nf * (-t * t * pf / (4.0 * (1.0 + beta).powi(2) * nf * lp)).exp();
    let g = 3f64.sqrt() * nf * pf.powf(-beta * beta / 4.0);
    let lower = if g >= t {
        1.0
    } else {
        nf * (-(t - g).powi(2) / (2.0 * (1.0 + beta).powi(2)) * pf / (nf * lp)).exp()
    };
    upper + lower + pf.powf(1.0 - beta * beta / 2.0)
}

pub fn mc_eig_event(n: usize, p: usize, k: usize, t: f64, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    check_nk(n, k, p)?;
    if !(t > 0.0 && t <= 0.5) {
        return Err(Error::validation(MODULE, format!("t = {t} must lie in (0, 1/2]")));
    }
    let draws = rng::par_map(trials, |tr| -> Result<(f64, DMatrix<f64>)> {
        let x = gen_coefficients(n, p, k, rng::derive(seed, tr as u64))?;
        let g = x.dense() * x.dense().transpose();
        let dev = spectral_norm(&(&g - DMatrix::identity(n, n)));
        Ok((dev, g))
    });
    let mut hits = 0;
    let mut devs = Vec::with_capacity(trials);
    let mut sum = DMatrix::zeros(n, n);
    for d in draws {
        let (dev, g) = d?;
        if dev < t {
            hits += 1;
        }
        devs.push(dev);
        sum += g;
    }
    let bound = (1.0 - eig_event_failure_bound(n, p, t)).max(0.0);
    let mut rep = frequency_at_least("eig", hits, trials, bound, seed);
    let mean_g = sum / trials as f64;
    rep.extras.insert("mean_deviation".into(), mean_ci(&devs).0);
    rep.extras.insert("mean_xx_max_entry_dev".into(), (mean_g - DMatrix::identity(n, n)).amax());
    Ok(rep)
}

pub fn mc_support_regularity(n: usize, p: usize, k: usize, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    check_nk(n, k, p)?;
    let draws = rng::par_map(trials, |tr| -> Result<(bool, f64)> {
        let x = gen_coefficients(n, p, k, rng::derive(seed, tr as u64))?;
        let s = x.support();
        let mean_row = s.rows().iter().map(Vec::len).sum::<usize>() as f64 / n as f64;
        Ok((is_desirable_support(s).in_o, mean_row))
    });
    let mut hits = 0;
    let mut rows = Vec::with_capacity(trials);
    for d in draws {
        let (ok, r) = d?;
        hits += ok as usize;
        rows.push(r);
    }
    let (nf, pf, kf) = (n as f64, p as f64, k as f64);
    let bound = (1.0 - nf * nf * (-pf * kf * kf / (10.0 * nf * nf)).exp()).max(0.0);
    let mut rep = frequency_at_least("supports", hits, trials, bound, seed);
    rep.extras.insert("mean_row_size_ratio".into(), mean_ci(&rows).0 / (pf * kf / nf));
    Ok(rep)
}

pub fn mc_row_events(n: usize, p: usize, k: usize, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    check_nk(n, k, p)?;
    let sigma2 = n as f64 / (k as f64 * p as f64);
    // (in 𝒪, all ℰᵢ hold, rows with E‖xⁱ‖² above 3/2 while in 𝒪)
    let draws = rng::par_map(trials, |tr| -> Result<(bool, bool, u64)> {
        let x = gen_coefficients(n, p, k, rng::derive(seed, tr as u64))?;
        let in_o = is_desirable_support(x.support()).in_o;
        if !in_o {
            return Ok((false, false, 0));
        }
        let holds = row_events(&x).iter().all(|e| e.holds);
        let bad = x.support().rows().iter().filter(|r| r.len() as f64 * sigma2 > 1.5 + 1e-12).count() as u64;
        Ok((true, holds, bad))
    });
    let (mut cond, mut hits, mut viol) = (0, 0, 0);
    for d in draws {
        let (c, h, v) = d?;
        cond += c as usize;
        hits += h as usize;
        viol += v;
    }
    let (nf, pf, kf) = (n as f64, p as f64, k as f64);
    let bound = (1.0 - nf * nf * (-kf * kf * pf / (4.0 * nf * nf)).exp()).max(0.0);
    let mut rep = if cond == 0 {
        McReport {
            name: "rows".into(),
            trials,
            estimate: f64::NAN,
            bound,
            passed: false,
            seed,
            ci_halfwidth: f64::NAN,
            violations: 0,
            extras: BTreeMap::new(),
        }
    } else {
        frequency_at_least("rows", hits, cond, bound, seed)
    };
    rep.trials = trials;
    rep.violations = viol;
    rep.passed &= viol == 0;
    rep.extras.insert("conditioned_draws".into(), cond as f64);
    Ok(rep)
}

/// Largest ‖Ψᵢ‖ over rows where ℰᵢ holds, against 4k/n + 24kμ(A). Also
/// counts violations of the Gram-submatrix bounds on every column support.
pub fn mc_psi_bound(a: &Dictionary, p: usize, k: usize, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    let n = a.n();
    check_nk(n, k, p)?;
    let bound = 4.0 * k as f64 / n as f64 + 24.0 * k as f64 * a.mu();
    let draws = rng::par_map(trials, |tr| -> Result<(f64, u64, u64, u64)> {
        let x = gen_coefficients(n, p, k, rng::derive(seed, tr as u64))?;
        let events = row_events(&x);
        let (mut worst, mut viol, mut on) = (0.0f64, 0u64, 0u64);
        for (i, e) in events.iter().enumerate() {
            if !e.holds {
                continue;
            }
            on += 1;
            let t = psi_term(a, &x, i)?;
            worst = worst.max(t.norm);
            if t.norm > bound * (1.0 + 1e-9) {
                viol += 1;
            }
        }
        let mut gram_viol = 0;
        for c in x.support().cols() {
            match gram_submatrix_report(a, c) {
                Ok(r) if r.all_ok() => {}
                Ok(_) => gram_viol += 1,
                Err(e) if e.is_numerical() && k as f64 * a.mu() >= 1.0 => {}
                Err(e) => return Err(e),
            }
        }
        Ok((worst, viol, gram_viol, on))
    });
    let (mut worst, mut viol, mut gviol, mut on) = (0.0f64, 0, 0, 0);
    for d in draws {
        let (w, v, g, o) = d?;
        worst = worst.max(w);
        viol += v;
        gviol += g;
        on += o;
    }
    let mut extras = BTreeMap::new();
    extras.insert("rows_on_event".into(), on as f64);
    extras.insert("gram_violations".into(), gviol as f64);
    extras.insert("mu".into(), a.mu());
    Ok(McReport {
        name: "psi".into(),
        trials,
        estimate: worst,
        bound,
        passed: viol == 0 && gviol == 0,
        seed,
        ci_halfwidth: 0.0,
        violations: viol + gviol,
        extras,
    })
}

/// E‖𝒫_Ω M 𝒫_Ω‖_F ≤ 16√(k/n)·E‖M𝒫_Ω‖_F for uniform k-subsets Ω.
pub fn mc_decoupling(mat: &DMatrix<f64>, k: usize, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    let n = mat.nrows();
    if mat.ncols() != n {
        return Err(Error::validation(MODULE, "decoupling matrix must be square"));
    }
    check_nk(n, k, 1)?;
    if (0..n).any(|i| mat[(i, i)] != 0.0) {
        return Err(Error::validation(MODULE, "decoupling matrix must have zero diagonal"));
    }
    let draws = rng::par_map(trials, |tr| {
        let mut r = rng::stream(rng::derive(seed, tr as u64));
        let omega = uniform_subset(&mut r, n, k);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for &j in &omega {
            let col = mat.column(j);
            rhs += col.norm_squared();
            lhs += omega.iter().map(|&i| col[i] * col[i]).sum::<f64>();
        }
        (lhs.sqrt(), rhs.sqrt())
    });
    let lhs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let rhs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let (l, lci) = mean_ci(&lhs);
    let (r, rci) = mean_ci(&rhs);
    let c = 16.0 * (k as f64 / n as f64).sqrt();
    let mut extras = BTreeMap::new();
    extras.insert("rhs_mean".into(), r);
    extras.insert("ratio".into(), if r > 0.0 { l / r } else { 0.0 });
    Ok(McReport {
        name: "decouple".into(),
        trials,
        estimate: l,
        bound: c * r,
        passed: l - lci <= c * (r + rci) + 1e-12,
        seed,
        ci_halfwidth: lci,
        violations: 0,
        extras,
    })
}

/// σ‖M‖_F/√π ≤ E‖Mv‖ ≤ σ‖M‖_F for v ~ N(0, σ²I), and E[sgn(v)v] = √(2/π)σ.
pub fn mc_khintchine(mat: &DMatrix<f64>, sigma: f64, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::validation(MODULE, "sigma must be positive"));
    }
    let n = mat.ncols();
    let draws = rng::par_map(trials, |tr| {
        let mut r = rng::stream(rng::derive(seed, tr as u64));
        let v = DVector::from_fn(n, |_, _| sigma * r.sample::<f64, _>(StandardNormal));
        let c1 = v.iter().map(|x| x.abs()).sum::<f64>() / (n as f64 * sigma);
        ((mat * v).norm(), c1)
    });
    let norms: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let c1s: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let (mean, ci) = mean_ci(&norms);
    let (c1, c1_ci) = mean_ci(&c1s);
    let c1_half = c1_ci / Z95 * Z_EQ;
    let fro = mat.norm();
    let lower = sigma * fro / std::f64::consts::PI.sqrt();
    let upper = sigma * fro;
    let c1_true = (2.0 / std::f64::consts::PI).sqrt();
    let c1_ok = (c1 - c1_true).abs() <= c1_half.max(1e-12);
    let mut extras = BTreeMap::new();
    extras.insert("lower".into(), lower);
    extras.insert("c1_estimate".into(), c1);
    extras.insert("c1_halfwidth".into(), c1_half);
    Ok(McReport {
        name: "khintchine".into(),
        trials,
        estimate: mean,
        bound: upper,
        passed: mean + ci >= lower - 1e-12 && mean - ci <= upper + 1e-12 && c1_ok,
        seed,
        ci_halfwidth: ci,
        violations: 0,
        extras,
    })
}

pub const CHERNOFF_TS: [f64; 3] = [0.25, 0.5, 1.0];

/// n·exp(−t²μ_max/4B), the upper-tail bound for λ_max ≥ (1+t)μ_max.
pub fn chernoff_tail_bound(n: usize, mu_max: f64, b: f64, t: f64) -> f64 {
    n as f64 * (-t * t * mu_max / (4.0 * b)).exp()
}

/// Sums of `summands` i.i.d. B·uu* with u uniform on the sphere, so that
/// μ_max = summands·B/n; tail frequencies of λ_max ≥ (1+t)μ_max against
/// n·exp(−t²μ_max/4B).
pub fn mc_chernoff_demo(n: usize, summands: usize, b: f64, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    if n == 0 || summands == 0 || !(b > 0.0 && b.is_finite()) {
        return Err(Error::validation(MODULE, "need n ≥ 1, summands ≥ 1 and B > 0"));
    }
    let mu = summands as f64 * b / n as f64;
    let draws = rng::par_map(trials, |tr| {
        let mut r = rng::stream(rng::derive(seed, tr as u64));
        let mut u = DMatrix::from_fn(n, summands, |_, _| r.sample::<f64, _>(StandardNormal));
        for mut c in u.column_iter_mut() {
            let nrm = c.norm();
            c /= nrm;
        }
        let s = (&u * u.transpose()) * b;
        let lmax = sym_eigen(&s).eigenvalues.max();
        (lmax, s)
    });
    let mut sum = DMatrix::zeros(n, n);
    let mut tails = [0usize; 3];
    for (lmax, s) in &draws {
        sum += s;
        for (c, t) in tails.iter_mut().zip(CHERNOFF_TS) {
            if *lmax >= (1.0 + t) * mu {
                *c += 1;
            }
        }
    }
    let mean_lmax = sym_eigen(&(sum / trials as f64)).eigenvalues.max();
    let mut extras = BTreeMap::new();
    let mut passed = true;
    let mut tight: Option<(f64, f64, f64)> = None;
    for (c, t) in tails.iter().zip(CHERNOFF_TS) {
        let bound = chernoff_tail_bound(n, mu, b, t);
        let (lo, hi) = frequency_interval(*c, trials);
        let f = *c as f64 / trials as f64;
        passed &= lo <= bound;
        extras.insert(format!("tail_t{t}"), f);
        extras.insert(format!("bound_t{t}"), bound);
        if tight.is_none_or(|(_, bb, _)| bound < bb) {
            tight = Some((f, bound, (hi - lo) / 2.0));
        }
    }
    // ‖mean − E‖ ≤ ‖mean − E‖_F, whose RMS is the per-draw RMS over √trials
    let spread = draws
        .iter()
        .map(|(_, s)| (s - DMatrix::identity(n, n) * mu).norm_squared())
        .sum::<f64>()
        / trials as f64;
    let sampling = Z_EQ * (spread / trials as f64).sqrt();
    let mean_rel = (mean_lmax - mu).abs() / mu;
    passed &= mean_rel <= 0.02 + sampling / mu;
    extras.insert("mean_rel_tolerance".into(), 0.02 + sampling / mu);
    extras.insert("mu_max".into(), mu);
    extras.insert("mean_sum_lambda_max".into(), mean_lmax);
    let (f, bound, ci) = tight.expect("three thresholds");
    Ok(McReport { name: "chernoff".into(), trials, estimate: f, bound, passed, seed, ci_halfwidth: ci, violations: 0, extras })
}

/// Mean ‖Q_{t⋆}‖_F of a single golfing pass for each p; the fitted log-log
/// slope is the estimate and −1/2 the reference.
pub fn mc_q_scaling(
    m: usize,
    n: usize,
    k: usize,
    p_grid: &[usize],
    trials: usize,
    seed: u64,
    kind: DictKind,
) -> Result<McReport> {
    check_trials(trials)?;
    if p_grid.len() < 2 {
        return Err(Error::validation(MODULE, "p_grid needs at least two values"));
    }
    let params = CertParams::default();
    let mut logs = Vec::new();
    let mut extras = BTreeMap::new();
    let mut tau_ratio = Vec::new();
    for (gi, &p) in p_grid.iter().enumerate() {
        check_nk(n, k, p)?;
        let draws = rng::par_map(trials, |tr| -> Result<(f64, f64)> {
            let s = rng::derive_path(seed, &[gi as u64, tr as u64]);
            let a = gen_dictionary(m, n, kind, rng::derive(s, 0))?;
            let x = gen_coefficients(n, p, k, rng::derive(s, 1))?;
            let pass = golfing_pass(&a, &x, 0..p, 1.0, &params)?;
            let tau = pass.steps.iter().map(|st| st.step_energy).sum::<f64>() / p as f64;
            Ok((pass.q_at_t_star.norm(), tau))
        });
        let mut q = Vec::with_capacity(trials);
        let mut tau = Vec::with_capacity(trials);
        for d in draws {
            let (qn, t) = d?;
            q.push(qn);
            tau.push(t);
        }
        let qm = mean_ci(&q).0;
        let tm = mean_ci(&tau).0;
        extras.insert(format!("mean_q_p{p}"), qm);
        extras.insert(format!("tau_p{p}"), tm);
        let r = tm * p as f64 / (k * n) as f64;
        extras.insert(format!("tau_ratio_p{p}"), r);
        tau_ratio.push(r);
        logs.push(((p as f64).ln(), qm.ln()));
    }
    let slope = ls_slope(&logs);
    let spread = tau_ratio.iter().cloned().fold(0.0, f64::max) / tau_ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    extras.insert("tau_ratio_spread".into(), spread);
    Ok(McReport {
        name: "qscale".into(),
        trials,
        estimate: slope,
        bound: -0.5,
        passed: (slope + 0.5).abs() <= 0.2 && spread <= 2.0,
        seed,
        ci_halfwidth: 0.0,
        violations: 0,
        extras,
    })
}

/// Least-squares slope of y on x.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Frequency of maxⱼ‖xⱼ‖ > (1+β)√(n log p/p) against p^{1−β²/2}, and the
/// fourth moment E‖x₁‖⁴ = (k²+2k)σ⁴ ≤ 3k²σ⁴, estimated over all columns.
pub fn mc_truncation_check(n: usize, p: usize, k: usize, beta: f64, trials: usize, seed: u64) -> Result<McReport> {
    check_trials(trials)?;
    check_nk(n, k, p)?;
    if !(beta > 0.0) {
        return Err(Error::validation(MODULE, "beta must be positive"));
    }
    let (nf, pf, kf) = (n as f64, p as f64, k as f64);
    let thresh = (1.0 + beta) * (nf * pf.ln() / pf).sqrt();
    let draws = rng::par_map(trials, |tr| -> Result<(bool, f64, f64)> {
        let x = gen_coefficients(n, p, k, rng::derive(seed, tr as u64))?;
        let mut exceed = false;
        let (mut s4, mut s8) = (0.0, 0.0);
        for c in x.dense().column_iter() {
            let n2 = c.norm_squared();
            exceed |= n2.sqrt() > thresh;
            s4 += n2 * n2;
            s8 += n2.powi(4);
        }
        Ok((exceed, s4, s8))
    });
    let (mut hits, mut s4, mut s8) = (0usize, 0.0, 0.0);
    for d in draws {
        let (e, a, b) = d?;
        hits += e as usize;
        s4 += a;
        s8 += b;
    }
    let count = (trials * p) as f64;
    let m4 = s4 / count;
    let m4_ci = Z95 * ((s8 / count - m4 * m4).max(0.0) / count).sqrt();
    let sigma = (nf / (kf * pf)).sqrt();
    let exact = (kf * kf + 2.0 * kf) * sigma.powi(4);
    let bound = pf.powf(1.0 - beta * beta / 2.0);
    let (lo, hi) = frequency_interval(hits, trials);
    let moment_ok = (m4 - exact).abs() <= 0.05 * exact && m4 <= 3.0 * kf * kf * sigma.powi(4) + m4_ci;
    let mut extras = BTreeMap::new();
    extras.insert("fourth_moment".into(), m4);
    extras.insert("fourth_moment_exact".into(), exact);
    extras.insert("fourth_moment_ci".into(), m4_ci);
    Ok(McReport {
        name: "trunc".into(),
        trials,
        estimate: hits as f64 / trials as f64,
        bound,
        passed: lo <= bound && moment_ok,
        seed,
        ci_halfwidth: (hi - lo) / 2.0,
        violations: 0,
        extras,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    Eig,
    Supports,
    Rows,
    Psi,
    Decouple,
    Khintchine,
    Chernoff,
    Qscale,
    Trunc,
}

impl Lemma {
    pub const ALL: [Lemma; 9] = [
        Lemma::Eig,
        Lemma::Supports,
        Lemma::Rows,
        Lemma::Psi,
        Lemma::Decouple,
        Lemma::Khintchine,
        Lemma::Chernoff,
        Lemma::Qscale,
        Lemma::Trunc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Eig => "eig",
            Lemma::Supports => "supports",
            Lemma::Rows => "rows",
            Lemma::Psi => "psi",
            Lemma::Decouple => "decouple",
            Lemma::Khintchine => "khintchine",
            Lemma::Chernoff => "chernoff",
            Lemma::Qscale => "qscale",
            Lemma::Trunc => "trunc",
        }
    }
}

impl std::str::FromStr for Lemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::validation(MODULE, format!("unknown lemma '{s}'")))
    }
}

/// Fixed test matrices for the matrix-valued checks.
fn suite_matrix(rows: usize, cols: usize, seed: u64, zero_diag: bool) -> DMatrix<f64> {
    let mut r = rng::stream(seed);
    let mut m = DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal));
    if zero_diag {
        m.fill_diagonal(0.0);
    }
    m
}

/// One check of `lemma` at its reference parameter point. Some lemmas
/// produce two reports (Ψ on an orthonormal and a Gaussian dictionary).
pub fn run_lemma(lemma: Lemma, trials: usize, seed: u64) -> Result<Vec<McReport>> {
    let s = rng::derive(seed, lemma as u64);
    let mut out = match lemma {
        Lemma::Eig => vec![mc_eig_event(8, 2000, 2, 0.5, trials, s)?],
        Lemma::Supports => vec![mc_support_regularity(32, 4096, 4, trials, s)?],
        Lemma::Rows => vec![mc_row_events(16, 2048, 2, trials, s)?],
        Lemma::Psi => {
            let orth = gen_dictionary(16, 16, DictKind::Orthonormal, rng::derive(s, 0))?;
            let gauss = gen_dictionary(16, 16, DictKind::GaussianUnit, rng::derive(s, 1))?;
            let mut a = mc_psi_bound(&orth, 512, 2, trials, rng::derive(s, 2))?;
            let mut b = mc_psi_bound(&gauss, 512, 2, trials, rng::derive(s, 3))?;
            a.name += "_orthonormal";
            b.name += "_gaussian";
            vec![a, b]
        }
        Lemma::Decouple => vec![mc_decoupling(&suite_matrix(16, 16, rng::derive(s, 0), true), 4, trials, s)?],
        Lemma::Khintchine => vec![mc_khintchine(&suite_matrix(8, 8, rng::derive(s, 0), false), 0.7, trials, s)?],
        Lemma::Chernoff => vec![mc_chernoff_demo(8, 200, 1.0, trials, s)?],
        Lemma::Qscale => vec![mc_q_scaling(16, 16, 2, &[250, 500, 1000, 2000], trials, s, DictKind::Orthonormal)?],
        Lemma::Trunc => vec![mc_truncation_check(16, 1024, 2, 4.0, trials, s)?],
    };
    for r in &mut out {
        r.seed = seed;
    }
    Ok(out)
}

pub fn run_suite(lemmas: &[Lemma], trials: usize, seed: u64) -> Result<Vec<McReport>> {
    let mut out = Vec::new();
    for &l in lemmas {
        out.extend(run_lemma(l, trials, seed)?);
    }
    Ok(out)
}
