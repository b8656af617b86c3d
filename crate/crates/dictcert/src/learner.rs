//! A local solver for min ‖X‖₁ subject to Y = AX, ‖Aᵢ‖ = 1: sparse coding
//! for the current A, then a dictionary step along the solution of the
//! linearized problem with backtracking. Plus sign-permutation alignment
//! and the recovery phase grid.

use nalgebra::{DMatrix, DVector};
use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, Dictionary};
use crate::lp;
use crate::model::{gen_instance, DictKind};
use crate::rng;
use crate::tangent::{self, Backend, PdParams, SolverParams};

const MODULE: &str = "learner";

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPolicy {
    pub initial: f64,
    pub shrink: f64,
    pub min_step: f64,
    /// Fraction of the predicted decrease that a step must achieve.
    pub armijo: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { initial: 1.0, shrink: 0.5, min_step: 1e-6, armijo: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveParams {
    pub init_radius: f64,
    pub max_outer: usize,
    /// Duality-gap tolerance of each linearized solve.
    pub inner_tol: f64,
    /// Iteration cap of each linearized solve.
    pub inner_max_iter: usize,
    pub step_policy: StepPolicy,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            init_radius: 0.05,
            max_outer: 60,
            inner_tol: 1e-9,
            inner_max_iter: 4000,
            step_policy: StepPolicy::default(),
        }
    }
}

impl SolveParams {
    fn validate(&self) -> Result<()> {
        let s = &self.step_policy;
        if !(self.init_radius >= 0.0) || self.max_outer == 0 {
            return Err(Error::validation(MODULE, "need init_radius ≥ 0 and max_outer ≥ 1"));
        }
        if !(s.initial > 0.0 && s.shrink > 0.0 && s.shrink < 1.0 && s.min_step > 0.0 && s.armijo >= 0.0) {
            return Err(Error::validation(MODULE, "invalid step policy"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnStatus {
    /// The linearized problem offers no descent, or no step was accepted.
    Stationary,
    MaxOuter,
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub a_hat: Dictionary,
    pub x_hat: DMatrix<f64>,
    /// ‖X‖₁ after each accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
    pub status: LearnStatus,
}

/// Entries below this fraction of their column's largest magnitude are
/// rounding noise from the solve and are set to zero.
const CODE_ZERO_RTOL: f64 = 1e-12;

/// Per-column min ‖x‖₁ subject to Ax = y. A square A is inverted directly;
/// otherwise each column is a basis-pursuit LP.
pub fn sparse_code(a: &Dictionary, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.m(), a.n());
    if y.nrows() != m {
        return Err(Error::validation(MODULE, "Y and A have different row counts"));
    }
    let mut x = if m == n {
        let lu = a.entries().clone().lu();
        lu.solve(y).ok_or_else(|| Error::singular(MODULE, "square dictionary"))?
    } else {
        let mut x = DMatrix::zeros(n, y.ncols());
        for j in 0..y.ncols() {
            let col = lp::basis_pursuit(a.entries(), &y.column(j).clone_owned()).map_err(|e| match e {
                Error::Infeasible { .. } => Error::Infeasible { module: MODULE, what: format!("column {j} of Y is not in the range of A") },
                other => other,
            })?;
            x.set_column(j, &col);
        }
        x
    };
    for mut c in x.column_iter_mut() {
        let cut = CODE_ZERO_RTOL * c.amax();
        c.apply(|v| {
            if v.abs() <= cut {
                *v = 0.0
            }
        });
    }
    let res = (a.entries() * &x - y).norm();
    if res > 1e-9 * y.norm().max(1e-300) && y.norm() > 0.0 {
        return Err(Error::Infeasible { module: MODULE, what: format!("Y not in the range of A (residual {res:.3e})") });
    }
    Ok(x)
}

/// Outer iterations without a relative decrease above STALL_RTOL count as a stall.
const STALL_WINDOW: usize = 10;
const STALL_RTOL: f64 = 1e-9;

pub fn local_solve(y: &DMatrix<f64>, a0: &Dictionary, params: &SolveParams) -> Result<LearnOutcome> {
    params.validate()?;
    let mut a = a0.clone();
    let mut x = sparse_code(&a, y)?;
    let mut f = l1_norm(&x);
    let mut trace = vec![f];
    if f == 0.0 {
        return Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::Stationary });
    }
    let solver = SolverParams {
        backend: Backend::Pd,
        pd: PdParams { tol: params.inner_tol, max_iter: params.inner_max_iter },
    };
    let sp = &params.step_policy;
    for _ in 0..params.max_outer {
        let sol = match tangent::solve_linearized(&a, &x, &solver) {
            Ok(s) => s,
            Err(e) if e.is_numerical() => {
                return Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::Stationary })
            }
            Err(e) => return Err(e),
        };
        let predicted = f - sol.objective;
        if predicted <= 1e-12 * f {
            return Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::Stationary });
        }
        let mut s = sp.initial;
        let mut accepted = None;
        while s >= sp.min_step {
            let cand = Dictionary::normalized(a.entries() + &sol.pert.delta_a * s);
            if let Ok(ac) = cand {
                if let Ok(xc) = sparse_code(&ac, y) {
                    let fc = l1_norm(&xc);
                    if fc <= f - sp.armijo * s * predicted {
                        accepted = Some((ac, xc, fc));
                        break;
                    }
                }
            }
            s *= sp.shrink;
        }
        match accepted {
            Some((ac, xc, fc)) => {
                a = ac;
                x = xc;
                f = fc;
                trace.push(f);
                if trace.len() > STALL_WINDOW && trace[trace.len() - 1 - STALL_WINDOW] - f <= STALL_RTOL * f {
                    return Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::Stationary });
                }
            }
            None => return Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::Stationary }),
        }
    }
    Ok(LearnOutcome { a_hat: a, x_hat: x, trace, status: LearnStatus::MaxOuter })
}

#[derive(Clone, Debug, Serialize)]
pub struct Alignment {
    /// Column i of the aligned estimate is signs[i]·Â[:, perm[i]].
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    /// ‖ÂΠΣ − A‖_F/‖A‖_F.
    pub rel_error: f64,
    /// ‖Â − A‖_F/‖A‖_F.
    pub raw_error: f64,
}

/// Signed permutation maximizing Σᵢ |⟨Â_{π(i)}, Aᵢ⟩|, by optimal assignment.
pub fn align_sign_permutation(a_hat: &Dictionary, a_true: &Dictionary) -> Result<Alignment> {
    if a_hat.entries().shape() != a_true.entries().shape() {
        return Err(Error::validation(MODULE, "dictionaries differ in shape"));
    }
    let n = a_true.n();
    let g = a_true.entries().tr_mul(a_hat.entries());
    // Integer weights for the assignment solver; 2⁻⁵⁰ resolution.
    let scale = (1u64 << 50) as f64;
    let w = Matrix::from_fn(n, n, |(i, j)| (g[(i, j)].abs() * scale).round() as i64);
    let (_, perm) = kuhn_munkres(&w);
    let signs: Vec<f64> = (0..n).map(|i| if g[(i, perm[i])] < 0.0 { -1.0 } else { 1.0 }).collect();
    Ok(alignment_for(a_hat, a_true, perm, signs))
}

/// Errors for a given signed permutation.
pub fn alignment_for(a_hat: &Dictionary, a_true: &Dictionary, perm: Vec<usize>, signs: Vec<f64>) -> Alignment {
    let at = a_true.entries();
    let ah = a_hat.entries();
    let denom = at.norm();
    let mut err2 = 0.0;
    for i in 0..at.ncols() {
        err2 += (ah.column(perm[i]) * signs[i] - at.column(i)).norm_squared();
    }
    Alignment { perm, signs, rel_error: err2.sqrt() / denom, raw_error: (ah - at).norm() / denom }
}

/// Columns moved by η times their norm in a uniformly random direction,
/// then renormalized.
pub fn perturb_dictionary(a: &Dictionary, radius: f64, seed: u64) -> Result<Dictionary> {
    let mut r = rng::stream(seed);
    let mut out = a.entries().clone();
    for mut c in out.column_iter_mut() {
        let g = DVector::from_fn(c.len(), |_, _| r.sample::<f64, _>(StandardNormal));
        let gn = g.norm();
        if gn > 0.0 {
            c.axpy(radius / gn, &g, 1.0);
        }
    }
    Dictionary::normalized(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub n_list: Vec<usize>,
    pub ratio_list: Vec<f64>,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Replaces p = round(5n·ln n) when set.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default = "default_kind")]
    pub kind: DictKind,
    #[serde(default)]
    pub solve: SolveParams,
}

fn default_kind() -> DictKind {
    DictKind::GaussianUnit
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseCell {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub trials: usize,
    pub success_frac: f64,
    pub mean_aligned_err: f64,
    pub mean_raw_err: f64,
    /// Trials that ended in an error rather than an estimate.
    pub failed: usize,
}

/// The success threshold on the aligned relative error.
pub const SUCCESS_TOL: f64 = 1e-5;

pub fn default_p(n: usize) -> usize {
    (5.0 * n as f64 * (n as f64).ln()).round().max(1.0) as usize
}

struct TrialResult {
    aligned: f64,
    raw: f64,
}

fn run_trial(m: usize, n: usize, k: usize, p: usize, cfg: &PhaseConfig, seed: u64) -> Result<TrialResult> {
    let inst = gen_instance(m, n, k, p, cfg.kind, rng::derive(seed, 0))?;
    let a0 = perturb_dictionary(&inst.dict, cfg.solve.init_radius, rng::derive(seed, 1))?;
    let out = local_solve(&inst.obs, &a0, &cfg.solve)?;
    let al = align_sign_permutation(&out.a_hat, &inst.dict)?;
    Ok(TrialResult { aligned: al.rel_error, raw: al.raw_error })
}

/// Cells in (n, ratio, k) order; cells with k > n are left out.
pub fn phase_transition_grid(cfg: &PhaseConfig) -> Result<Vec<PhaseCell>> {
    if cfg.trials == 0 || cfg.n_list.is_empty() || cfg.ratio_list.is_empty() || cfg.k_list.is_empty() {
        return Err(Error::validation(MODULE, "phase grid needs nonempty lists and trials ≥ 1"));
    }
    if cfg.k_list.contains(&0) || cfg.n_list.contains(&0) {
        return Err(Error::validation(MODULE, "n and k must be positive"));
    }
    cfg.solve.validate()?;
    let mut specs = Vec::new();
    for &n in &cfg.n_list {
        for &ratio in &cfg.ratio_list {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(Error::validation(MODULE, format!("ratio {ratio} must lie in (0, 1]")));
            }
            let m = ((ratio * n as f64).round() as usize).max(1);
            for &k in &cfg.k_list {
                if k <= n {
                    specs.push((n, m, k, cfg.p.unwrap_or_else(|| default_p(n))));
                }
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let results = rng::par_map(jobs.len(), |idx| {
        let (c, t) = jobs[idx];
        let (n, m, k, p) = specs[c];
        let s = rng::derive_path(cfg.seed, &[n as u64, m as u64, k as u64, t as u64]);
        run_trial(m, n, k, p, cfg, s)
    });
    let mut cells = Vec::with_capacity(specs.len());
    for (c, &(n, m, k, p)) in specs.iter().enumerate() {
        let rs = &results[c * cfg.trials..(c + 1) * cfg.trials];
        let ok: Vec<&TrialResult> = rs.iter().filter_map(|r| r.as_ref().ok()).collect();
        let successes = ok.iter().filter(|r| r.aligned < SUCCESS_TOL).count();
        let mean = |f: fn(&TrialResult) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        cells.push(PhaseCell {
            n,
            m,
            k,
            p,
            trials: cfg.trials,
            success_frac: successes as f64 / cfg.trials as f64,
            mean_aligned_err: mean(|r| r.aligned),
            mean_raw_err: mean(|r| r.raw),
            failed: rs.len() - ok.len(),
        });
    }
    Ok(cells)
}

/// Weighted least-squares nonincreasing fit (pool adjacent violators).
pub fn antitonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // (mean, weight, count) blocks.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, c)| std::iter::repeat_n(v, c)).collect()
}
