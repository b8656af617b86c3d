//! Golfing construction of an approximate dual certificate Λ, with the
//! restart scheme over shrinking suffixes, and the three-condition check
//! that turns Λ and a balancedness constant into a proof of local optimality.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{phi_in_place, sym_inverse, Dictionary};
use crate::model::SparseCoeffs;

const MODULE: &str = "certificate";

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertParams {
    /// Length of the deflation direction ζ.
    pub zeta_scale: f64,
    /// ‖ΘQx‖ ≤ zero_tol·‖Q‖_F·‖x‖ is treated as zero.
    pub zero_tol: f64,
}

impl Default for CertParams {
    fn default() -> Self {
        CertParams { zeta_scale: 0.25, zero_tol: 1e-12 }
    }
}

/// A_Ω together with (A_Ω*A_Ω)⁻¹ for one column support.
struct ColumnFactor {
    a_omega: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl ColumnFactor {
    fn new(a: &Dictionary, omega: &[usize], col: Option<usize>) -> Result<Self> {
        let a_omega = a.select_columns(omega);
        let gram_inv = sym_inverse(&a_omega.tr_mul(&a_omega)).ok_or_else(|| {
            let what = match col {
                Some(j) => format!("A_Ω*A_Ω for column {j}, Ω = {omega:?}"),
                None => format!("A_Ω*A_Ω for Ω = {omega:?}"),
            };
            Error::singular(MODULE, what)
        })?;
        Ok(ColumnFactor { a_omega, gram_inv })
    }

    fn least_squares(&self, signs: &[f64]) -> DVector<f64> {
        &self.a_omega * (&self.gram_inv * DVector::from_column_slice(signs))
    }

    /// Θv = v − A_Ω(A_Ω*A_Ω)⁻¹A_Ω*v.
    fn theta(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.a_omega * (&self.gram_inv * self.a_omega.tr_mul(v))
    }
}

fn check_omega(a: &Dictionary, omega: &[usize]) -> Result<()> {
    if omega.is_empty() || omega.iter().any(|&i| i >= a.n()) {
        return Err(Error::validation(MODULE, format!("bad support {omega:?} for n = {}", a.n())));
    }
    Ok(())
}

/// λ^LS = A_Ω(A_Ω*A_Ω)⁻¹σ.
pub fn least_squares_cert(a: &Dictionary, omega: &[usize], signs: &[f64]) -> Result<DVector<f64>> {
    check_omega(a, omega)?;
    if signs.len() != omega.len() {
        return Err(Error::validation(MODULE, "sign vector length differs from |Ω|"));
    }
    Ok(ColumnFactor::new(a, omega, None)?.least_squares(signs))
}

/// ζ = s·ΘQx/‖ΘQx‖ with s = `params.zeta_scale`, or zero in the degenerate case.
pub fn deflation_direction(
    a: &Dictionary,
    omega: &[usize],
    q_prev: &DMatrix<f64>,
    x: &DVector<f64>,
    params: &CertParams,
) -> Result<DVector<f64>> {
    check_omega(a, omega)?;
    if q_prev.shape() != (a.m(), a.n()) || x.len() != a.n() {
        return Err(Error::validation(MODULE, "Q or x has the wrong shape"));
    }
    let factor = ColumnFactor::new(a, omega, None)?;
    let (zeta, _) = deflate(&factor, q_prev, x.as_slice(), omega, params);
    Ok(zeta)
}

fn deflate(
    factor: &ColumnFactor,
    q: &DMatrix<f64>,
    x_full: &[f64],
    omega: &[usize],
    params: &CertParams,
) -> (DVector<f64>, bool) {
    let mut qx = DVector::zeros(q.nrows());
    let mut xnorm2 = 0.0;
    for &i in omega {
        qx.axpy(x_full[i], &q.column(i), 1.0);
        xnorm2 += x_full[i] * x_full[i];
    }
    let tq = factor.theta(&qx);
    let norm = tq.norm();
    if norm <= params.zero_tol * q.norm() * xnorm2.sqrt() || norm == 0.0 {
        (DVector::zeros(q.nrows()), true)
    } else {
        (tq * (params.zeta_scale / norm), false)
    }
}

/// Per-step record of one golfing step.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepDiag {
    /// Global column index.
    pub j: usize,
    /// ‖Q_t‖_F after this step, in the pass's own units.
    pub q_norm: f64,
    /// ‖A_{Ωⱼᶜ}*λⱼ‖_∞.
    pub offsup_inf: f64,
    pub zeta_zero: bool,
    /// ‖Φ[λⱼxⱼ*]‖_F², in the pass's own units.
    pub step_energy: f64,
}

#[derive(Clone, Debug)]
pub struct GolfingPass {
    /// λ for the first `t_star` columns of the pass.
    pub lambdas: Vec<DVector<f64>>,
    /// ‖Q_t‖_F for t = 1..=|cols|.
    pub q_trajectory: Vec<f64>,
    pub t_star: usize,
    /// Q_{t⋆}.
    pub q_at_t_star: DMatrix<f64>,
    pub steps: Vec<StepDiag>,
}

/// One sequential golfing sweep over `cols` with coefficients scaled by
/// `scale`; t⋆ is the argmin of ‖Q_t‖_F over t ∈ [⌈(|cols|−1)/2⌉, |cols|]
/// (largest t on ties), never below 1.
pub fn golfing_pass(
    a: &Dictionary,
    x: &SparseCoeffs,
    cols: Range<usize>,
    scale: f64,
    params: &CertParams,
) -> Result<GolfingPass> {
    if cols.is_empty() || cols.end > x.p() {
        return Err(Error::validation(MODULE, format!("column range {cols:?} invalid for p = {}", x.p())));
    }
    if a.n() != x.n() {
        return Err(Error::validation(MODULE, "A and X dimensions disagree"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation(MODULE, "scale must be positive"));
    }
    let (m, n) = (a.m(), a.n());
    let ad = a.entries();
    let xd = x.dense();
    let len = cols.len();
    let lo = len.saturating_sub(1).div_ceil(2).max(1);

    let mut q = DMatrix::zeros(m, n);
    let mut col_norm2 = vec![0.0; n];
    let mut lambdas = Vec::with_capacity(len);
    let mut traj = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(len);
    let mut best: Option<(usize, f64, DMatrix<f64>)> = None;
    let mut xfull = vec![0.0; n];

    for (t, j) in cols.clone().enumerate() {
        let omega = x.support().col(j);
        let factor = ColumnFactor::new(a, omega, Some(j))?;
        for &i in omega {
            xfull[i] = scale * xd[(i, j)];
        }
        let signs: Vec<f64> = omega.iter().map(|&i| xd[(i, j)].signum()).collect();
        let (zeta, zeta_zero) = deflate(&factor, &q, &xfull, omega, params);
        let lambda = factor.least_squares(&signs) - zeta;

        // Q ← Q + Φ[λx*], touching only the columns in Ωⱼ.
        let mut energy = 0.0;
        for &i in omega {
            let ai = ad.column(i);
            let mut upd = &lambda * xfull[i];
            let c = ai.dot(&upd);
            upd.axpy(-c, &ai, 1.0);
            energy += upd.norm_squared();
            let mut qi = q.column_mut(i);
            qi += &upd;
            col_norm2[i] = qi.norm_squared();
        }
        let qn = col_norm2.iter().sum::<f64>().sqrt();

        let mut offsup: f64 = 0.0;
        let atl = ad.tr_mul(&lambda);
        for (i, v) in atl.iter().enumerate() {
            if !omega.contains(&i) {
                offsup = offsup.max(v.abs());
            }
        }
        for &i in omega {
            xfull[i] = 0.0;
        }

        traj.push(qn);
        steps.push(StepDiag { j, q_norm: qn, offsup_inf: offsup, zeta_zero, step_energy: energy });
        lambdas.push(lambda);
        let tt = t + 1;
        if tt >= lo && best.as_ref().is_none_or(|(_, v, _)| qn <= *v) {
            best = Some((tt, qn, q.clone()));
        }
    }
    let (t_star, _, q_at_t_star) = best.expect("window is nonempty");
    lambdas.truncate(t_star);
    Ok(GolfingPass { lambdas, q_trajectory: traj, t_star, q_at_t_star, steps })
}

#[derive(Clone, Debug)]
pub struct CertificateState {
    /// Λ, m×p.
    pub lambda: DMatrix<f64>,
    /// Q = Φ[ΛX*].
    pub residual: DMatrix<f64>,
    /// Diagnostics of the step that produced each kept λⱼ, in column order.
    pub per_step: Vec<StepDiag>,
    /// First column of every pass.
    pub restart_boundaries: Vec<usize>,
    /// Set when kμ(A) ≥ 1/8, where the sup-norm bound is not guaranteed.
    pub coherence_warning: bool,
}

impl CertificateState {
    pub fn passes(&self) -> usize {
        self.restart_boundaries.len()
    }
}

/// ⌈log_{4/3} p⌉ + 2.
pub fn max_passes(p: usize) -> usize {
    ((p as f64).ln() / (4.0f64 / 3.0).ln()).ceil().max(0.0) as usize + 2
}

/// Golfing passes over the uncertified suffix until every column has a λ.
/// A pass starting at column s rescales coefficients by (p/(p−s))^{1/2}.
pub fn build_certificate(a: &Dictionary, x: &SparseCoeffs, params: &CertParams) -> Result<CertificateState> {
    let (m, p) = (a.m(), x.p());
    let mut lambda = DMatrix::zeros(m, p);
    let mut per_step = Vec::with_capacity(p);
    let mut boundaries = Vec::new();
    let mut start = 0;
    while start < p {
        let scale = (p as f64 / (p - start) as f64).sqrt();
        let pass = golfing_pass(a, x, start..p, scale, params)?;
        boundaries.push(start);
        for (t, l) in pass.lambdas.iter().enumerate() {
            lambda.set_column(start + t, l);
        }
        per_step.extend_from_slice(&pass.steps[..pass.t_star]);
        start += pass.t_star;
    }
    debug_assert!(boundaries.len() <= max_passes(p));
    let mut residual = &lambda * x.dense().transpose();
    phi_in_place(a.entries(), &mut residual);
    Ok(CertificateState {
        lambda,
        residual,
        per_step,
        restart_boundaries: boundaries,
        coherence_warning: x.k() as f64 * a.mu() >= 0.125,
    })
}

/// The three sufficient conditions for (0, 0) to be the unique optimum.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertificateReport {
    /// max over Ω of |(A*Λ − Σ)|.
    pub interp_dev: f64,
    pub interp_ok: bool,
    /// ‖𝒫_{Ωᶜ}[A*Λ]‖_∞.
    pub offsup_inf: f64,
    pub offsup_ok: bool,
    /// ‖Φ[ΛX*]‖_F.
    pub phi_norm: f64,
    pub alpha: f64,
    pub phi_ok: bool,
}

impl CertificateReport {
    pub fn all_ok(&self) -> bool {
        self.interp_ok && self.offsup_ok && self.phi_ok
    }
}

pub const INTERP_TOL: f64 = 1e-9;

pub fn verify_certificate(
    a: &Dictionary,
    x: &SparseCoeffs,
    lambda: &DMatrix<f64>,
    alpha: f64,
) -> Result<CertificateReport> {
    if lambda.shape() != (a.m(), x.p()) || a.n() != x.n() {
        return Err(Error::validation(MODULE, "Λ, A and X shapes disagree"));
    }
    let (interp_dev, offsup_inf) = dual_split(a, x, lambda);
    let mut phi = lambda * x.dense().transpose();
    phi_in_place(a.entries(), &mut phi);
    let phi_norm = phi.norm();
    Ok(CertificateReport {
        interp_dev,
        interp_ok: interp_dev <= INTERP_TOL,
        offsup_inf,
        offsup_ok: offsup_inf <= 0.5,
        phi_norm,
        alpha,
        phi_ok: phi_norm < alpha / 2.0,
    })
}

/// (max_Ω |A*Λ − Σ|, max_{Ωᶜ} |A*Λ|).
pub(crate) fn dual_split(a: &Dictionary, x: &SparseCoeffs, lambda: &DMatrix<f64>) -> (f64, f64) {
    let h = a.entries().tr_mul(lambda);
    let mask = x.support().mask();
    let sig = x.signs();
    let mut interp: f64 = 0.0;
    let mut off: f64 = 0.0;
    for j in 0..x.p() {
        for i in 0..x.n() {
            if mask[(i, j)] {
                interp = interp.max((h[(i, j)] - sig[(i, j)]).abs());
            } else {
                off = off.max(h[(i, j)].abs());
            }
        }
    }
    (interp, off)
}
