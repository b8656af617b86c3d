//! Lanczos eigenvalue estimates and conjugate gradients for symmetric
//! operators given only as mat-vec closures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
    /// Largest in magnitude.
    Magnitude,
}

#[derive(Clone, Copy, Debug)]
pub struct EigEstimate {
    pub value: f64,
    /// ‖K v − θ v‖ for the returned Ritz pair.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Extreme eigenvalue of the symmetric operator `op` on ℝ^dim.
///
/// Full reorthogonalization; stops when the Ritz residual drops below
/// `rel_tol` times the largest Ritz value in magnitude, when the Krylov
/// space becomes invariant, or after `max_iter` steps.
pub fn lanczos<F>(dim: usize, mut op: F, which: Extreme, rel_tol: f64, max_iter: usize, seed: u64) -> EigEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return EigEstimate { value: 0.0, residual: 0.0, iterations: 0, converged: true };
    }
    let mut r = rng::stream(seed);
    let mut v = DVector::from_fn(dim, |_, _| r.sample::<f64, _>(StandardNormal));
    v /= v.norm();

    let steps = max_iter.min(dim).max(1);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut best = EigEstimate { value: 0.0, residual: f64::INFINITY, iterations: 0, converged: false };

    for it in 0..steps {
        let mut w = op(&v);
        let a = v.dot(&w);
        w.axpy(-a, &v, 1.0);
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            w.axpy(-b, prev, 1.0);
        }
        basis.push(v.clone());
        alphas.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let b = w.norm();

        let j = alphas.len();
        let check = j <= 40 || j % 4 == 0 || it + 1 == steps;
        let scale_guess = alphas.iter().map(|x| x.abs()).fold(0.0, f64::max).max(b);
        let invariant = b <= 1e-13 * scale_guess.max(f64::MIN_POSITIVE);
        if check || invariant {
            let (theta, s_last, scale) = ritz(&alphas, &betas, which);
            let res = b * s_last.abs();
            best = EigEstimate { value: theta, residual: res, iterations: j, converged: false };
            if invariant || res <= rel_tol * scale.max(f64::MIN_POSITIVE) {
                best.converged = true;
                best.residual = if invariant { 0.0 } else { res };
                return best;
            }
        }
        if invariant {
            break;
        }
        betas.push(b);
        v = w / b;
    }
    best
}

fn ritz(alphas: &[f64], betas: &[f64], which: Extreme) -> (f64, f64, f64) {
    let j = alphas.len();
    let mut t = DMatrix::zeros(j, j);
    for i in 0..j {
        t[(i, i)] = alphas[i];
        if i + 1 < j {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = crate::linalg::sym_eigen(&t);
    let vals = &eig.eigenvalues;
    let scale = vals.amax();
    let idx = match which {
        Extreme::Smallest => vals.imin(),
        Extreme::Largest => vals.imax(),
        Extreme::Magnitude => vals.iamax(),
    };
    (vals[idx], eig.eigenvectors[(j - 1, idx)], scale)
}

/// Operator norm of a symmetric PSD operator (its largest eigenvalue).
pub fn psd_norm<F>(dim: usize, op: F, rel_tol: f64, seed: u64) -> EigEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    lanczos(dim, op, Extreme::Largest, rel_tol, 600, seed)
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradients for a symmetric PSD `op`; consistent singular
/// systems converge to the minimum-norm-in-range solution from x₀ = 0.
pub fn cg<F>(mut op: F, rhs: &DVector<f64>, rel_tol: f64, max_iter: usize) -> CgResult
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let bnorm = rhs.norm();
    let mut x = DVector::zeros(rhs.len());
    if bnorm == 0.0 {
        return CgResult { x, iterations: 0, rel_residual: 0.0 };
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut it = 0;
    while it < max_iter && rr.sqrt() > rel_tol * bnorm {
        let ap = op(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_new = r.dot(&r);
        p = &r + p * (rr_new / rr);
        rr = rr_new;
        it += 1;
    }
    CgResult { x, iterations: it, rel_residual: rr.sqrt() / bnorm }
}
