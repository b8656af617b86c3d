//! Primal-dual hybrid gradient for the linearized problem in the
//! parametrization Δ_A = −AC, Δ_X = CX + VW, followed by a crossover that
//! fixes a support and solves for exact primal and dual points.
//!
//! With u = (C, W) the problem is min_{u ∈ U} ‖X + Lu‖₁, where
//! Lu = CX + VW and U = {C : ⟨A*Aᵢ, Cᵢ⟩ = 0 for every column i}. The
//! dual is max ⟨y, X⟩ over ‖y‖_∞ ≤ 1 with 𝒫_U L*y = 0.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::TangentPerturbation;
use crate::error::{Error, Result};
use crate::krylov;
use crate::linalg::{sym_eigen, Dictionary};

const MODULE: &str = "tangent";
/// Largest u-space dimension for which the normal matrix is formed densely.
const DENSE_NORMAL_MAX: usize = 600;

/// The linear map u ↦ CX + VW and its adjoint, with X in sparse form.
pub(crate) struct TangentMap {
    a: DMatrix<f64>,
    n: usize,
    p: usize,
    /// Nonzeros (i, X_ij) of each column j.
    cols: Vec<Vec<(usize, f64)>>,
    /// X itself when it is dense enough that matrix products beat the
    /// column loops.
    dense_x: Option<DMatrix<f64>>,
    /// Unit vectors A*Aᵢ/‖A*Aᵢ‖.
    h_unit: DMatrix<f64>,
    /// Orthonormal basis of null(A), n×(n−m).
    null: DMatrix<f64>,
}

impl TangentMap {
    pub(crate) fn new(a: &Dictionary, x: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = (a.m(), a.n());
        if x.nrows() != n {
            return Err(Error::validation(MODULE, "A and X dimensions disagree"));
        }
        let h = a.gram();
        let eig = sym_eigen(&h);
        let lmax = eig.eigenvalues.max();
        let null_idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-10 * lmax).collect();
        if null_idx.len() + m != n {
            return Err(Error::conditioning(MODULE, "A does not have full row rank"));
        }
        let null = eig.eigenvectors.select_columns(&null_idx);
        let mut h_unit = h;
        for mut c in h_unit.column_iter_mut() {
            let nrm = c.norm();
            c /= nrm;
        }
        let cols: Vec<Vec<(usize, f64)>> = (0..x.ncols())
            .map(|j| (0..n).filter(|&i| x[(i, j)] != 0.0).map(|i| (i, x[(i, j)])).collect())
            .collect();
        let nnz: usize = cols.iter().map(Vec::len).sum();
        let dense_x = (nnz * 4 > n * x.ncols()).then(|| x.clone());
        Ok(TangentMap { a: a.entries().clone(), n, p: x.ncols(), cols, dense_x, h_unit, null })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n * self.n + self.null.ncols() * self.p
    }

    fn split<'u>(&self, u: &'u DVector<f64>) -> (&'u [f64], &'u [f64]) {
        u.as_slice().split_at(self.n * self.n)
    }

    /// Lu = CX + VW.
    pub(crate) fn apply(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let (c, w) = self.split(u);
        let mut out = if self.null.ncols() > 0 {
            let wm = DMatrix::from_column_slice(self.null.ncols(), self.p, w);
            &self.null * wm
        } else {
            DMatrix::zeros(n, self.p)
        };
        if let Some(x) = &self.dense_x {
            let cm = DMatrix::from_column_slice(n, n, c);
            out.gemm(1.0, &cm, x, 1.0);
            return out;
        }
        for (j, col) in self.cols.iter().enumerate() {
            let mut dst = out.column_mut(j);
            for &(i, v) in col {
                let ci = &c[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(ci) {
                    *d += v * s;
                }
            }
        }
        out
    }

    /// L*y = (yX*, V*y).
    pub(crate) fn adjoint(&self, y: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n;
        let mut u = DVector::zeros(self.dim());
        if let Some(x) = &self.dense_x {
            let yx = y * x.transpose();
            u.as_mut_slice()[..n * n].copy_from_slice(yx.as_slice());
        } else {
            let c = &mut u.as_mut_slice()[..n * n];
            for (j, col) in self.cols.iter().enumerate() {
                let yj = y.column(j);
                for &(i, v) in col {
                    for (d, s) in c[i * n..(i + 1) * n].iter_mut().zip(yj.iter()) {
                        *d += v * s;
                    }
                }
            }
        }
        if self.null.ncols() > 0 {
            let vy = self.null.tr_mul(y);
            u.as_mut_slice()[n * n..].copy_from_slice(vy.as_slice());
        }
        u
    }

    /// Orthogonal projection onto U.
    pub(crate) fn project(&self, u: &mut DVector<f64>) {
        let n = self.n;
        let c = &mut u.as_mut_slice()[..n * n];
        for l in 0..n {
            let h = self.h_unit.column(l);
            let cl = &mut c[l * n..(l + 1) * n];
            let d: f64 = cl.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
            for (v, hv) in cl.iter_mut().zip(h.iter()) {
                *v -= d * hv;
            }
        }
    }

    pub(crate) fn perturbation(&self, u: &DVector<f64>) -> TangentPerturbation {
        let n = self.n;
        let c = DMatrix::from_column_slice(n, n, &u.as_slice()[..n * n]);
        TangentPerturbation { delta_a: -(&self.a * c), delta_x: self.apply(u) }
    }

    /// Λ with A*Λ = y for y in the range of A*.
    pub(crate) fn lambda_from_dual(&self, y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let aat = &self.a * self.a.transpose();
        let inv = crate::linalg::sym_inverse(&aat)?;
        Some(inv * (&self.a * y))
    }
}

/// Solves K_S u = rhs on U where K_S = 𝒫_U L*𝒫_S L 𝒫_U and S is a mask of
/// kept entries (`None` keeps everything). Small problems factor K_S plus a
/// tiny ridge and refine; larger ones use conjugate gradients.
struct Normal<'t> {
    map: &'t TangentMap,
    keep: Option<DMatrix<bool>>,
    factor: Option<(Cholesky<f64, Dyn>, DMatrix<f64>)>,
}

impl<'t> Normal<'t> {
    fn new(map: &'t TangentMap, keep: Option<DMatrix<bool>>) -> Self {
        let mut nm = Normal { map, keep, factor: None };
        let d = map.dim();
        if d <= DENSE_NORMAL_MAX {
            let mut k = DMatrix::zeros(d, d);
            for c in 0..d {
                let mut e = DVector::zeros(d);
                e[c] = 1.0;
                k.set_column(c, &nm.apply(&e));
            }
            let k = (&k + k.transpose()) * 0.5;
            let ridge = 1e-12 * k.diagonal().amax().max(f64::MIN_POSITIVE);
            let shifted = &k + DMatrix::identity(d, d) * ridge;
            nm.factor = shifted.cholesky().map(|c| (c, k));
        }
        nm
    }

    fn mask(&self, z: &mut DMatrix<f64>) {
        if let Some(keep) = &self.keep {
            z.zip_apply(keep, |v, k| {
                if !k {
                    *v = 0.0
                }
            });
        }
    }

    fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut u = u.clone();
        self.map.project(&mut u);
        let mut z = self.map.apply(&u);
        self.mask(&mut z);
        let mut out = self.map.adjoint(&z);
        self.map.project(&mut out);
        out
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut out = match &self.factor {
            Some((chol, k)) => {
                let mut w = chol.solve(rhs);
                for _ in 0..3 {
                    let r = rhs - k * &w;
                    w += chol.solve(&r);
                }
                w
            }
            None => krylov::cg(|v| self.apply(v), rhs, 1e-13, 20 * self.map.dim().max(50)).x,
        };
        self.map.project(&mut out);
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PdParams {
    /// Stop when primal − dual ≤ tol·max(1, ‖X‖₁).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PdParams {
    fn default() -> Self {
        PdParams { tol: 1e-9, max_iter: 200_000 }
    }
}

pub(crate) struct PdOutcome {
    pub u: DVector<f64>,
    pub dual_value: f64,
    /// A dual point with ‖y‖_∞ ≤ 1 and 𝒫_U L*y = 0 attaining `dual_value`.
    pub dual: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn objective(map: &TangentMap, x: &DMatrix<f64>, w: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    (x + map.apply(u)).zip_map(w, |v, wv| wv * v.abs()).sum()
}

/// Scales y into the box |y| ≤ w.
fn into_box(y: &mut DMatrix<f64>, w: &DMatrix<f64>) {
    let s = y.zip_map(w, |v, wv| v.abs() / wv).max();
    if s > 1.0 {
        *y /= s;
    }
}

/// Projects y onto {𝒫_U L*y = 0} and scales into the box |y| ≤ w.
fn feasible_dual(map: &TangentMap, full: &Normal, w: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = map.adjoint(y);
    map.project(&mut g);
    let corr = full.solve(&g);
    let mut ye = y - map.apply(&corr);
    into_box(&mut ye, w);
    ye
}

/// Exact dual with y = sign(z) on S and the smallest change to `y0` off S
/// that satisfies 𝒫_U L*y = 0. Returns None if the system is inconsistent.
fn dual_on_support(
    map: &TangentMap,
    keep_off: &Normal,
    on: &DMatrix<bool>,
    signs: &DMatrix<f64>,
    y0: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let mut y = DMatrix::from_fn(signs.nrows(), signs.ncols(), |i, j| if on[(i, j)] { signs[(i, j)] } else { y0[(i, j)] });
    let mut r = map.adjoint(&y);
    map.project(&mut r);
    let d = keep_off.solve(&(-&r));
    let mut pd = d.clone();
    map.project(&mut pd);
    let mut corr = map.apply(&pd);
    keep_off.mask(&mut corr);
    y += corr;
    let mut chk = map.adjoint(&y);
    map.project(&mut chk);
    let scale = 1.0 + y.amax() * map.cols.iter().map(|c| c.iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max);
    (chk.amax() <= 1e-10 * scale).then_some(y)
}

fn off_mask(on: &DMatrix<bool>) -> DMatrix<bool> {
    on.map(|b| !b)
}

/// Primal and dual crossover from a support guess S = {|z| > thresh}.
fn polish(
    map: &TangentMap,
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> (DVector<f64>, f64, Option<(DMatrix<f64>, f64)>) {
    let scale = z.amax().max(1e-300);
    let on = z.map(|v| v.abs() > 1e-7 * scale);
    let keep_off = Normal::new(map, Some(off_mask(&on)));
    let mut xo = x.clone();
    keep_off.mask(&mut xo);
    let mut rhs = map.adjoint(&xo);
    map.project(&mut rhs);
    let u = -keep_off.solve(&rhs);
    let obj = objective(map, x, w, &u);
    let zs = x + map.apply(&u);
    let signs = zs.zip_map(w, |v, wv| wv * v.signum());
    let dual = [y.clone(), DMatrix::zeros(y.nrows(), y.ncols())]
        .iter()
        .filter_map(|y0| dual_on_support(map, &keep_off, &on, &signs, y0))
        .map(|mut yd| {
            into_box(&mut yd, w);
            let v = yd.dot(x);
            (yd, v)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1));
    (u, obj, dual)
}

pub(crate) fn solve(map: &TangentMap, x: &DMatrix<f64>, params: &PdParams) -> Result<PdOutcome> {
    solve_weighted(map, x, &DMatrix::from_element(x.nrows(), x.ncols(), 1.0), params)
}

/// min Σ w_ij |X + Lu|_ij over U, for positive weights w.
pub(crate) fn solve_weighted(map: &TangentMap, x: &DMatrix<f64>, w: &DMatrix<f64>, params: &PdParams) -> Result<PdOutcome> {
    let (n, p) = x.shape();
    if w.shape() != (n, p) || w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::validation(MODULE, "weights must be positive and shaped like X"));
    }
    let x_l1 = x.zip_map(w, |v, wv| wv * v.abs()).sum();
    let tol_abs = params.tol * x_l1.max(1.0);
    let full = Normal::new(map, None);

    let mut best_u = DVector::zeros(map.dim());
    let mut best_obj = x_l1;
    let mut best_dual = DMatrix::zeros(n, p);
    let mut best_dv = 0.0;

    // The zero perturbation with its support as the first guess.
    let (u0, o0, d0) = polish(map, x, w, x, &x.map(|v| v.signum()));
    if o0 < best_obj {
        best_obj = o0;
        best_u = u0;
    }
    if let Some((yd, v)) = d0 {
        if v > best_dv {
            best_dv = v;
            best_dual = yd;
        }
    }
    if best_obj - best_dv <= tol_abs {
        return Ok(PdOutcome { u: best_u, dual_value: best_dv, dual: best_dual, iterations: 0, converged: true });
    }

    let lnorm = {
        let est = krylov::psd_norm(map.dim(), |v| full.apply(v), 1e-8, 0x1d);
        let bound = crate::linalg::spectral_norm(x).powi(2) + if map.null.ncols() > 0 { 1.0 } else { 0.0 };
        if est.converged { (est.value * (1.0 + 1e-6)).min(bound) } else { bound }
    }
    .sqrt()
    .max(1e-12);
    let step = 0.95 / lnorm;

    let mut u = DVector::zeros(map.dim());
    let mut y = DMatrix::zeros(n, p);
    let mut u_avg = u.clone();
    let mut y_avg = y.clone();
    let mut avg_count = 0.0;
    let mut restart_gap = f64::INFINITY;
    let check_every = 64;
    let mut checks = 0usize;
    let mut it = 0;
    while it < params.max_iter {
        let mut g = map.adjoint(&y);
        g *= -step;
        g += &u;
        map.project(&mut g);
        let u_new = g;
        let u_bar = &u_new * 2.0 - &u;
        let lb = map.apply(&u_bar);
        y.zip_zip_apply(&lb, x, |yv, l, xv| *yv += step * (l + xv));
        y.zip_apply(w, |yv, wv| *yv = yv.clamp(-wv, wv));
        u = u_new;
        avg_count += 1.0;
        u_avg += (&u - &u_avg) / avg_count;
        y_avg += (&y - &y_avg) / avg_count;
        it += 1;

        if it % check_every != 0 {
            continue;
        }
        checks += 1;
        let mut cand = Vec::with_capacity(2);
        for (uc, yc) in [(&u, &y), (&u_avg, &y_avg)] {
            let o = objective(map, x, w, uc);
            let yf = feasible_dual(map, &full, w, yc);
            let dv = yf.dot(x);
            if o < best_obj {
                best_obj = o;
                best_u = uc.clone();
            }
            if dv > best_dv {
                best_dv = dv;
                best_dual = yf;
            }
            cand.push(o - dv);
        }
        if checks.is_power_of_two() && checks >= 4 {
            let z = x + map.apply(&u);
            let (up, op, dp) = polish(map, x, w, &z, &y);
            if op < best_obj {
                best_obj = op;
                best_u = up;
            }
            if let Some((yd, v)) = dp {
                if v > best_dv {
                    best_dv = v;
                    best_dual = yd;
                }
            }
        }
        if best_obj - best_dv <= tol_abs {
            return Ok(PdOutcome { u: best_u, dual_value: best_dv, dual: best_dual, iterations: it, converged: true });
        }
        // Restart from whichever of current and average has the smaller gap.
        let (gc, ga) = (cand[0], cand[1]);
        let gmin = gc.min(ga);
        if gmin <= 0.2 * restart_gap || !restart_gap.is_finite() {
            if ga < gc {
                u = u_avg.clone();
                y = y_avg.clone();
            }
            u_avg = u.clone();
            y_avg = y.clone();
            avg_count = 0.0;
            restart_gap = gmin;
        }
    }
    Ok(PdOutcome { u: best_u, dual_value: best_dv, dual: best_dual, iterations: it, converged: false })
}

/// Exact dual on Ω: y = Σ on Ω, 𝒫_U L*y = 0, and y off Ω chosen as the
/// smaller in sup norm of the minimum-norm completion and the completion
/// nearest to `hint`.
pub(crate) fn exact_dual_on_omega(
    map: &TangentMap,
    x: &DMatrix<f64>,
    hint: Option<&DMatrix<f64>>,
) -> Option<DMatrix<f64>> {
    let on = x.map(|v| v != 0.0);
    let signs = x.map(|v| v.signum());
    let keep_off = Normal::new(map, Some(off_mask(&on)));
    let zero = DMatrix::zeros(x.nrows(), x.ncols());
    let off_sup = |y: &DMatrix<f64>| {
        y.iter().zip(on.iter()).filter(|(_, &o)| !o).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    };
    std::iter::once(&zero)
        .chain(hint)
        .filter_map(|y0| dual_on_support(map, &keep_off, &on, &signs, y0))
        .min_by(|a, b| off_sup(a).total_cmp(&off_sup(b)))
}
