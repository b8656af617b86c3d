//! The operators T, T̂ and R acting on vec[Z] for n×p matrices Z, the
//! restricted singular value ξ of 𝒫_Ω T 𝒫_Ω, the balancedness constant α,
//! and the per-row terms Ψᵢ.
//!
//! Nothing here forms a Kronecker product except the [`dense`] module,
//! which exists to cross-check the matrix-free code at small sizes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::krylov::{self, Extreme};
use crate::linalg::{phi_in_place, c_a_adjoint_unchecked, spectral_norm, sym_eigen, sym_inverse, Dictionary};
use crate::model::SparseCoeffs;

const MODULE: &str = "balancedness";

/// Smallest admissible λ_min(XX*).
pub const XX_MIN_EIG: f64 = 1e-10;
/// Largest kp handled by the dense path of [`restricted_min_sv`].
pub const DENSE_MAX_COORDS: usize = 4000;

/// Cached factors for applying T.
#[derive(Clone, Debug)]
pub struct Operators {
    a: DMatrix<f64>,
    /// A*A.
    h: DMatrix<f64>,
    x: DMatrix<f64>,
    /// (XX*)⁻¹.
    gram_inv: DMatrix<f64>,
    /// (XX*)⁻¹X.
    ginv_x: DMatrix<f64>,
    xx_min_eig: f64,
}

impl Operators {
    pub fn new(a: &Dictionary, x: &DMatrix<f64>) -> Result<Self> {
        if a.n() != x.nrows() {
            return Err(Error::validation(MODULE, "A and X dimensions disagree"));
        }
        let g = x * x.transpose();
        let min_eig = sym_eigen(&g).eigenvalues.min();
        if min_eig <= XX_MIN_EIG {
            return Err(Error::conditioning(MODULE, format!("XX* (λ_min = {min_eig:.3e})")));
        }
        let gram_inv = sym_inverse(&g).ok_or_else(|| Error::conditioning(MODULE, "XX*"))?;
        let ginv_x = &gram_inv * x;
        Ok(Operators { a: a.entries().clone(), h: a.gram(), x: x.clone(), gram_inv, ginv_x, xx_min_eig: min_eig })
    }

    pub fn xx_min_eig(&self) -> f64 {
        self.xx_min_eig
    }

    /// T·vec[Z] = vec[A*A(Z(I − P_X) + diag(d)(XX*)⁻¹X)] with
    /// dᵢ = ⟨Aᵢ, (AZX*(XX*)⁻¹)ᵢ⟩.
    pub fn apply_t(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let w = z * self.x.transpose();
        let mut inner = z - &w * &self.ginv_x;
        let u = &self.a * (&w * &self.gram_inv);
        let d = c_a_adjoint_unchecked(&self.a, &u);
        for (i, di) in d.iter().enumerate() {
            for j in 0..inner.ncols() {
                inner[(i, j)] += di * self.ginv_x[(i, j)];
            }
        }
        &self.h * inner
    }

    /// 𝒫_Ω T 𝒫_Ω as a kp×kp matrix in the coordinate order of `coords`.
    pub fn compressed_t(&self, coords: &[(usize, usize)]) -> DMatrix<f64> {
        let n = self.h.nrows();
        let d = coords.len();
        let p_x = self.x.tr_mul(&self.ginv_x);
        let mut l = DMatrix::zeros(n, d);
        for (c, &(a, j)) in coords.iter().enumerate() {
            for i in 0..n {
                l[(i, c)] = self.ginv_x[(i, j)] * self.h[(i, a)];
            }
        }
        let mut k = l.tr_mul(&l);
        for (c, &(a, j)) in coords.iter().enumerate() {
            for (r, &(b, jj)) in coords.iter().enumerate() {
                let proj = if j == jj { 1.0 - p_x[(jj, j)] } else { -p_x[(jj, j)] };
                k[(r, c)] += self.h[(b, a)] * proj;
            }
        }
        k
    }
}

/// R·vec[Z] = vec[A*Φ[AZX*]X].
pub fn apply_r_mat(a: &Dictionary, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut u = a.entries() * z * x.transpose();
    phi_in_place(a.entries(), &mut u);
    a.entries().tr_mul(&u) * x
}

/// T̂·vec[Z] = vec[A*AZ] − R·vec[Z].
pub fn apply_t_hat_mat(a: &Dictionary, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    a.gram() * z - apply_r_mat(a, x, z)
}

fn as_matrix(n: usize, p: usize, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    if z.len() != n * p {
        return Err(Error::validation(MODULE, format!("vector length {} ≠ np = {}", z.len(), n * p)));
    }
    Ok(DMatrix::from_column_slice(n, p, z.as_slice()))
}

fn as_vector(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn apply_t(a: &Dictionary, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    let ops = Operators::new(a, x)?;
    Ok(as_vector(ops.apply_t(&as_matrix(x.nrows(), x.ncols(), z)?)))
}

pub fn apply_t_hat(a: &Dictionary, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, x)?;
    Ok(as_vector(apply_t_hat_mat(a, x, &as_matrix(x.nrows(), x.ncols(), z)?)))
}

pub fn apply_r(a: &Dictionary, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, x)?;
    Ok(as_vector(apply_r_mat(a, x, &as_matrix(x.nrows(), x.ncols(), z)?)))
}

fn check_dims(a: &Dictionary, x: &DMatrix<f64>) -> Result<()> {
    if a.n() != x.nrows() {
        return Err(Error::validation(MODULE, "A and X dimensions disagree"));
    }
    Ok(())
}

/// Embeds coordinates of S_Ω into an n×p matrix.
pub fn embed(n: usize, p: usize, coords: &[(usize, usize)], v: &DVector<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(n, p);
    for (c, &(i, j)) in coords.iter().enumerate() {
        z[(i, j)] = v[c];
    }
    z
}

/// Reads the S_Ω coordinates of an n×p matrix.
pub fn restrict(coords: &[(usize, usize)], z: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(coords.len(), coords.iter().map(|&(i, j)| z[(i, j)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SvMethod {
    /// Dense when kp ≤ 4000, Lanczos otherwise.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct XiEstimate {
    pub xi: f64,
    pub method: SvMethod,
    /// Ritz residual for Lanczos, zero for the dense path.
    pub residual: f64,
}

/// ξ = σ_min(𝒫_Ω T 𝒫_Ω) on the kp-dimensional coordinate subspace S_Ω.
pub fn restricted_min_sv(a: &Dictionary, x: &SparseCoeffs, method: SvMethod) -> Result<XiEstimate> {
    let ops = Operators::new(a, x.dense())?;
    xi_with(&ops, x, method, 0x5eed)
}

fn xi_with(ops: &Operators, x: &SparseCoeffs, method: SvMethod, seed: u64) -> Result<XiEstimate> {
    let coords = x.support().coords();
    let (n, p) = (x.n(), x.p());
    let method = match method {
        SvMethod::Auto if coords.len() <= DENSE_MAX_COORDS => SvMethod::Dense,
        SvMethod::Auto => SvMethod::Lanczos,
        m => m,
    };
    if method == SvMethod::Dense {
        let k = ops.compressed_t(&coords);
        // K is symmetric, so its singular values are |eigenvalues|.
        let eig = sym_eigen(&k);
        let xi = eig.eigenvalues.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        return Ok(XiEstimate { xi, method, residual: 0.0 });
    }
    let est = krylov::lanczos(
        coords.len(),
        |v| restrict(&coords, &ops.apply_t(&embed(n, p, &coords, v))),
        Extreme::Smallest,
        1e-8,
        800,
        seed,
    );
    if !est.converged {
        return Err(Error::conditioning(MODULE, "Lanczos for ξ did not converge"));
    }
    Ok(XiEstimate { xi: est.value.max(0.0), method, residual: est.residual })
}

/// ‖𝒫_Ω T 𝒫_{Ωᶜ}‖ via the largest eigenvalue of 𝒫_Ω T 𝒫_{Ωᶜ} T 𝒫_Ω.
fn off_block_norm(ops: &Operators, x: &SparseCoeffs, seed: u64) -> f64 {
    let coords = x.support().coords();
    let mask = x.support().mask();
    let (n, p) = (x.n(), x.p());
    let est = krylov::psd_norm(
        coords.len(),
        |v| {
            let mut t1 = ops.apply_t(&embed(n, p, &coords, v));
            t1.zip_apply(&mask, |val, on| {
                if on {
                    *val = 0.0
                }
            });
            restrict(&coords, &ops.apply_t(&t1))
        },
        1e-10,
        seed,
    );
    est.value.max(0.0).sqrt()
}

/// The row event ℰᵢ: max_{a≠i} ‖xⁱ𝒫_{Ω^a}‖ ≤ 2√(k/n) and ‖xⁱ‖ ≤ 2.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RowEvent {
    pub max_cross: f64,
    pub row_norm: f64,
    pub holds: bool,
}

pub fn row_events(x: &SparseCoeffs) -> Vec<RowEvent> {
    let (n, k) = (x.n(), x.k());
    let xd = x.dense();
    let thresh = 2.0 * (k as f64 / n as f64).sqrt();
    (0..n)
        .map(|i| {
            let mut cross = vec![0.0; n];
            let mut norm2 = 0.0;
            for &j in x.support().row(i) {
                let v2 = xd[(i, j)] * xd[(i, j)];
                norm2 += v2;
                for &a in x.support().col(j) {
                    if a != i {
                        cross[a] += v2;
                    }
                }
            }
            let max_cross = cross.iter().cloned().fold(0.0, f64::max).sqrt();
            let row_norm = norm2.sqrt();
            RowEvent { max_cross, row_norm, holds: max_cross <= thresh && row_norm <= 2.0 }
        })
        .collect()
}

/// Ψᵢ = 𝒫_Ω(xⁱ*xⁱ ⊗ A*PᵢA)𝒫_Ω with Pᵢ = I − AᵢAᵢ*.
///
/// On S_Ω, Ψᵢ = FᵢᵀFᵢ where Fᵢ has one column X_{ij}PᵢA_a for every
/// coordinate (a, j) with j ∈ Ωⁱ.
#[derive(Clone, Debug)]
pub struct PsiTerm {
    pub row: usize,
    pub coords: Vec<(usize, usize)>,
    pub factor: DMatrix<f64>,
    pub norm: f64,
}

impl PsiTerm {
    /// Ψᵢ·vec[Z] for an arbitrary n×p matrix Z.
    pub fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let c = restrict(&self.coords, z);
        let out = self.factor.tr_mul(&(&self.factor * c));
        let mut res = DMatrix::zeros(z.nrows(), z.ncols());
        for (t, &(a, j)) in self.coords.iter().enumerate() {
            res[(a, j)] += out[t];
        }
        res
    }
}

pub fn psi_term(a: &Dictionary, x: &SparseCoeffs, row: usize) -> Result<PsiTerm> {
    if row >= x.n() || a.n() != x.n() {
        return Err(Error::validation(MODULE, format!("row {row} out of range or A/X mismatch")));
    }
    let ad = a.entries();
    let ai = ad.column(row);
    let xd = x.dense();
    let mut coords = Vec::new();
    for &j in x.support().row(row) {
        for &b in x.support().col(j) {
            coords.push((b, j));
        }
    }
    let mut factor = DMatrix::zeros(a.m(), coords.len());
    for (c, &(b, j)) in coords.iter().enumerate() {
        let ab = ad.column(b);
        let proj = &ab - &ai * ai.dot(&ab);
        factor.set_column(c, &(proj * xd[(row, j)]));
    }
    let norm = if coords.is_empty() {
        0.0
    } else if factor.nrows() <= factor.ncols() {
        let ff = &factor * factor.transpose();
        krylov::psd_norm(ff.nrows(), |v| &ff * v, 1e-6, row as u64).value
    } else {
        let ff = factor.tr_mul(&factor);
        krylov::psd_norm(ff.nrows(), |v| &ff * v, 1e-6, row as u64).value
    };
    Ok(PsiTerm { row, coords, factor, norm })
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiNorm {
    pub row: usize,
    pub norm: f64,
    pub on_event: bool,
    pub within_bound: bool,
}

/// Terms of the lower bound ξ ≥ term_identity − term_R − term_Tdiff.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionTerms {
    /// inf over S_Ω of ‖𝒫_Ω(I⊗A*A)𝒫_Ω z‖/‖z‖ = min_j λ_min(A_{Ωⱼ}*A_{Ωⱼ}).
    pub term_identity: f64,
    /// ‖𝒫_Ω R 𝒫_Ω‖.
    pub term_r: f64,
    /// ‖𝒫_Ω(T − T̂)𝒫_Ω‖.
    pub term_tdiff: f64,
    /// ‖(XX*)⁻¹ − I‖.
    pub xi_dev: f64,
    pub psi_norms: Vec<PsiNorm>,
    /// 4k/n + 24kμ(A).
    pub psi_bound: f64,
    pub chain_ok: bool,
    pub tdiff_bound_ok: bool,
    pub psi_sum_ok: bool,
    pub identity_bound_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalancednessReport {
    pub xi: f64,
    pub xi_method: SvMethod,
    pub alpha: f64,
    /// ‖𝒫_Ω T 𝒫_{Ωᶜ}‖ as measured.
    pub off_block_norm: f64,
    /// ‖XX* − I‖.
    pub eig_gap: f64,
    pub degenerate: bool,
    pub terms: Option<DecompositionTerms>,
}

#[derive(Clone, Copy, Debug)]
pub struct BalanceOptions {
    pub method: SvMethod,
    /// Also evaluate term_identity, term_R, term_Tdiff and the Ψᵢ.
    pub with_terms: bool,
    pub seed: u64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions { method: SvMethod::Auto, with_terms: true, seed: 0x5eed }
    }
}

/// α = (√2‖A‖(1 + ‖𝒫_Ω T 𝒫_{Ωᶜ}‖/ξ))⁻¹, or 0 when ξ vanishes.
pub fn alpha_bound(a: &Dictionary, x: &SparseCoeffs, opts: &BalanceOptions) -> Result<BalancednessReport> {
    let ops = Operators::new(a, x.dense())?;
    let xi = xi_with(&ops, x, opts.method, opts.seed)?;
    let off = off_block_norm(&ops, x, opts.seed ^ 1);
    let xx = x.dense() * x.dense().transpose();
    let eig_gap = spectral_norm(&(&xx - DMatrix::identity(x.n(), x.n())));
    let degenerate = !(xi.xi > 1e-12 * (1.0 + off));
    let alpha = if degenerate {
        0.0
    } else {
        1.0 / (std::f64::consts::SQRT_2 * a.op_norm() * (1.0 + off / xi.xi))
    };
    let terms = if opts.with_terms { Some(decomposition_terms(a, x, &ops, xi.xi, opts.seed)?) } else { None };
    Ok(BalancednessReport { xi: xi.xi, xi_method: xi.method, alpha, off_block_norm: off, eig_gap, degenerate, terms })
}

fn decomposition_terms(
    a: &Dictionary,
    x: &SparseCoeffs,
    ops: &Operators,
    xi: f64,
    seed: u64,
) -> Result<DecompositionTerms> {
    let coords = x.support().coords();
    let (n, p, k) = (x.n(), x.p(), x.k());
    let xd = x.dense();

    let mut term_identity = f64::INFINITY;
    for j in 0..p {
        let al = a.select_columns(x.support().col(j));
        let ev = sym_eigen(&al.tr_mul(&al)).eigenvalues.min();
        term_identity = term_identity.min(ev);
    }

    let term_r = krylov::psd_norm(
        coords.len(),
        |v| restrict(&coords, &apply_r_mat(a, xd, &embed(n, p, &coords, v))),
        1e-10,
        seed ^ 2,
    )
    .value;

    let tdiff = krylov::lanczos(
        coords.len(),
        |v| {
            let z = embed(n, p, &coords, v);
            restrict(&coords, &(ops.apply_t(&z) - apply_t_hat_mat(a, xd, &z)))
        },
        Extreme::Magnitude,
        1e-10,
        600,
        seed ^ 3,
    );
    let term_tdiff = tdiff.value.abs();

    let xi_dev = spectral_norm(&(&ops.gram_inv - DMatrix::identity(n, n)));
    let psi_bound = 4.0 * k as f64 / n as f64 + 24.0 * k as f64 * a.mu();
    let events = row_events(x);
    let mut psi_norms = Vec::with_capacity(n);
    let mut psi_sum = 0.0;
    for i in 0..n {
        let t = psi_term(a, x, i)?;
        psi_sum += t.norm;
        psi_norms.push(PsiNorm {
            row: i,
            norm: t.norm,
            on_event: events[i].holds,
            within_bound: t.norm <= psi_bound * (1.0 + 1e-9),
        });
    }
    let slack = 1e-8;
    Ok(DecompositionTerms {
        term_identity,
        term_r,
        term_tdiff,
        xi_dev,
        psi_norms,
        psi_bound,
        chain_ok: xi >= term_identity - term_r - term_tdiff - slack,
        tdiff_bound_ok: term_tdiff <= 12.0 * xi_dev + slack,
        psi_sum_ok: term_r <= psi_sum * (1.0 + 1e-6) + slack,
        identity_bound_ok: term_identity >= 1.0 - k as f64 * a.mu() - 1e-12,
    })
}

/// Kronecker-product assembly of the same operators, for cross-checks.
/// Quadratic memory in np; refuses np above 10⁴.
pub mod dense {
    use super::*;
    use nalgebra::SVD;

    pub const MAX_NP: usize = 10_000;

    fn check_size(x: &DMatrix<f64>) -> Result<()> {
        if x.len() > MAX_NP {
            return Err(Error::validation(MODULE, format!("dense assembly refused for np = {} > {MAX_NP}", x.len())));
        }
        Ok(())
    }

    /// The mn×n matrix of C_A: column i is vec[Aᵢeᵢ*].
    pub fn c_a_matrix(a: &Dictionary) -> DMatrix<f64> {
        let (m, n) = (a.m(), a.n());
        let mut c = DMatrix::zeros(m * n, n);
        for i in 0..n {
            for r in 0..m {
                c[(i * m + r, i)] = a.entries()[(r, i)];
            }
        }
        c
    }

    /// P_X = X*(XX*)⁻¹X through the pseudo-inverse of X.
    fn row_space_projector(x: &DMatrix<f64>) -> DMatrix<f64> {
        let svd = SVD::new(x.clone(), true, true);
        let pinv = svd.pseudo_inverse(1e-12).expect("SVD computed with U and V");
        pinv * x
    }

    /// (X*(XX*)⁻¹ ⊗ A*)·C_A, an np×n matrix M₂ with T = (I−P_X)⊗A*A + M₂M₂*.
    fn t_low_rank(a: &Dictionary, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let g = x * x.transpose();
        let gi = sym_inverse(&g).ok_or_else(|| Error::conditioning(MODULE, "XX*"))?;
        let left = (x.transpose() * gi).kronecker(&a.entries().transpose());
        Ok(left * c_a_matrix(a))
    }

    pub fn t(a: &Dictionary, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_size(x)?;
        let p = x.ncols();
        let proj = DMatrix::identity(p, p) - row_space_projector(x);
        let m2 = t_low_rank(a, x)?;
        Ok(proj.kronecker(&a.gram()) + &m2 * m2.transpose())
    }

    pub fn r(a: &Dictionary, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_size(x)?;
        let c = c_a_matrix(a);
        let mn = c.nrows();
        let b = x.kronecker(a.entries());
        let mid = DMatrix::identity(mn, mn) - &c * c.transpose();
        Ok(b.transpose() * mid * b)
    }

    pub fn t_hat(a: &Dictionary, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let p = x.ncols();
        Ok(DMatrix::<f64>::identity(p, p).kronecker(&a.gram()) - r(a, x)?)
    }

    /// Row/column indices of S_Ω in vec order.
    pub fn omega_indices(x: &SparseCoeffs) -> Vec<usize> {
        x.support().coords().into_iter().map(|(i, j)| j * x.n() + i).collect()
    }

    /// 𝒫_Ω T 𝒫_Ω on S_Ω, entry by entry from the Kronecker factors; never
    /// forms the np×np matrix, so it also works beyond [`MAX_NP`].
    pub fn compressed_t(a: &Dictionary, x: &SparseCoeffs) -> Result<DMatrix<f64>> {
        let xd = x.dense();
        let n = x.n();
        let proj = DMatrix::identity(x.p(), x.p()) - row_space_projector(xd);
        let h = a.gram();
        let m2 = t_low_rank(a, xd)?;
        let idx = omega_indices(x);
        let d = idx.len();
        let mut k = DMatrix::zeros(d, d);
        for (c, &cc) in idx.iter().enumerate() {
            for (r, &rr) in idx.iter().enumerate() {
                let (jr, ar) = (rr / n, rr % n);
                let (jc, ac) = (cc / n, cc % n);
                k[(r, c)] = proj[(jr, jc)] * h[(ar, ac)] + m2.row(rr).dot(&m2.row(cc));
            }
        }
        Ok(k)
    }

    /// ξ from the full singular spectrum of [`compressed_t`].
    pub fn xi(a: &Dictionary, x: &SparseCoeffs) -> Result<f64> {
        let k = compressed_t(a, x)?;
        Ok(SVD::new(k, false, false).singular_values.min())
    }

    pub fn psi(a: &Dictionary, x: &SparseCoeffs, row: usize) -> Result<DMatrix<f64>> {
        let xd = x.dense();
        check_size(xd)?;
        let xi_row = xd.row(row).transpose();
        let ai = a.entries().column(row).clone_owned();
        let pi = DMatrix::identity(a.m(), a.m()) - &ai * ai.transpose();
        let inner = a.entries().transpose() * pi * a.entries();
        let full = (&xi_row * xi_row.transpose()).kronecker(&inner);
        let idx = omega_indices(x);
        let mut out = DMatrix::zeros(full.nrows(), full.ncols());
        for &r in &idx {
            for &c in &idx {
                out[(r, c)] = full[(r, c)];
            }
        }
        Ok(out)
    }
}
