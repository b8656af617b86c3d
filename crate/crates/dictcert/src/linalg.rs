//! Dictionary type and the small dense operators the rest of the crate is
//! built from: mutual coherence, the per-column projection Φ, the diagonal
//! embedding C_A and its adjoint, and Gram-submatrix bounds.
//!
//! Matrices are nalgebra `DMatrix<f64>`, which is column-major, so
//! `as_slice()` is exactly vec[·].

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

const MODULE: &str = "core_linalg";

/// Relative tolerance for unit columns on user input.
pub const INPUT_UNIT_TOL: f64 = 1e-9;
/// Relative tolerance for unit columns after internal normalization.
pub const INTERNAL_UNIT_TOL: f64 = 1e-12;

/// An m×n matrix with unit-norm columns, with μ(A) and ‖A‖ cached.
#[derive(Clone, Debug)]
pub struct Dictionary {
    entries: DMatrix<f64>,
    mu: f64,
    op_norm: f64,
}

impl Dictionary {
    /// Validates unit columns (relative 1e-9), then renormalizes exactly.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_unit_columns(&entries, INPUT_UNIT_TOL)?;
        Self::normalized(entries)
    }

    /// Scales every column to unit length. Fails on a zero column.
    pub fn normalized(mut entries: DMatrix<f64>) -> Result<Self> {
        if entries.ncols() == 0 || entries.nrows() == 0 {
            return Err(Error::validation(MODULE, "dictionary must be nonempty"));
        }
        for (i, mut col) in entries.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::validation(MODULE, format!("column {i} has zero or non-finite norm")));
            }
            col /= norm;
        }
        let mu = coherence_unchecked(&entries);
        let op_norm = spectral_norm(&entries);
        Ok(Dictionary { entries, mu, op_norm })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// A*A.
    pub fn gram(&self) -> DMatrix<f64> {
        self.entries.tr_mul(&self.entries)
    }

    /// Columns listed in `idx`, in order.
    pub fn select_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(idx)
    }

    /// A·Π·Σ where column i of the result is `signs[i]·A[:, perm[i]]`.
    pub fn signed_permute(&self, perm: &[usize], signs: &[f64]) -> Result<Dictionary> {
        let n = self.n();
        if perm.len() != n || signs.len() != n {
            return Err(Error::validation(MODULE, "signed permutation has wrong length"));
        }
        let mut out = DMatrix::zeros(self.m(), n);
        for i in 0..n {
            out.set_column(i, &(self.entries.column(perm[i]) * signs[i]));
        }
        Dictionary::normalized(out)
    }
}

fn check_unit_columns(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (i, col) in a.column_iter().enumerate() {
        let norm = col.norm();
        if !((norm - 1.0).abs() <= tol) {
            return Err(Error::validation(
                MODULE,
                format!("column {i} has norm {norm:.17e}, expected unit norm"),
            ));
        }
    }
    Ok(())
}

fn coherence_unchecked(a: &DMatrix<f64>) -> f64 {
    let g = a.tr_mul(a);
    let n = g.nrows();
    let mut mu: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            mu = mu.max(g[(i, j)].abs());
        }
    }
    mu
}

/// Eigendecomposition of a symmetric matrix. nalgebra's routine returns
/// NaN or a collapsed spectrum when the input has all-zero rows, so those
/// rows are split off first (each is an eigenvector with eigenvalue 0).
/// The result is checked against the trace and ‖M‖_F, with cyclic Jacobi
/// as the fallback if the check fails.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let n = m.nrows();
    let keep: Vec<usize> = (0..n).filter(|&i| m.row(i).iter().any(|v| *v != 0.0)).collect();
    if keep.len() == n {
        return checked_eigen(m);
    }
    if keep.is_empty() {
        return SymmetricEigen { eigenvectors: DMatrix::identity(n, n), eigenvalues: DVector::zeros(n) };
    }
    let inner = checked_eigen(&m.select_rows(&keep).select_columns(&keep));
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &v) in inner.eigenvalues.iter().enumerate() {
        values[c] = v;
        for (r, &i) in keep.iter().enumerate() {
            vectors[(i, c)] = inner.eigenvectors[(r, c)];
        }
    }
    let zero_rows = (0..n).filter(|i| !keep.contains(i));
    for (c, i) in (keep.len()..n).zip(zero_rows) {
        vectors[(i, c)] = 1.0;
    }
    SymmetricEigen { eigenvectors: vectors, eigenvalues: values }
}

fn checked_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let fro = m.norm();
    let trace = m.trace();
    let ok = |e: &SymmetricEigen<f64, Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite())
            && (e.eigenvalues.norm() - fro).abs() + (e.eigenvalues.sum() - trace).abs()
                <= 1e-10 * fro.max(f64::MIN_POSITIVE)
    };
    if let Some(e) = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).filter(|e| ok(e)) {
        return e;
    }
    jacobi_eigen(m)
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen { eigenvalues: a.diagonal(), eigenvectors: v }
}

/// Largest singular value, from the smaller of the two Gram matrices.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let g = if a.nrows() <= a.ncols() { a * a.transpose() } else { a.tr_mul(a) };
    let eig = sym_eigen(&g);
    eig.eigenvalues.max().max(0.0).sqrt()
}

/// max_{i≠j} |⟨Aᵢ, Aⱼ⟩|; zero for a single column.
pub fn mutual_coherence(a: &DMatrix<f64>) -> Result<f64> {
    check_unit_columns(a, INPUT_UNIT_TOL)?;
    Ok(coherence_unchecked(a))
}

fn check_same_shape(a: &Dictionary, m: &DMatrix<f64>) -> Result<()> {
    if m.shape() != a.entries.shape() {
        return Err(Error::validation(
            MODULE,
            format!("shape mismatch: expected {:?}, got {:?}", a.entries.shape(), m.shape()),
        ));
    }
    Ok(())
}

/// Φ[M]: column i becomes (I − AᵢAᵢ*)Mᵢ.
pub fn phi_project(a: &Dictionary, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_same_shape(a, m)?;
    let mut out = m.clone();
    phi_in_place(a.entries(), &mut out);
    Ok(out)
}

pub(crate) fn phi_in_place(a: &DMatrix<f64>, m: &mut DMatrix<f64>) {
    for i in 0..a.ncols() {
        let ai = a.column(i);
        let c = ai.dot(&m.column(i));
        m.column_mut(i).axpy(-c, &ai, 1.0);
    }
}

/// C_A[z] = A·diag(z).
pub fn c_a_apply(a: &Dictionary, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    if z.len() != a.n() {
        return Err(Error::validation(MODULE, format!("expected length {}, got {}", a.n(), z.len())));
    }
    let mut out = a.entries.clone();
    for (i, mut col) in out.column_iter_mut().enumerate() {
        col *= z[i];
    }
    Ok(out)
}

/// C_A*[U]ᵢ = ⟨Aᵢ, Uᵢ⟩.
pub fn c_a_adjoint(a: &Dictionary, u: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_same_shape(a, u)?;
    Ok(c_a_adjoint_unchecked(a.entries(), u))
}

pub(crate) fn c_a_adjoint_unchecked(a: &DMatrix<f64>, u: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.ncols(), (0..a.ncols()).map(|i| a.column(i).dot(&u.column(i))))
}

/// Spectral quantities of A_L*A_L and the coherence bounds they obey.
#[derive(Clone, Debug, Serialize)]
pub struct GramSubmatrixReport {
    pub subset: Vec<usize>,
    /// ‖A_L‖².
    pub smax_sq: f64,
    /// λ_min(A_L*A_L).
    pub smin: f64,
    /// ‖(A_L*A_L)⁻¹‖.
    pub inv_norm: f64,
    /// ‖(A_L*A_L)⁻¹ − I‖_F.
    pub neumann_dev: f64,
    pub k_mu: f64,
    pub smax_bound_ok: bool,
    pub smin_bound_ok: bool,
    /// `None` unless kμ < 1/2, where the inverse bounds apply.
    pub inv_bound_ok: Option<bool>,
    pub neumann_bound_ok: Option<bool>,
}

impl GramSubmatrixReport {
    pub fn all_ok(&self) -> bool {
        self.smax_bound_ok
            && self.smin_bound_ok
            && self.inv_bound_ok.unwrap_or(true)
            && self.neumann_bound_ok.unwrap_or(true)
    }
}

pub fn gram_submatrix_report(a: &Dictionary, subset: &[usize]) -> Result<GramSubmatrixReport> {
    if subset.is_empty() {
        return Err(Error::validation(MODULE, "subset must be nonempty"));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= a.n()) {
        return Err(Error::validation(MODULE, format!("index {bad} out of range for n = {}", a.n())));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() {
        return Err(Error::validation(MODULE, "subset has repeated indices"));
    }
    let al = a.select_columns(subset);
    let g = al.tr_mul(&al);
    let eig = sym_eigen(&g);
    let (smin, smax) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if smin <= SINGULAR_RTOL * smax.max(1.0) {
        return Err(Error::singular(MODULE, format!("A_L*A_L for L = {subset:?}")));
    }
    let k = subset.len() as f64;
    let k_mu = k * a.mu();
    let neumann_dev = eig
        .eigenvalues
        .iter()
        .map(|&l| (1.0 / l - 1.0).powi(2))
        .sum::<f64>()
        .sqrt();
    let inv_norm = 1.0 / smin;
    let slack = 1e-12;
    Ok(GramSubmatrixReport {
        subset: subset.to_vec(),
        smax_sq: smax,
        smin,
        inv_norm,
        neumann_dev,
        k_mu,
        smax_bound_ok: smax <= 1.0 + k_mu + slack,
        smin_bound_ok: smin >= 1.0 - k_mu - slack,
        inv_bound_ok: (k_mu < 0.5).then(|| inv_norm <= 2.0 + slack),
        neumann_bound_ok: (k_mu < 0.5).then(|| neumann_dev < 2.0 * k_mu + slack),
    })
}

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Inverse of a symmetric positive definite matrix through its
/// eigendecomposition; `None` if the matrix is numerically singular.
pub fn sym_inverse(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = sym_eigen(g);
    let lmax = eig.eigenvalues.amax();
    if eig.eigenvalues.min() <= SINGULAR_RTOL * lmax.max(f64::MIN_POSITIVE) {
        return None;
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / l);
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose())
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix, dropping
/// eigenvalues below `rtol·λ_max`.
pub fn sym_pinv(g: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let eig = sym_eigen(g);
    let cut = rtol * eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Entrywise ℓ¹ norm.
pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Frobenius inner product.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
