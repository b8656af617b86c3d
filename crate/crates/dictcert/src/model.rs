//! The random model: dictionaries, uniform k-subset supports with Gaussian
//! values, observations, and the support-regularity test.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dictionary;
use crate::rng;

const MODULE: &str = "model";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    GaussianUnit,
    Orthonormal,
}

impl std::str::FromStr for DictKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_unit" => Ok(DictKind::GaussianUnit),
            "orthonormal" => Ok(DictKind::Orthonormal),
            other => Err(Error::validation(MODULE, format!("unknown dictionary kind '{other}'"))),
        }
    }
}

pub fn gen_dictionary(m: usize, n: usize, kind: DictKind, seed: u64) -> Result<Dictionary> {
    if m == 0 || n == 0 {
        return Err(Error::validation(MODULE, "m and n must be positive"));
    }
    let mut r = rng::stream(seed);
    match kind {
        DictKind::GaussianUnit => {
            if m > n {
                return Err(Error::validation(MODULE, format!("gaussian_unit requires m ≤ n (m = {m}, n = {n})")));
            }
            let g = DMatrix::from_fn(m, n, |_, _| r.sample::<f64, _>(StandardNormal));
            Dictionary::normalized(g)
        }
        DictKind::Orthonormal => {
            if m != n {
                return Err(Error::validation(MODULE, format!("orthonormal requires m = n (m = {m}, n = {n})")));
            }
            let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
            Dictionary::normalized(g.qr().q())
        }
    }
}

/// Draws dictionaries from consecutive child seeds until kμ(A) < `bound`.
/// Returns the dictionary and the number of rejected draws.
pub fn gen_dictionary_coherent_below(
    m: usize,
    n: usize,
    kind: DictKind,
    k: usize,
    bound: f64,
    seed: u64,
    max_draws: usize,
) -> Result<(Dictionary, usize)> {
    for attempt in 0..max_draws {
        let a = gen_dictionary(m, n, kind, rng::derive(seed, attempt as u64))?;
        if (k as f64) * a.mu() < bound {
            return Ok((a, attempt));
        }
    }
    Err(Error::validation(
        MODULE,
        format!("no {kind:?} {m}×{n} dictionary with kμ < {bound} in {max_draws} draws"),
    ))
}

/// Ω as column supports Ωⱼ and the transposed row supports Ωⁱ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportPattern {
    n: usize,
    p: usize,
    k: usize,
    col_supports: Vec<Vec<usize>>,
    row_supports: Vec<Vec<usize>>,
}

impl SupportPattern {
    /// Each column support must be a sorted-or-not set of exactly k distinct
    /// indices below n; it is stored sorted.
    pub fn from_columns(n: usize, k: usize, mut cols: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::validation(MODULE, format!("need 1 ≤ k ≤ n (k = {k}, n = {n})")));
        }
        for (j, c) in cols.iter_mut().enumerate() {
            c.sort_unstable();
            c.dedup();
            if c.len() != k || c.iter().any(|&i| i >= n) {
                return Err(Error::validation(
                    MODULE,
                    format!("column {j} support must hold {k} distinct indices below {n}"),
                ));
            }
        }
        let mut rows = vec![Vec::new(); n];
        for (j, c) in cols.iter().enumerate() {
            for &i in c {
                rows[i].push(j);
            }
        }
        Ok(SupportPattern { n, p: cols.len(), k, col_supports: cols, row_supports: rows })
    }

    /// Support of a dense matrix whose columns each hold exactly k nonzeros.
    pub fn from_matrix(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let cols = (0..x.ncols())
            .map(|j| (0..x.nrows()).filter(|&i| x[(i, j)] != 0.0).collect())
            .collect();
        Self::from_columns(x.nrows(), k, cols)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn k(&self) -> usize {
        self.k
    }
    /// Ωⱼ.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.col_supports[j]
    }
    /// Ωⁱ.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.row_supports[i]
    }
    pub fn cols(&self) -> &[Vec<usize>] {
        &self.col_supports
    }
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.row_supports
    }

    /// Boolean mask of Ω.
    pub fn mask(&self) -> DMatrix<bool> {
        let mut m = DMatrix::from_element(self.n, self.p, false);
        for (j, c) in self.col_supports.iter().enumerate() {
            for &i in c {
                m[(i, j)] = true;
            }
        }
        m
    }

    /// Coordinates of S_Ω in vec order (column-major): (row, column) pairs.
    pub fn coords(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.k * self.p);
        for (j, c) in self.col_supports.iter().enumerate() {
            out.extend(c.iter().map(|&i| (i, j)));
        }
        out
    }
}

/// X = 𝒫_Ω[V] together with its support and σ.
#[derive(Clone, Debug)]
pub struct SparseCoeffs {
    support: SupportPattern,
    x: DMatrix<f64>,
    sigma: f64,
}

impl SparseCoeffs {
    /// `values` is masked to the support; entries off Ω are dropped.
    pub fn from_parts(support: SupportPattern, values: &DMatrix<f64>) -> Result<Self> {
        if values.shape() != (support.n, support.p) {
            return Err(Error::validation(MODULE, "coefficient values have the wrong shape"));
        }
        let mask = support.mask();
        let x = DMatrix::from_fn(support.n, support.p, |i, j| if mask[(i, j)] { values[(i, j)] } else { 0.0 });
        let sigma = model_sigma(support.n, support.p, support.k);
        Ok(SparseCoeffs { support, x, sigma })
    }

    /// Support read off the nonzeros of `x`, which must be k per column.
    pub fn from_dense(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let support = SupportPattern::from_matrix(x, k)?;
        Self::from_parts(support, x)
    }

    pub fn support(&self) -> &SupportPattern {
        &self.support
    }
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn n(&self) -> usize {
        self.support.n
    }
    pub fn p(&self) -> usize {
        self.support.p
    }
    pub fn k(&self) -> usize {
        self.support.k
    }

    /// Σ = sign(X) on Ω, zero elsewhere.
    pub fn signs(&self) -> DMatrix<f64> {
        self.x.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 })
    }

    /// Values of column j on Ωⱼ, in support order.
    pub fn col_values(&self, j: usize) -> Vec<f64> {
        self.support.col(j).iter().map(|&i| self.x[(i, j)]).collect()
    }
}

/// σ = √(n/kp).
pub fn model_sigma(n: usize, p: usize, k: usize) -> f64 {
    (n as f64 / (k as f64 * p as f64)).sqrt()
}

/// Uniform k-subset of [n] by partial Fisher–Yates, returned sorted.
pub fn uniform_subset<R: Rng>(r: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for t in 0..k {
        let s = r.gen_range(t..n);
        idx.swap(t, s);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

/// Draws Ω and V. Column j uses substream j of `seed`.
pub fn gen_coefficients(n: usize, p: usize, k: usize, seed: u64) -> Result<SparseCoeffs> {
    if k == 0 || k > n {
        return Err(Error::validation(MODULE, format!("need 1 ≤ k ≤ n (k = {k}, n = {n})")));
    }
    if p == 0 {
        return Err(Error::validation(MODULE, "need p ≥ 1"));
    }
    let sigma = model_sigma(n, p, k);
    let mut cols = Vec::with_capacity(p);
    let mut x = DMatrix::zeros(n, p);
    for j in 0..p {
        let mut r = rng::substream(seed, j as u64);
        let omega = uniform_subset(&mut r, n, k);
        for &i in &omega {
            let mut v = 0.0;
            while v == 0.0 {
                v = sigma * r.sample::<f64, _>(StandardNormal);
            }
            x[(i, j)] = v;
        }
        cols.push(omega);
    }
    let support = SupportPattern::from_columns(n, k, cols)?;
    Ok(SparseCoeffs { support, x, sigma })
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub dict: Dictionary,
    pub coeffs: SparseCoeffs,
    pub obs: DMatrix<f64>,
}

pub fn observe(a: &Dictionary, x: &SparseCoeffs) -> Result<Instance> {
    if a.n() != x.n() {
        return Err(Error::validation(
            MODULE,
            format!("A has {} columns but X has {} rows", a.n(), x.n()),
        ));
    }
    let obs = a.entries() * x.dense();
    Ok(Instance { dict: a.clone(), coeffs: x.clone(), obs })
}

/// Dictionary, coefficients and observations from one master seed.
pub fn gen_instance(m: usize, n: usize, k: usize, p: usize, kind: DictKind, seed: u64) -> Result<Instance> {
    let a = gen_dictionary(m, n, kind, rng::derive(seed, 0))?;
    let x = gen_coefficients(n, p, k, rng::derive(seed, 1))?;
    observe(&a, &x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SupportRegularity {
    pub max_row: usize,
    pub max_pair: usize,
    pub in_o: bool,
}

/// Membership in the set of desirable supports: row sizes at most 3pk/2n
/// and pairwise row intersections at most 3pk²/2n².
pub fn is_desirable_support(s: &SupportPattern) -> SupportRegularity {
    let (n, p, k) = (s.n as f64, s.p as f64, s.k as f64);
    let max_row = s.row_supports.iter().map(Vec::len).max().unwrap_or(0);
    let mut pair = vec![0usize; s.n * s.n];
    for c in &s.col_supports {
        for (t, &a) in c.iter().enumerate() {
            for &b in &c[t + 1..] {
                pair[a * s.n + b] += 1;
            }
        }
    }
    let max_pair = pair.into_iter().max().unwrap_or(0);
    let row_ok = max_row as f64 <= 1.5 * p * k / n;
    // With a single row there are no pairs to constrain.
    let pair_ok = s.n < 2 || max_pair as f64 <= 1.5 * p * k * k / (n * n);
    SupportRegularity { max_row, max_pair, in_o: row_ok && pair_ok }
}
