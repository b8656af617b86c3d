//! Dense two-phase tableau simplex for min cᵀx, Ax = b, x ≥ 0. The pivot
//! sequence is a fixed function of the input. Meant for problems with at
//! most a few thousand tableau rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MODULE: &str = "lp";
const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 64;
/// Primal feasibility slack of the Harris ratio test.
const FEAS_EPS: f64 = 1e-9;
/// Refuses tableaux with more entries than this.
pub const MAX_TABLEAU: usize = 8_000_000;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    width: usize,
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs, then the negated objective in the last slot.
    cost: Vec<f64>,
    /// Cost vector of the current phase over all columns.
    phase_cost: Vec<f64>,
    /// The initial tableau [A I b], for refactorization.
    origin: DMatrix<f64>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = 1.0 / self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
        if self.pivots % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Recomputes B⁻¹[A I b] and the reduced costs from the original data,
    /// discarding accumulated rounding. Keeps the current tableau if the
    /// basis matrix is numerically singular.
    fn refactor(&mut self) {
        let b = self.origin.select_columns(&self.basis);
        let Some(t) = b.lu().solve(&self.origin) else { return };
        if !t.iter().all(|v| v.is_finite()) {
            return;
        }
        for (i, row) in self.rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = t[(i, j)];
            }
            row[self.basis[i]] = 1.0;
        }
        self.reprice();
    }

    /// Reduced costs of `phase_cost` for the current basis.
    fn reprice(&mut self) {
        let mut cost = self.phase_cost.clone();
        cost.push(0.0);
        for (row, &bi) in self.rows.iter().zip(&self.basis) {
            let cb = self.phase_cost[bi];
            if cb != 0.0 {
                for (v, p) in cost.iter_mut().zip(row) {
                    *v -= cb * p;
                }
            }
        }
        for &bi in &self.basis {
            cost[bi] = 0.0;
        }
        self.cost = cost;
    }

    /// Dantzig pricing over columns `0..allowed`, switching to Bland's rule
    /// during long runs of degenerate pivots so the method cannot cycle.
    /// The ratio test is Harris's two-pass rule.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let rhs = self.width - 1;
        let mut degenerate = 0usize;
        loop {
            let enter = if degenerate < DEGENERATE_RUN {
                let (j, c) = self.cost[..allowed]
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |best, (j, &c)| if c < best.1 { (j, c) } else { best });
                (c < -COST_EPS).then_some(j)
            } else {
                (0..allowed).find(|&j| self.cost[j] < -COST_EPS)
            };
            let Some(enter) = enter else {
                return Ok(());
            };
            let mut bound = f64::INFINITY;
            for row in &self.rows {
                let a = row[enter];
                if a > PIVOT_EPS {
                    bound = bound.min((row[rhs].max(0.0) + FEAS_EPS) / a);
                }
            }
            if !bound.is_finite() {
                return Err(Error::Infeasible { module: MODULE, what: "objective unbounded below".into() });
            }
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_EPS && row[rhs].max(0.0) / a <= bound {
                    let better = match leave {
                        None => true,
                        Some((li, la)) => a > la || (a == la && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, a));
                    }
                }
            }
            let (r, _) = leave.expect("the bound is attained by some row");
            if self.pivots >= MAX_PIVOTS {
                return Err(Error::conditioning(MODULE, "simplex pivot limit reached"));
            }
            degenerate = if self.rows[r][rhs] <= FEAS_EPS { degenerate + 1 } else { 0 };
            self.pivot(r, enter);
        }
    }
}

/// Solves min cᵀx subject to Ax = b, x ≥ 0.
pub fn solve_standard(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpSolution> {
    let (m, nv) = a.shape();
    if b.len() != m || c.len() != nv {
        return Err(Error::validation(MODULE, "constraint and cost dimensions disagree"));
    }
    let width = nv + m + 1;
    if (m + 1) * width > MAX_TABLEAU {
        return Err(Error::validation(
            MODULE,
            format!("tableau of {} × {} exceeds the dense limit", m + 1, width),
        ));
    }
    let mut origin = DMatrix::zeros(m, width);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            origin[(i, j)] = sign * a[(i, j)];
        }
        origin[(i, nv + i)] = 1.0;
        origin[(i, width - 1)] = sign * b[i];
    }
    let rows = (0..m).map(|i| origin.row(i).iter().copied().collect()).collect();
    let mut phase_cost = vec![0.0; nv + m];
    phase_cost[nv..].fill(1.0);
    let mut t = Tableau { width, rows, basis: (nv..nv + m).collect(), cost: Vec::new(), phase_cost, origin, pivots: 0 };
    t.reprice();

    t.run(nv)?;
    t.refactor();
    let bscale = 1.0 + b.amax();
    if -t.cost[width - 1] > 1e-9 * bscale {
        return Err(Error::Infeasible { module: MODULE, what: "no feasible point".into() });
    }

    // Drive artificials out of the basis. Rows where that fails are
    // redundant; their artificials stay basic at zero and never re-enter.
    for r in 0..t.rows.len() {
        if t.basis[r] >= nv {
            let best = (0..nv).filter(|j| !t.basis.contains(j)).max_by(|&i, &j| t.rows[r][i].abs().total_cmp(&t.rows[r][j].abs()));
            if let Some(c) = best.filter(|&c| t.rows[r][c].abs() > 1e-7) {
                t.pivot(r, c);
            }
        }
    }

    t.phase_cost = c.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();
    t.refactor();
    t.reprice();
    t.run(nv)?;
    t.refactor();

    let x = refine(a, b, &t.basis, &t.rows, nv);
    let objective = c.dot(&x);
    Ok(LpSolution { x, objective, pivots: t.pivots })
}

/// Recomputes the basic variables from the original data, which removes
/// the rounding accumulated in the tableau.
fn refine(a: &DMatrix<f64>, b: &DVector<f64>, basis: &[usize], rows: &[Vec<f64>], nv: usize) -> DVector<f64> {
    let rhs = rows.first().map_or(0, |r| r.len() - 1);
    let mut x = DVector::zeros(nv);
    for (row, &bi) in rows.iter().zip(basis) {
        if bi < nv {
            x[bi] = row[rhs].max(0.0);
        }
    }
    let cols: Vec<usize> = basis.iter().copied().filter(|&j| j < nv).collect();
    if cols.is_empty() {
        return x;
    }
    let ab = a.select_columns(&cols);
    if let Some(xb) = ab.clone().svd(true, true).solve(b, 1e-12).ok() {
        let fitted = DVector::from_iterator(nv, (0..nv).map(|j| cols.iter().position(|&c| c == j).map_or(0.0, |t| xb[t])));
        let res_old = (a * &x - b).norm();
        let res_new = (a * &fitted - b).norm();
        if fitted.iter().all(|&v| v >= -1e-12) && res_new <= res_old {
            return fitted.map(|v| v.max(0.0));
        }
    }
    x
}

/// min ‖x‖₁ subject to Ax = y.
pub fn basis_pursuit(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    let mut split = DMatrix::zeros(m, 2 * n);
    split.view_mut((0, 0), (m, n)).copy_from(a);
    split.view_mut((0, n), (m, n)).copy_from(&(-a));
    let sol = solve_standard(&split, y, &DVector::from_element(2 * n, 1.0))?;
    Ok(DVector::from_fn(n, |i, _| sol.x[i] - sol.x[n + i]))
}
