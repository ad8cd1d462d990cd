//! Dense two-phase primal simplex for `maximize c.x s.t. A x <= b, x >= 0`,
//! optionally with equality rows.
//!
//! Pricing is Dantzig's rule, switching to Bland's smallest-index rule
//! whenever a run of degenerate pivots builds up, so the method cannot
//! cycle. The ratio test is a two-pass (Harris) test preferring large
//! pivots. The final basic solution is re-solved from the original data.
//! Meant for small dense instances; no factorization updates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};
use crate::problem::ConstraintSystem;

/// Feasibility tolerance for reported solutions.
pub const FEAS_TOL: f64 = 1e-9;
/// Pivot and degeneracy tolerance.
pub const PIVOT_TOL: f64 = 1e-10;

/// Smallest admissible pivot element. Entries below this are round-off.
const MIN_PIVOT: f64 = 1e-9;
/// Tableau entries below this after an update are flushed to zero.
const FLUSH: f64 = 1e-14;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Inequality rows that are tight at the final basis.
    pub basis: Vec<usize>,
}

impl Solution {
    fn without_point(status: Status) -> Self {
        Self {
            status,
            x: None,
            objective: None,
            basis: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Maximizes `c.x` over `{x >= 0 : A x <= b}` for the coefficient matrix of
/// `sys`.
pub fn solve_lp(c: &[f64], sys: &ConstraintSystem) -> Solution {
    solve(c, sys.a(), sys.b())
}

/// Returns some point of `{x >= 0 : A x <= b}`, or `None` when it is empty.
pub fn phase1_feasible(sys: &ConstraintSystem) -> Option<Vec<f64>> {
    let zeros = vec![0.0; sys.ncols()];
    solve(&zeros, sys.a(), sys.b()).x
}

pub fn solve(c: &[f64], a: &Matrix, b: &[f64]) -> Solution {
    solve_with_equalities(c, a, b, &Matrix::zeros(0, a.ncols()), &[])
}

/// Maximizes `c.x` subject to `a_ub x <= b_ub`, `a_eq x = b_eq`, `x >= 0`.
pub fn solve_with_equalities(
    c: &[f64],
    a_ub: &Matrix,
    b_ub: &[f64],
    a_eq: &Matrix,
    b_eq: &[f64],
) -> Solution {
    let n = c.len();
    assert_eq!(a_ub.ncols(), n, "objective length must match column count");
    assert_eq!(a_eq.ncols(), n, "objective length must match column count");
    assert_eq!(b_ub.len(), a_ub.nrows(), "rhs length must match row count");
    assert_eq!(b_eq.len(), a_eq.nrows(), "rhs length must match row count");

    let mut tab = Tableau::new(a_ub, b_ub, a_eq, b_eq);
    match tab.phase_one() {
        Phase::Optimal => {}
        Phase::Limit => return Solution::without_point(Status::IterationLimit),
        Phase::Unbounded => return Solution::without_point(Status::Infeasible),
    }
    match tab.phase_two(c) {
        Phase::Optimal => {}
        Phase::Unbounded => return Solution::without_point(Status::Unbounded),
        Phase::Limit => return Solution::without_point(Status::IterationLimit),
    }
    let x = tab.primal();
    let objective = dot(c, &x);
    Solution {
        status: Status::Optimal,
        x: Some(x),
        objective: Some(objective),
        basis: tab.tight_rows(),
    }
}

enum Phase {
    Optimal,
    /// In phase one this means the region is empty.
    Unbounded,
    Limit,
}

/// Columns: `n` structural, one slack per inequality row, then one
/// artificial per row that starts without a feasible slack (negative
/// right-hand side or equality). The last entry of each row is the rhs.
struct Tableau {
    n: usize,
    m_ub: usize,
    n_art: usize,
    width: usize,
    rows: Vec<Vec<f64>>,
    /// Sign-normalized initial rows, for the final re-solve.
    original: Vec<Vec<f64>>,
    /// Original row index of each current tableau row.
    row_ids: Vec<usize>,
    basis: Vec<usize>,
    obj: Vec<f64>,
    max_iter: usize,
}

impl Tableau {
    fn new(a_ub: &Matrix, b_ub: &[f64], a_eq: &Matrix, b_eq: &[f64]) -> Self {
        let n = a_ub.ncols();
        let m_ub = a_ub.nrows();
        let m = m_ub + a_eq.nrows();
        let n_art = b_ub.iter().filter(|&&v| v < 0.0).count() + a_eq.nrows();
        let width = n + m_ub + n_art + 1;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = n + m_ub;
        let sources = a_ub
            .row_iter()
            .zip(b_ub)
            .map(|(r, &b)| (r, b, true))
            .chain(a_eq.row_iter().zip(b_eq).map(|(r, &b)| (r, b, false)));
        for (i, (coefs, rhs, inequality)) in sources.enumerate() {
            let mut row = vec![0.0; width];
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, &v) in coefs.iter().enumerate() {
                row[j] = sign * v;
            }
            row[width - 1] = sign * rhs;
            if inequality {
                row[n + i] = sign;
            }
            if inequality && rhs >= 0.0 {
                basis.push(n + i);
            } else {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            rows.push(row);
        }
        let size = m + n + n_art;
        Self {
            n,
            m_ub,
            n_art,
            width,
            original: rows.clone(),
            rows,
            row_ids: (0..m).collect(),
            basis,
            obj: vec![0.0; width],
            max_iter: 50 * size * size + 10_000,
        }
    }

    fn rhs(&self) -> usize {
        self.width - 1
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m_ub && j < self.width - 1
    }

    /// Loads the reduced-cost row for `cost` (indexed by column) and prices
    /// out the current basis.
    fn load_objective(&mut self, cost: &[f64]) {
        self.obj = vec![0.0; self.width];
        self.obj[..cost.len()].copy_from_slice(cost);
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = self.obj[bj];
            if cb != 0.0 {
                for (o, r) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *o -= cb * r;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][e] = 1.0;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let eliminate = |row: &mut Vec<f64>| {
            let f = row[e];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                    if v.abs() < FLUSH {
                        *v = 0.0;
                    }
                }
                row[e] = 0.0;
            }
        };
        for row in self.rows.iter_mut() {
            if !row.is_empty() {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = pivot_row;
        self.basis[r] = e;
    }

    /// Two-pass ratio test for entering column `e`. Returns the leaving row
    /// and whether the step is degenerate.
    fn leaving_row(&self, e: usize, bland: bool) -> Option<(usize, bool)> {
        let rhs = self.rhs();
        let mut theta_max = f64::INFINITY;
        for row in &self.rows {
            if row[e] > MIN_PIVOT {
                theta_max = theta_max.min((row[rhs].max(0.0) + FEAS_TOL) / row[e]);
            }
        }
        if theta_max.is_infinite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let coef = row[e];
            if coef <= MIN_PIVOT || row[rhs].max(0.0) / coef > theta_max {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let take = if bland {
                        self.basis[i] < self.basis[b]
                    } else {
                        coef > self.rows[b][e]
                            || (coef == self.rows[b][e] && self.basis[i] < self.basis[b])
                    };
                    Some(if take { i } else { b })
                }
            };
        }
        best.map(|r| {
            let step = self.rows[r][rhs].max(0.0) / self.rows[r][e];
            (r, step <= PIVOT_TOL)
        })
    }

    fn iterate(&mut self) -> Phase {
        let rhs = self.rhs();
        let mut degenerate_run = 0;
        for _ in 0..self.max_iter {
            let bland = degenerate_run >= DEGENERATE_RUN;
            let candidates =
                (0..rhs).filter(|&j| !self.is_artificial(j) && self.obj[j] > PIVOT_TOL);
            let entering = if bland {
                candidates.min()
            } else {
                candidates.fold(None, |best: Option<usize>, j| match best {
                    Some(b) if self.obj[b] >= self.obj[j] => Some(b),
                    _ => Some(j),
                })
            };
            let Some(e) = entering else {
                return Phase::Optimal;
            };
            let Some((r, degenerate)) = self.leaving_row(e, bland) else {
                return Phase::Unbounded;
            };
            self.pivot(r, e);
            degenerate_run = if degenerate { degenerate_run + 1 } else { 0 };
        }
        Phase::Limit
    }

    /// Minimizes the sum of artificials, then removes them from the basis.
    fn phase_one(&mut self) -> Phase {
        if self.n_art == 0 {
            return Phase::Optimal;
        }
        let mut cost = vec![0.0; self.width - 1];
        for c in cost.iter_mut().skip(self.n + self.m_ub) {
            *c = -1.0;
        }
        self.load_objective(&cost);
        let rhs = self.rhs();
        let rhs_scale = self.rows.iter().map(|r| r[rhs].abs()).fold(1.0, f64::max);
        if let Phase::Limit = self.iterate() {
            return Phase::Limit;
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.rows)
            .filter(|(&bj, _)| self.is_artificial(bj))
            .map(|(_, row)| row[rhs])
            .sum();
        if infeasibility > FEAS_TOL * rhs_scale {
            return Phase::Unbounded;
        }
        // Pivot zero-level artificials out; rows where no other column can
        // take their place are redundant.
        let mut i = 0;
        while i < self.rows.len() {
            if self.is_artificial(self.basis[i]) {
                let col = (0..self.n + self.m_ub)
                    .filter(|&j| self.rows[i][j].abs() > MIN_PIVOT)
                    .fold(None, |best: Option<usize>, j| match best {
                        Some(b) if self.rows[i][b].abs() >= self.rows[i][j].abs() => Some(b),
                        _ => Some(j),
                    });
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        self.row_ids.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        Phase::Optimal
    }

    fn phase_two(&mut self, c: &[f64]) -> Phase {
        self.load_objective(c);
        self.iterate()
    }

    /// Basic solution re-solved from the original rows, falling back to the
    /// tableau values if the basis matrix is numerically singular.
    fn primal(&self) -> Vec<f64> {
        let rhs = self.rhs();
        let k = self.basis.len();
        let lhs = DMatrix::from_fn(k, k, |r, c| self.original[self.row_ids[r]][self.basis[c]]);
        let b = DVector::from_fn(k, |r, _| self.original[self.row_ids[r]][rhs]);
        let refined = lhs.lu().solve(&b).filter(|v| {
            v.iter()
                .zip(&self.rows)
                .all(|(x, row)| (x - row[rhs]).abs() <= 1e-6 * (1.0 + row[rhs].abs()))
        });
        let mut x = vec![0.0; self.n];
        for (r, &bj) in self.basis.iter().enumerate() {
            if bj < self.n {
                let v = refined.as_ref().map_or(self.rows[r][rhs], |s| s[r]);
                x[bj] = v.max(0.0);
            }
        }
        x
    }

    fn tight_rows(&self) -> Vec<usize> {
        (0..self.m_ub)
            .filter(|&i| !self.basis.contains(&(self.n + i)))
            .collect()
    }
}

/// Outcome of the max-norm search over `{x >= 0 : A x <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub enum MaxNorm {
    Bounded { x: Vec<f64>, norm: f64 },
    Unbounded,
}

impl MaxNorm {
    pub fn norm(&self) -> f64 {
        match self {
            MaxNorm::Bounded { norm, .. } => *norm,
            MaxNorm::Unbounded => f64::INFINITY,
        }
    }
}

/// Upper limit on the number of candidate bases enumerated by
/// [`max_norm_point`].
pub const MAX_VERTEX_CANDIDATES: u128 = 5_000_000;

/// A point of maximum Euclidean norm in `{x >= 0 : A x <= b}`.
///
/// The norm is convex, so over a bounded polyhedron the maximum sits at a
/// vertex; all bases of the `m + n` inequalities are enumerated. Equal norms
/// resolve to the lexicographically smallest vertex.
pub fn max_norm_point(sys: &ConstraintSystem) -> Result<MaxNorm> {
    let (m, n) = (sys.nrows(), sys.ncols());
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        match solve_lp(&e, sys).status {
            Status::Optimal => {}
            Status::Unbounded => return Ok(MaxNorm::Unbounded),
            Status::Infeasible => return Err(Error::Infeasible),
            Status::IterationLimit => return Err(Error::IterationLimit),
        }
    }
    if n == 0 {
        return Ok(MaxNorm::Bounded {
            x: Vec::new(),
            norm: 0.0,
        });
    }
    let count = binomial(m + n, n);
    if count > MAX_VERTEX_CANDIDATES {
        return Err(Error::VertexEnumerationTooLarge { count });
    }

    let a = sys.a();
    let b = sys.b();
    let b_scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for subset in Combinations::new(m + n, n) {
        let mut lhs = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (r, &k) in subset.iter().enumerate() {
            if k < m {
                for j in 0..n {
                    lhs[(r, j)] = a[(k, j)];
                }
                rhs[r] = b[k];
            } else {
                lhs[(r, k - m)] = 1.0;
            }
        }
        let Some(sol) = lhs.clone().lu().solve(&rhs) else {
            continue;
        };
        if !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let residual = (&lhs * &sol - &rhs).norm();
        if residual > 1e-9 * b_scale * (1.0 + sol.norm()) {
            continue;
        }
        let x: Vec<f64> = sol
            .iter()
            .map(|&v| if v < 0.0 && v > -FEAS_TOL { 0.0 } else { v })
            .collect();
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let feasible = a
            .row_iter()
            .zip(b)
            .all(|(row, &bi)| dot(row, &x) <= bi + FEAS_TOL * (1.0 + bi.abs()));
        if !feasible {
            continue;
        }
        let norm = norm2(&x);
        let better = match &best {
            None => true,
            Some((bx, bn)) => {
                let tol = 1e-12 * (1.0 + bn);
                norm > bn + tol || (norm >= bn - tol && lex_less(&x, bx))
            }
        };
        if better {
            best = Some((x, norm));
        }
    }
    let (x, norm) = best.ok_or(Error::Infeasible)?;
    Ok(MaxNorm::Bounded { x, norm })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return x < y;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
