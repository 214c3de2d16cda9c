//! Dense two-phase tableau simplex.
//!
//! Maximizes `c^T x` subject to linear rows and `x >= 0`. Pricing is
//! Dantzig's largest reduced cost; after a run of degenerate pivots the
//! solver switches to Bland's rule until the objective moves again, which
//! rules out cycling. The ratio test prefers large pivots among near-ties,
//! and the tableau is rebuilt from the original rows every few dozen pivots
//! to keep round-off from accumulating.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
/// Primal feasibility and dual optimality tolerance.
pub const FEAS_TOL: f64 = 1e-9;

const DEGENERATE_STREAK: usize = 32;
const REFACTOR_EVERY: usize = 50;
/// Within a Bland tie set, pivots smaller than this fraction of the largest
/// candidate are skipped.
const BLAND_PIVOT_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    Le,
    Ge,
    Eq,
}

impl ConstraintKind {
    fn symbol(self) -> &'static str {
        match self {
            ConstraintKind::Le => "<=",
            ConstraintKind::Ge => ">=",
            ConstraintKind::Eq => "=",
        }
    }
}

/// One sparse row `sum coeffs[i].1 * x[coeffs[i].0] (kind) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

/// A maximization LP in canonical form over nonnegative variables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a row, merging repeated variable indices and dropping zeros.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, kind: ConstraintKind, rhs: f64) {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|(j, _)| *j);
        for (j, v) in sorted {
            assert!(j < self.n_vars(), "variable {j} out of range");
            match merged.last_mut() {
                Some((k, acc)) if *k == j => *acc += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|(_, v)| *v != 0.0);
        self.constraints.push(Constraint {
            coeffs: merged,
            kind,
            rhs,
        });
    }

    /// Dense coefficient matrix, one row per constraint.
    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| {
                let mut row = vec![0.0; self.n_vars()];
                for &(j, v) in &c.coeffs {
                    row[j] = v;
                }
                row
            })
            .collect()
    }

    /// Plain-text dump: `max` and the objective coefficients, then one line
    /// per row with its coefficients, relation and right-hand side.
    pub fn to_text(&self) -> String {
        let fmt_row = |row: &[f64]| {
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("max {}\n", fmt_row(&self.objective));
        for (row, c) in self.dense_rows().iter().zip(&self.constraints) {
            writeln!(out, "{} {} {}", fmt_row(row), c.kind.symbol(), c.rhs).unwrap();
        }
        out
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let viol = match c.kind {
                ConstraintKind::Le => lhs - c.rhs,
                ConstraintKind::Ge => c.rhs - lhs,
                ConstraintKind::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Primal values of the structural variables (zeros unless optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// The tableau before any pivot.
    orig: Vec<f64>,
    /// Reduced-cost row, `cols + 1` wide; last entry is minus the objective.
    cost: Vec<f64>,
    /// Objective the cost row was priced for.
    target: Vec<f64>,
    blocked: Vec<bool>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.at(p, q);
        for v in &mut self.a[p * w..(p + 1) * w] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.a[p * w..(p + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == p {
                continue;
            }
            let f = self.a[i * w + q];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.a[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.a[i * w + q] = 0.0;
        }
        let f = self.cost[q];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[q] = 0.0;
        }
        self.basis[p] = q;
        self.pivots += 1;
    }

    /// Sets the reduced-cost row for maximizing `c` over the current basis.
    fn price(&mut self, c: &[f64]) {
        self.target = c.to_vec();
        let w = self.cols + 1;
        self.cost = vec![0.0; w];
        for (j, &cj) in c.iter().enumerate() {
            self.cost[j] = -cj;
        }
        for i in 0..self.rows {
            let cb = c.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for j in 0..w {
                self.cost[j] += cb * self.a[i * w + j];
            }
        }
    }

    /// Recomputes `B^-1 [A | b]` for the current basis from the original
    /// rows by Gaussian elimination with partial pivoting, then reprices.
    /// Leaves the tableau untouched if the basis looks singular.
    fn refactor(&mut self) -> bool {
        let m = self.rows;
        let w = self.cols + 1;
        let stride = m + w;
        let mut aug = vec![0.0; m * stride];
        for i in 0..m {
            for (k, &j) in self.basis.iter().enumerate() {
                aug[i * stride + k] = self.orig[i * w + j];
            }
            aug[i * stride + m..(i + 1) * stride].copy_from_slice(&self.orig[i * w..(i + 1) * w]);
        }
        for k in 0..m {
            let p = (k..m)
                .max_by(|&x, &y| aug[x * stride + k].abs().total_cmp(&aug[y * stride + k].abs()))
                .expect("nonempty range");
            if aug[p * stride + k].abs() < 1e-12 {
                return false;
            }
            if p != k {
                for c in 0..stride {
                    aug.swap(p * stride + c, k * stride + c);
                }
            }
            let inv = 1.0 / aug[k * stride + k];
            for v in &mut aug[k * stride..(k + 1) * stride] {
                *v *= inv;
            }
            let pivot_row: Vec<f64> = aug[k * stride + k..(k + 1) * stride].to_vec();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * stride + k];
                if f == 0.0 {
                    continue;
                }
                for (v, pv) in aug[i * stride + k..(i + 1) * stride].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        // Row k of the reduced system belongs to the k-th basic variable.
        for i in 0..m {
            self.a[i * w..(i + 1) * w].copy_from_slice(&aug[i * stride + m..(i + 1) * stride]);
            let j = self.basis[i];
            for r in 0..m {
                self.a[r * w + j] = if r == i { 1.0 } else { 0.0 };
            }
        }
        let target = std::mem::take(&mut self.target);
        self.price(&target);
        true
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut candidates = (0..self.cols).filter(|&j| !self.blocked[j] && self.cost[j] < -FEAS_TOL);
        if bland {
            candidates.next()
        } else {
            candidates.min_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]))
        }
    }

    /// Two-pass (Harris) ratio test: bound the step with slightly relaxed
    /// ratios, then take the largest pivot among rows within that bound.
    /// Under Bland's rule the lowest basic index among minimal ratios wins.
    fn leaving(&self, q: usize, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let coef = self.at(i, q);
            if coef > PIVOT_TOL {
                bound = bound.min((self.rhs(i).max(0.0) + FEAS_TOL) / coef);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let ties: Vec<usize> = (0..self.rows)
            .filter(|&i| {
                let coef = self.at(i, q);
                coef > PIVOT_TOL && self.rhs(i).max(0.0) / coef <= bound
            })
            .collect();
        let largest = ties.iter().map(|&i| self.at(i, q)).fold(0.0, f64::max);
        if bland {
            let ratio = |i: usize| self.rhs(i).max(0.0) / self.at(i, q);
            let min_ratio = ties.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
            ties.into_iter()
                .filter(|&i| self.at(i, q) >= BLAND_PIVOT_RATIO * largest && ratio(i) <= min_ratio + FEAS_TOL)
                .min_by_key(|&i| self.basis[i])
                .or_else(|| (0..self.rows).find(|&i| self.at(i, q) == largest))
        } else {
            ties.into_iter().find(|&i| self.at(i, q) == largest)
        }
    }

    fn run(&mut self, max_pivots: usize) -> Phase {
        let mut streak = 0;
        loop {
            if self.pivots >= max_pivots {
                return Phase::IterationLimit;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let Some(q) = self.entering(bland) else {
                return Phase::Optimal;
            };
            let Some(p) = self.leaving(q, bland) else {
                return Phase::Unbounded;
            };
            if self.rhs(p) <= FEAS_TOL {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(p, q);
            if self.pivots % REFACTOR_EVERY == 0 {
                self.refactor();
            }
        }
    }
}

/// Solves `lp` (maximization, `x >= 0`).
pub fn solve_lp(lp: &LinearProgram) -> LpOutcome {
    let n = lp.n_vars();
    let m = lp.constraints.len();

    // Normalize to nonnegative right-hand sides.
    let mut rows: Vec<(Vec<(usize, f64)>, ConstraintKind, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let kind = match c.kind {
                    ConstraintKind::Le => ConstraintKind::Ge,
                    ConstraintKind::Ge => ConstraintKind::Le,
                    ConstraintKind::Eq => ConstraintKind::Eq,
                };
                (c.coeffs.iter().map(|&(j, v)| (j, -v)).collect(), kind, -c.rhs)
            } else {
                (c.coeffs.clone(), c.kind, c.rhs)
            }
        })
        .collect();

    let n_slack = rows.iter().filter(|r| r.1 != ConstraintKind::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != ConstraintKind::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut slack = n;
    let mut art = n + n_slack;
    for (i, (coeffs, kind, rhs)) in rows.drain(..).enumerate() {
        for (j, v) in coeffs {
            a[i * w + j] += v;
        }
        a[i * w + cols] = rhs;
        match kind {
            ConstraintKind::Le => {
                a[i * w + slack] = 1.0;
                basis[i] = slack;
                slack += 1;
            }
            ConstraintKind::Ge => {
                a[i * w + slack] = -1.0;
                slack += 1;
                a[i * w + art] = 1.0;
                basis[i] = art;
                art += 1;
            }
            ConstraintKind::Eq => {
                a[i * w + art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
    }
    let art_start = n + n_slack;
    let mut t = Tableau {
        rows: m,
        cols,
        orig: a.clone(),
        a,
        basis,
        cost: vec![0.0; w],
        target: Vec::new(),
        blocked: vec![false; cols],
        pivots: 0,
    };
    let max_pivots = 50 * (m + cols).max(100);
    let fail = |status, pivots| LpOutcome {
        status,
        x: vec![0.0; n],
        objective: 0.0,
        pivots,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = -1.0);
        t.price(&phase1);
        match t.run(max_pivots) {
            Phase::Optimal => {}
            Phase::IterationLimit => return fail(LpStatus::IterationLimit, t.pivots),
            // Phase one is bounded below by zero.
            Phase::Unbounded => unreachable!("phase one objective is bounded"),
        }
        t.refactor();
        let infeasibility = -t.cost[cols];
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return fail(LpStatus::Infeasible, t.pivots);
        }
        // Drive remaining artificials out; rows where that is impossible are
        // redundant and their artificial stays basic at zero.
        for i in 0..m {
            if t.basis[i] < art_start {
                continue;
            }
            if let Some(q) = (0..art_start).max_by(|&x, &y| t.at(i, x).abs().total_cmp(&t.at(i, y).abs())) {
                if t.at(i, q).abs() > PIVOT_TOL {
                    t.pivot(i, q);
                }
            }
        }
        t.blocked[art_start..].iter_mut().for_each(|b| *b = true);
    }

    let obj_scale = lp.objective.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };
    let mut phase2 = vec![0.0; cols];
    for (c, v) in phase2.iter_mut().zip(&lp.objective) {
        *c = v / obj_scale;
    }
    t.price(&phase2);
    let status = match t.run(max_pivots) {
        Phase::Optimal => LpStatus::Optimal,
        Phase::Unbounded => return fail(LpStatus::Unbounded, t.pivots),
        Phase::IterationLimit => return fail(LpStatus::IterationLimit, t.pivots),
    };
    t.refactor();
    let mut x = vec![0.0; n];
    for i in 0..m {
        let j = t.basis[i];
        if j < n {
            x[j] = t.rhs(i).max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome {
        status,
        x,
        objective,
        pivots: t.pivots,
    }
}
