//! Occupancy linear programs.
//!
//! The extended LP optimizes a linear objective jointly over occupancy
//! measures and transition kernels inside l1 balls around an empirical
//! kernel. Writing `q(s,a,s') = p(s'|s,a) d(s,a)` turns the bilinear
//! stationarity constraint into a linear one, and the ball constraint
//! `|p - p_hat|_1 <= b` becomes `sum_s' |q - p_hat d| <= b d`, linearized
//! with slack variables `u(s,a,s') >= |q - p_hat d|`.

use super::simplex::{solve_lp, ConstraintKind, LinearProgram, LpOutcome, LpStatus};
use crate::error::{input, Error, Result};
use crate::mdp::{OccupancyMeasure, TransitionKernel};

fn check_eta(eta: f64, n_pairs: usize) -> Result<()> {
    let upper = 1.0 / (2.0 * n_pairs as f64);
    if !(eta > 0.0 && eta < upper) {
        return Err(input(format!("eta = {eta} outside (0, {upper})")));
    }
    Ok(())
}

/// Inputs to the optimistic direction-finding LP.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedLpInstance {
    /// Linear objective per pair, state-major.
    pub weights: Vec<f64>,
    pub empirical_kernel: TransitionKernel,
    /// l1 radius per pair.
    pub radii: Vec<f64>,
    pub eta: f64,
}

impl ExtendedLpInstance {
    pub fn validate(&self) -> Result<()> {
        let n_pairs = self.empirical_kernel.n_pairs();
        if self.weights.len() != n_pairs || self.radii.len() != n_pairs {
            return Err(input("weights and radii must have one entry per pair"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(input("weights must be finite"));
        }
        if self.radii.iter().any(|r| !(0.0..=2.0).contains(r)) {
            return Err(input("radii must lie in [0, 2]"));
        }
        check_eta(self.eta, n_pairs)
    }
}

/// The extended LP together with its variable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedLp {
    pub lp: LinearProgram,
    n_states: usize,
    n_actions: usize,
}

impl ExtendedLp {
    /// Column of `q(s, a, s')`.
    pub fn q_index(&self, state: usize, action: usize, next: usize) -> usize {
        (state * self.n_actions + action) * self.n_states + next
    }

    /// Column of the slack `u(s, a, s')`.
    pub fn u_index(&self, state: usize, action: usize, next: usize) -> usize {
        self.n_triples() + self.q_index(state, action, next)
    }

    fn n_triples(&self) -> usize {
        self.n_states * self.n_actions * self.n_states
    }

    pub fn solve(&self) -> LpSolution {
        let outcome = solve_lp(&self.lp);
        LpSolution::from_outcome(outcome, self.n_states, self.n_actions)
    }
}

/// Solution of the extended LP. Occupancy and optimistic kernel are present
/// only when `status` is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `q(s, a, s')` in state-major order.
    pub joint_mass: Vec<f64>,
    pub occupancy: Option<OccupancyMeasure>,
    pub optimistic_kernel: Option<TransitionKernel>,
    pub objective_value: f64,
}

impl LpSolution {
    fn from_outcome(outcome: LpOutcome, n_states: usize, n_actions: usize) -> Self {
        let n_triples = n_states * n_actions * n_states;
        let joint_mass = outcome.x[..n_triples].to_vec();
        if outcome.status != LpStatus::Optimal {
            return Self {
                status: outcome.status,
                joint_mass,
                occupancy: None,
                optimistic_kernel: None,
                objective_value: outcome.objective,
            };
        }
        let mass: Vec<f64> = joint_mass.chunks(n_states).map(|r| r.iter().sum()).collect();
        let occupancy = OccupancyMeasure::from_solver(n_states, n_actions, mass.clone()).ok();
        let mut probs = Vec::with_capacity(n_triples);
        for (row, &d) in joint_mass.chunks(n_states).zip(&mass) {
            let total: f64 = row.iter().map(|q| q.max(0.0)).sum();
            if d > 0.0 && total > 0.0 {
                probs.extend(row.iter().map(|q| q.max(0.0) / total));
            } else {
                probs.extend(std::iter::repeat(1.0 / n_states as f64).take(n_states));
            }
        }
        let optimistic_kernel = TransitionKernel::new(n_states, n_actions, probs).ok();
        Self {
            status: outcome.status,
            joint_mass,
            occupancy,
            optimistic_kernel,
            objective_value: outcome.objective,
        }
    }
}

/// Builds the extended LP over `q(s,a,s') >= 0` and `u(s,a,s') >= 0`:
///
/// * `sum q = 1`;
/// * flow: `sum_{a,s'} q(s,a,s') = sum_{s'',a'} q(s'',a',s)` for every `s`;
/// * floor: `d(s,a) = sum_s' q(s,a,s') >= 2 eta`;
/// * `|q(s,a,s') - p_hat(s'|s,a) d(s,a)| <= u(s,a,s')`;
/// * `sum_s' u(s,a,s') <= b(s,a) d(s,a)`;
///
/// maximizing `sum w(s,a) d(s,a)`.
pub fn build_extended_lp(inst: &ExtendedLpInstance) -> Result<ExtendedLp> {
    inst.validate()?;
    let kernel = &inst.empirical_kernel;
    let n_states = kernel.n_states();
    let n_actions = kernel.n_actions();
    let n_triples = n_states * n_actions * n_states;
    let mut out = ExtendedLp {
        lp: LinearProgram::new(2 * n_triples),
        n_states,
        n_actions,
    };
    let q = |s: usize, a: usize, t: usize| (s * n_actions + a) * n_states + t;
    let u = |s: usize, a: usize, t: usize| n_triples + q(s, a, t);

    for s in 0..n_states {
        for a in 0..n_actions {
            let w = inst.weights[s * n_actions + a];
            for t in 0..n_states {
                out.lp.objective[q(s, a, t)] = w;
            }
        }
    }

    let lp = &mut out.lp;
    lp.add_constraint((0..n_triples).map(|j| (j, 1.0)).collect(), ConstraintKind::Eq, 1.0);

    for s in 0..n_states {
        let mut row = Vec::new();
        for a in 0..n_actions {
            for t in 0..n_states {
                row.push((q(s, a, t), 1.0));
            }
        }
        for prev in 0..n_states {
            for a in 0..n_actions {
                row.push((q(prev, a, s), -1.0));
            }
        }
        lp.add_constraint(row, ConstraintKind::Eq, 0.0);
    }

    for s in 0..n_states {
        for a in 0..n_actions {
            let row = (0..n_states).map(|t| (q(s, a, t), 1.0)).collect();
            lp.add_constraint(row, ConstraintKind::Ge, 2.0 * inst.eta);
        }
    }

    for s in 0..n_states {
        for a in 0..n_actions {
            let p_hat = kernel.row(s, a);
            for t in 0..n_states {
                // q(s,a,t) - p_hat(t) * sum_t' q(s,a,t') - u(s,a,t) <= 0
                let mut upper: Vec<(usize, f64)> =
                    (0..n_states).map(|t2| (q(s, a, t2), -p_hat[t])).collect();
                upper.push((q(s, a, t), 1.0));
                upper.push((u(s, a, t), -1.0));
                // -q(s,a,t) + p_hat(t) * sum_t' q(s,a,t') - u(s,a,t) <= 0
                let mut lower: Vec<(usize, f64)> =
                    (0..n_states).map(|t2| (q(s, a, t2), p_hat[t])).collect();
                lower.push((q(s, a, t), -1.0));
                lower.push((u(s, a, t), -1.0));
                lp.add_constraint(upper, ConstraintKind::Le, 0.0);
                lp.add_constraint(lower, ConstraintKind::Le, 0.0);
            }
        }
    }

    for s in 0..n_states {
        for a in 0..n_actions {
            let b = inst.radii[s * n_actions + a];
            let mut row: Vec<(usize, f64)> = (0..n_states).map(|t| (u(s, a, t), 1.0)).collect();
            row.extend((0..n_states).map(|t| (q(s, a, t), -b)));
            lp.add_constraint(row, ConstraintKind::Le, 0.0);
        }
    }
    Ok(out)
}

/// Builds and solves the extended LP in one call.
pub fn solve_extended_lp(inst: &ExtendedLpInstance) -> Result<LpSolution> {
    Ok(build_extended_lp(inst)?.solve())
}

/// Occupancy LP for a known kernel, in the shifted variables
/// `y = d - 2 eta >= 0` so the floor needs no extra rows.
pub fn occupancy_lp(weights: &[f64], kernel: &TransitionKernel, eta: f64) -> Result<LinearProgram> {
    let n_states = kernel.n_states();
    let n_actions = kernel.n_actions();
    let n_pairs = kernel.n_pairs();
    if weights.len() != n_pairs {
        return Err(input("weights must have one entry per pair"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(input("weights must be finite"));
    }
    check_eta(eta, n_pairs)?;
    let floor = 2.0 * eta;
    let mut lp = LinearProgram::new(n_pairs);
    lp.objective.copy_from_slice(weights);
    lp.add_constraint(
        (0..n_pairs).map(|j| (j, 1.0)).collect(),
        ConstraintKind::Eq,
        1.0 - floor * n_pairs as f64,
    );
    for s in 0..n_states {
        let mut row: Vec<(usize, f64)> = (0..n_actions).map(|a| (s * n_actions + a, 1.0)).collect();
        let mut inflow = 0.0;
        for pair in 0..n_pairs {
            let p = kernel.pair_row(pair)[s];
            if p != 0.0 {
                row.push((pair, -p));
                inflow += p;
            }
        }
        // Substituting d = y + floor moves floor * (inflow - A) to the right.
        lp.add_constraint(row, ConstraintKind::Eq, floor * (inflow - n_actions as f64));
    }
    Ok(lp)
}

/// Maximizes `<weights, d>` over stationary occupancies of `kernel` with
/// every entry at least `2 eta`.
pub fn exact_direction(weights: &[f64], kernel: &TransitionKernel, eta: f64) -> Result<OccupancyMeasure> {
    let lp = occupancy_lp(weights, kernel, eta)?;
    let outcome = solve_lp(&lp);
    match outcome.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::IterationLimit => return Err(Error::IterationLimit),
        LpStatus::Unbounded => unreachable!("occupancy polytope is bounded"),
    }
    let floor = 2.0 * eta;
    let mass = outcome.x.iter().map(|y| y + floor).collect();
    OccupancyMeasure::from_solver(kernel.n_states(), kernel.n_actions(), mass).map_err(|e| Error::Numerical(e.to_string()))
}
