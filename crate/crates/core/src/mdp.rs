//! Tabular MDP primitives: transition kernels, stationary policies,
//! occupancy measures and the correspondence between the last two.
//!
//! State-action pairs are flattened state-major: pair `(s, a)` lives at
//! index `s * n_actions + a`, and kernel entry `(s, a, s')` at
//! `(s * n_actions + a) * n_states + s'`. Every file format uses the same
//! order.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Tolerance on the row sums of kernels and policies.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on the total mass of an occupancy measure.
pub const MASS_TOL: f64 = 1e-10;
/// Flow residual accepted by [`occupancy_feasible`].
pub const FLOW_TOL: f64 = 1e-8;
/// Sweep cap for [`stationary_occupancy`].
pub const POWER_ITERATION_CAP: usize = 100_000;
/// Default convergence tolerance for [`stationary_occupancy`].
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-10;

fn check_distribution(row: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
        return Err(format!("entry {p} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// `P(s' | s, a)` for every state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel from a flat `(s, a, s')` table, validating every row.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(input("kernel needs at least one state and one action"));
        }
        if probs.len() != n_states * n_actions * n_states {
            return Err(input(format!(
                "kernel table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions * n_states
            )));
        }
        for (pair, row) in probs.chunks(n_states).enumerate() {
            check_distribution(row, ROW_SUM_TOL).map_err(|e| {
                input(format!(
                    "row (s={}, a={}): {e}",
                    pair / n_actions,
                    pair % n_actions
                ))
            })?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Builds a kernel from per-pair rows in state-major order.
    pub fn from_rows(n_states: usize, n_actions: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != n_states * n_actions || rows.iter().any(|r| r.len() != n_states) {
            return Err(input("row table does not match S x A x S"));
        }
        Self::new(n_states, n_actions, rows.concat())
    }

    /// Every row uniform over the states.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_states as f64;
        Self {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions * n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Flat index of pair `(s, a)`.
    #[inline]
    pub fn pair(&self, state: usize, action: usize) -> usize {
        state * self.n_actions + action
    }

    /// The next-state distribution of `(s, a)`.
    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = self.pair(state, action) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    /// The next-state distribution of a flattened pair index.
    #[inline]
    pub fn pair_row(&self, pair: usize) -> &[f64] {
        &self.probs[pair * self.n_states..(pair + 1) * self.n_states]
    }

    /// Mutable row access for callers that keep rows normalized themselves.
    #[inline]
    pub(crate) fn pair_row_mut(&mut self, pair: usize) -> &mut [f64] {
        &mut self.probs[pair * self.n_states..(pair + 1) * self.n_states]
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)[next]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn check_indices(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.n_states || action >= self.n_actions {
            return Err(input(format!(
                "pair ({state}, {action}) out of range for S={}, A={}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }

    /// Serializes into the plain-text kernel format: a header line `S A`
    /// followed by one line of `S` probabilities per pair.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.n_states, self.n_actions).unwrap();
        for row in self.probs.chunks(self.n_states) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}

impl FromStr for TransitionKernel {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(hline, format!("bad header: {e}")))?;
        let [n_states, n_actions] = dims[..] else {
            return Err(parse_err(hline, "header must be `S A`".into()));
        };
        if n_states == 0 || n_actions == 0 {
            return Err(parse_err(hline, "S and A must be positive".into()));
        }
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        let mut rows = 0;
        for (lineno, line) in lines {
            if rows == n_states * n_actions {
                return Err(parse_err(lineno, "trailing rows after S*A rows".into()));
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(lineno, format!("bad probability: {e}")))?;
            if row.len() != n_states {
                return Err(parse_err(
                    lineno,
                    format!("expected {n_states} entries, found {}", row.len()),
                ));
            }
            check_distribution(&row, ROW_SUM_TOL).map_err(|e| parse_err(lineno, e))?;
            probs.extend(row);
            rows += 1;
        }
        if rows != n_states * n_actions {
            return Err(parse_err(
                0,
                format!("expected {} rows, found {rows}", n_states * n_actions),
            ));
        }
        Self::new(n_states, n_actions, probs)
    }
}

impl fmt::Display for TransitionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A stationary randomized policy `pi(a | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(input("policy table does not match S x A"));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(row, ROW_SUM_TOL).map_err(|e| input(format!("policy state {s}: {e}")))?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.n_actions + action]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Draws an action for `state`.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.row(state), rng)
    }
}

/// A distribution over state-action pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    mass: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, mass: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || mass.len() != n_states * n_actions {
            return Err(input("occupancy table does not match S x A"));
        }
        if let Some(m) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(input(format!("occupancy entry {m} is negative or not finite")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(input(format!("occupancy sums to {total}")));
        }
        Ok(Self {
            n_states,
            n_actions,
            mass,
        })
    }

    /// Clamps round-off negatives to zero and rescales to unit mass.
    /// Intended for solver output; rejects anything that is not already
    /// close to a distribution.
    pub fn from_solver(n_states: usize, n_actions: usize, mut mass: Vec<f64>) -> Result<Self> {
        for m in mass.iter_mut() {
            if *m < 0.0 {
                if *m < -1e-7 {
                    return Err(input(format!("solver mass {m} is negative")));
                }
                *m = 0.0;
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(input(format!("solver mass sums to {total}")));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Self::new(n_states, n_actions, mass)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        Self {
            n_states,
            n_actions,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.mass[state * self.n_actions + action]
    }

    /// `sum_a d(s, a)` for every state.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.mass.chunks(self.n_actions).map(|r| r.iter().sum()).collect()
    }

    /// Max-norm violation of the stationarity (flow) constraints under `kernel`.
    pub fn flow_residual(&self, kernel: &TransitionKernel) -> f64 {
        flow_residual(&self.mass, kernel)
    }
}

pub(crate) fn flow_residual(mass: &[f64], kernel: &TransitionKernel) -> f64 {
    let n_states = kernel.n_states();
    let n_actions = kernel.n_actions();
    let mut inflow = vec![0.0; n_states];
    for (pair, &m) in mass.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (next, p) in kernel.pair_row(pair).iter().enumerate() {
            inflow[next] += p * m;
        }
    }
    (0..n_states)
        .map(|s| {
            let out: f64 = mass[s * n_actions..(s + 1) * n_actions].iter().sum();
            (out - inflow[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// A simulated path: `states` always has one more entry than `actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn new(start: usize) -> Self {
        Self {
            states: vec![start],
            actions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last_state(&self) -> usize {
        *self.states.last().expect("trajectory always holds its start state")
    }

    pub fn push(&mut self, action: usize, next: usize) {
        self.actions.push(action);
        self.states.push(next);
    }

    /// Runs `policy` for `steps` transitions from `start`.
    pub fn rollout<R: Rng + ?Sized>(
        kernel: &TransitionKernel,
        policy: &Policy,
        start: usize,
        steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut traj = Self::new(start);
        for _ in 0..steps {
            let state = traj.last_state();
            let action = policy.sample(state, rng);
            let next = sample_step(kernel, state, action, rng)?;
            traj.push(action, next);
        }
        Ok(traj)
    }
}

/// Inverse-CDF draw from a discrete distribution. Falls back to the last
/// index with positive mass if round-off leaves `u` above the total.
pub(crate) fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(dist.len() - 1)
}

/// Draws the next state from row `(state, action)`.
pub fn sample_step<R: Rng + ?Sized>(
    kernel: &TransitionKernel,
    state: usize,
    action: usize,
    rng: &mut R,
) -> Result<usize> {
    kernel.check_indices(state, action)?;
    Ok(sample_index(kernel.row(state, action), rng))
}

/// State-to-state transition matrix under `policy`, row-major.
pub fn induced_state_chain(kernel: &TransitionKernel, policy: &Policy) -> Result<Vec<f64>> {
    let n = kernel.n_states();
    if policy.n_states() != n || policy.n_actions() != kernel.n_actions() {
        return Err(input("policy and kernel dimensions differ"));
    }
    let mut chain = vec![0.0; n * n];
    for s in 0..n {
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (next, p) in kernel.row(s, a).iter().enumerate() {
                chain[s * n + next] += pa * p;
            }
        }
    }
    Ok(chain)
}

/// Stationary state-action occupancy of `policy`, by power iteration.
///
/// Iterates the state distribution under the induced chain from the uniform
/// start until the flow residual of `mu(s) * pi(a|s)` drops to `tol`.
pub fn stationary_occupancy(
    kernel: &TransitionKernel,
    policy: &Policy,
    tol: f64,
) -> Result<OccupancyMeasure> {
    if !(tol > 0.0) {
        return Err(input("tolerance must be positive"));
    }
    let n = kernel.n_states();
    let chain = induced_state_chain(kernel, policy)?;
    let mut mu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (t, p) in chain[s * n..(s + 1) * n].iter().enumerate() {
                next[t] += m * p;
            }
        }
        residual = mu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let total: f64 = next.iter().sum();
        mu.iter_mut().zip(&next).for_each(|(m, x)| *m = x / total);
        if residual <= tol {
            let mass: Vec<f64> = (0..n)
                .flat_map(|s| policy.row(s).iter().map(move |pa| (s, *pa)))
                .map(|(s, pa)| mu[s] * pa)
                .collect();
            return OccupancyMeasure::from_solver(n, kernel.n_actions(), mass);
        }
    }
    Err(Error::Convergence {
        iterations: POWER_ITERATION_CAP,
        residual,
    })
}

/// `pi(a|s) = d(s,a) / sum_b d(s,b)`; states without mass get the uniform
/// action distribution.
pub fn policy_from_occupancy(d: &OccupancyMeasure) -> Policy {
    let n_actions = d.n_actions();
    let mut probs = Vec::with_capacity(d.mass().len());
    for row in d.mass().chunks(n_actions) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            probs.extend(row.iter().map(|m| m / total));
        } else {
            probs.extend(std::iter::repeat(1.0 / n_actions as f64).take(n_actions));
        }
    }
    Policy {
        n_states: d.n_states(),
        n_actions,
        probs,
    }
}

/// Outcome of [`occupancy_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub flow_residual: f64,
    pub min_mass: f64,
    /// First pair (state-major order) below the `2 * eta` floor.
    pub floor_violation: Option<(usize, usize)>,
}

/// Checks membership of `d` in the eta-restricted occupancy polytope of
/// `kernel`: stationarity within [`FLOW_TOL`] and `d(s,a) >= 2 * eta`.
pub fn occupancy_feasible(
    d: &OccupancyMeasure,
    kernel: &TransitionKernel,
    eta: f64,
) -> Result<FeasibilityReport> {
    let n_pairs = kernel.n_pairs();
    if d.n_states() != kernel.n_states() || d.n_actions() != kernel.n_actions() {
        return Err(input("occupancy and kernel dimensions differ"));
    }
    if !(eta > 0.0 && eta < 1.0 / (2.0 * n_pairs as f64)) {
        return Err(input(format!(
            "eta = {eta} outside (0, 1/(2SA)) = (0, {})",
            1.0 / (2.0 * n_pairs as f64)
        )));
    }
    let flow = d.flow_residual(kernel);
    let floor = 2.0 * eta - 1e-12;
    let floor_violation = d
        .mass()
        .iter()
        .position(|m| *m < floor)
        .map(|i| (i / kernel.n_actions(), i % kernel.n_actions()));
    let min_mass = d.mass().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FeasibilityReport {
        feasible: flow <= FLOW_TOL && floor_violation.is_none(),
        flow_residual: flow,
        min_mass,
        floor_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> TransitionKernel {
        TransitionKernel::from_rows(
            2,
            2,
            &[
                vec![0.7, 0.3],
                vec![0.2, 0.8],
                vec![0.4, 0.6],
                vec![0.9, 0.1],
            ],
        )
        .unwrap()
    }

    #[test]
    fn kernel_rejects_bad_rows() {
        assert!(TransitionKernel::new(2, 1, vec![0.5, 0.6, 1.0, 0.0]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![-0.1, 1.1, 1.0, 0.0]).is_err());
        assert!(TransitionKernel::new(0, 1, vec![]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn degenerate_row_always_returns_its_atom() {
        let k = TransitionKernel::from_rows(3, 1, &[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_step(&k, 0, 0, &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn sample_step_rejects_out_of_range() {
        let k = two_by_two();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_step(&k, 2, 0, &mut rng), Err(Error::Input(_))));
        assert!(matches!(sample_step(&k, 0, 2, &mut rng), Err(Error::Input(_))));
    }

    #[test]
    fn fair_row_frequency() {
        let k = TransitionKernel::from_rows(2, 1, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| sample_step(&k, 0, 0, &mut rng).unwrap() == 0)
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.51);
        // A much tighter sanity bound than the contract requires.
        assert!((freq - 0.5).abs() < 0.01);
    }

    #[test]
    fn seeded_draws_are_frozen() {
        let k = TransitionKernel::from_rows(3, 1, &[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws: Vec<usize> = (0..16).map(|_| sample_step(&k, 0, 0, &mut rng).unwrap()).collect();
        assert_eq!(draws, GOLDEN_SEED_42);
    }

    const GOLDEN_SEED_42: [usize; 16] = [2, 2, 1, 2, 1, 0, 1, 2, 2, 1, 2, 2, 2, 2, 2, 0];

    #[test]
    fn single_state_occupancy_is_the_policy() {
        let k = TransitionKernel::from_rows(1, 3, &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let pi = Policy::new(1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        let d = stationary_occupancy(&k, &pi, 1e-12).unwrap();
        for a in 0..3 {
            assert!((d.get(0, a) - pi.prob(0, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let k = TransitionKernel::from_rows(2, 1, &[vec![0.3, 0.7], vec![0.7, 0.3]]).unwrap();
        let d = stationary_occupancy(&k, &Policy::uniform(2, 1), 1e-12).unwrap();
        assert!((d.get(0, 0) - 0.5).abs() < 1e-10);
        assert!((d.get(1, 0) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn periodic_chain_does_not_converge() {
        let k = TransitionKernel::from_rows(2, 1, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pi = Policy::uniform(2, 1);
        // The uniform start is already stationary for the flip chain.
        assert!(stationary_occupancy(&k, &pi, 1e-10).is_ok());
        let k = TransitionKernel::from_rows(3, 1, &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]])
            .unwrap();
        // Aperiodic thanks to the self-loop on state 2.
        assert!(stationary_occupancy(&k, &Policy::uniform(3, 1), 1e-10).is_ok());
    }

    #[test]
    fn policy_from_occupancy_ratios() {
        let d = OccupancyMeasure::new(2, 2, vec![0.6, 0.2, 0.1, 0.1]).unwrap();
        let pi = policy_from_occupancy(&d);
        assert!((pi.prob(0, 0) - 0.75).abs() < 1e-15);
        assert!((pi.prob(0, 1) - 0.25).abs() < 1e-15);
        assert!((pi.prob(1, 0) - 0.5).abs() < 1e-15);

        let uniform = policy_from_occupancy(&OccupancyMeasure::uniform(3, 4));
        assert!(uniform.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));

        let d = OccupancyMeasure::new(2, 2, vec![0.6, 0.4, 0.0, 0.0]).unwrap();
        let pi = policy_from_occupancy(&d);
        assert_eq!(pi.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn feasibility_reports_floor_violation() {
        let k = two_by_two();
        let d = stationary_occupancy(&k, &Policy::uniform(2, 2), 1e-12).unwrap();
        let ok = occupancy_feasible(&d, &k, 0.01).unwrap();
        assert!(ok.feasible, "{ok:?}");

        let pi = Policy::new(2, 2, vec![0.99, 0.01, 0.5, 0.5]).unwrap();
        let d = stationary_occupancy(&k, &pi, 1e-12).unwrap();
        let report = occupancy_feasible(&d, &k, 0.01).unwrap();
        assert!(!report.feasible);
        assert_eq!(report.floor_violation, Some((0, 1)));
        assert!(report.flow_residual <= FLOW_TOL);
    }

    #[test]
    fn feasibility_detects_flow_violation() {
        let k = two_by_two();
        let d = stationary_occupancy(&k, &Policy::uniform(2, 2), 1e-13).unwrap();
        // Move 0.05 of mass from state 1 to state 0. The inflow to state 0
        // changes by 0.05 * (P(0|0,.) avg - P(0|1,.) avg) = 0.05 * (0.45 - 0.65),
        // so the state-0 residual becomes |0.05 - (-0.01)| = 0.06.
        let mut mass = d.mass().to_vec();
        mass[0] += 0.025;
        mass[1] += 0.025;
        mass[2] -= 0.025;
        mass[3] -= 0.025;
        let perturbed = OccupancyMeasure::new(2, 2, mass).unwrap();
        let report = occupancy_feasible(&perturbed, &k, 0.01).unwrap();
        assert!(!report.feasible);
        assert!((report.flow_residual - 0.06).abs() < 1e-9, "{}", report.flow_residual);
    }

    #[test]
    fn feasibility_rejects_eta_out_of_range() {
        let k = two_by_two();
        let d = OccupancyMeasure::uniform(2, 2);
        assert!(occupancy_feasible(&d, &k, 0.0).is_err());
        assert!(occupancy_feasible(&d, &k, 0.125).is_err());
    }

    #[test]
    fn kernel_text_format() {
        let k = two_by_two();
        let text = k.to_text();
        assert!(text.starts_with("2 2\n0.7 0.3\n"));
        let parsed: TransitionKernel = text.parse().unwrap();
        assert_eq!(parsed, k);
        assert!(matches!("2 1\n0.5 0.6\n1 0\n".parse::<TransitionKernel>(), Err(Error::Parse { line: 2, .. })));
        assert!("2 1\n1 0\n".parse::<TransitionKernel>().is_err());
        assert!("x\n".parse::<TransitionKernel>().is_err());
    }

    #[test]
    fn rollout_shapes() {
        let k = two_by_two();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Trajectory::rollout(&k, &Policy::uniform(2, 2), 0, 25, &mut rng).unwrap();
        assert_eq!(t.len(), 25);
        assert_eq!(t.states.len(), t.actions.len() + 1);
    }
}
