//! Discounted dynamic programming on an estimated model.

use crate::error::{input, Result};
use crate::mdp::TransitionKernel;

fn check(reward: &[f64], kernel: &TransitionKernel, gamma: f64) -> Result<()> {
    if reward.len() != kernel.n_pairs() {
        return Err(input("reward must have one entry per pair"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(input(format!("gamma = {gamma} outside [0, 1)")));
    }
    Ok(())
}

#[inline]
fn backup(reward: &[f64], kernel: &TransitionKernel, values: &[f64], pair: usize, gamma: f64) -> f64 {
    let future: f64 = kernel
        .pair_row(pair)
        .iter()
        .zip(values)
        .map(|(p, v)| p * v)
        .sum();
    reward[pair] + gamma * future
}

/// Applies the Bellman optimality operator once.
pub fn bellman_update(reward: &[f64], kernel: &TransitionKernel, values: &[f64], gamma: f64) -> Vec<f64> {
    let n_actions = kernel.n_actions();
    (0..kernel.n_states())
        .map(|s| {
            (0..n_actions)
                .map(|a| backup(reward, kernel, values, s * n_actions + a, gamma))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `|V - TV|_inf`.
pub fn bellman_residual(reward: &[f64], kernel: &TransitionKernel, values: &[f64], gamma: f64) -> f64 {
    bellman_update(reward, kernel, values, gamma)
        .iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Optimal state values for `reward` under `kernel`, from a zero start.
pub fn value_iteration(reward: &[f64], kernel: &TransitionKernel, gamma: f64, tol: f64) -> Result<Vec<f64>> {
    value_iteration_from(reward, kernel, gamma, tol, vec![0.0; kernel.n_states()]).map(|(v, _)| v)
}

/// Value iteration from a caller-supplied starting point. Stops once two
/// sweeps differ by at most `tol (1 - gamma) / (2 gamma)` in sup norm, which
/// bounds the Bellman residual of the result by `tol`. Returns the values
/// and the number of sweeps.
pub fn value_iteration_from(
    reward: &[f64],
    kernel: &TransitionKernel,
    gamma: f64,
    tol: f64,
    start: Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    check(reward, kernel, gamma)?;
    if !(tol > 0.0) {
        return Err(input("tolerance must be positive"));
    }
    if start.len() != kernel.n_states() {
        return Err(input("start vector must have one entry per state"));
    }
    let threshold = if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / (2.0 * gamma)
    };
    let n_actions = kernel.n_actions();
    let mut values = start;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        // In-place (Gauss-Seidel) sweep; the stopping rule still bounds the
        // residual because each sweep is a gamma-contraction.
        let mut change = 0.0f64;
        for s in 0..kernel.n_states() {
            let best = (0..n_actions)
                .map(|a| backup(reward, kernel, &values, s * n_actions + a, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - values[s]).abs());
            values[s] = best;
        }
        if change <= threshold {
            return Ok((values, sweeps));
        }
    }
}

fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, score) in scores.enumerate() {
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

/// `argmax_a r(s,a) + gamma sum_s' p(s'|s,a) V(s')`, lowest index on ties.
pub fn greedy_action(
    values: &[f64],
    reward: &[f64],
    kernel: &TransitionKernel,
    state: usize,
    gamma: f64,
) -> Result<usize> {
    check(reward, kernel, gamma)?;
    if state >= kernel.n_states() || values.len() != kernel.n_states() {
        return Err(input("state or value table out of range"));
    }
    let n_actions = kernel.n_actions();
    Ok(argmax(
        (0..n_actions).map(|a| backup(reward, kernel, values, state * n_actions + a, gamma)),
    ))
}

/// Depth-limited lookahead: `depth = 1` maximizes the immediate reward,
/// `depth = 2` adds `gamma sum_s' p(s'|s,a) max_a' r(s',a')`.
pub fn truncated_action(
    reward: &[f64],
    kernel: &TransitionKernel,
    state: usize,
    depth: usize,
    gamma: f64,
) -> Result<usize> {
    check(reward, kernel, gamma)?;
    if state >= kernel.n_states() {
        return Err(input(format!("state {state} out of range")));
    }
    let n_actions = kernel.n_actions();
    let row = |s: usize| &reward[s * n_actions..(s + 1) * n_actions];
    match depth {
        1 => Ok(argmax(row(state).iter().copied())),
        2 => {
            let best_next: Vec<f64> = (0..kernel.n_states())
                .map(|s| row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            Ok(argmax(
                (0..n_actions).map(|a| backup(reward, kernel, &best_next, state * n_actions + a, gamma)),
            ))
        }
        _ => Err(input(format!("lookahead depth {depth} must be 1 or 2"))),
    }
}
