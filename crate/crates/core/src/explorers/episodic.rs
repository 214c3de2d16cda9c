//! Episodic agents: each episode plans one occupancy direction, derives its
//! policy and follows it for `tau1 m^2` steps.

use crate::error::{Error, Result};
use crate::estimation::{empirical_kernel, ConfidenceState, VisitCounts};
use crate::mdp::{policy_from_occupancy, sample_step, OccupancyMeasure, Policy, TransitionKernel};
use crate::planner::{exact_direction, solve_extended_lp, ExtendedLpInstance, LpStatus};

use super::{episode_schedule, rng_for, Algorithm, ExplorerConfig, Recorder, RunTrace};

fn mix_uniform(policy: Policy, weight: f64) -> Policy {
    if weight == 0.0 {
        return policy;
    }
    let u = 1.0 / policy.n_actions() as f64;
    let probs = policy.probs().iter().map(|p| (1.0 - weight) * p + weight * u).collect();
    Policy::new(policy.n_states(), policy.n_actions(), probs).expect("mixture of policies")
}

/// The shared episode loop. `plan` receives the counts so far and the
/// episode start time `t_m`, and returns the occupancy to follow.
fn run_episodes(
    kernel: &TransitionKernel,
    cfg: &ExplorerConfig,
    mut plan: impl FnMut(&VisitCounts, u64) -> Result<OccupancyMeasure>,
) -> Result<RunTrace> {
    cfg.validate(kernel)?;
    let mut recorder = Recorder::new(kernel, cfg)?;
    let mut rng = rng_for(cfg);
    let mut counts = VisitCounts::new(kernel.n_states(), kernel.n_actions());
    let mut fallback = Vec::new();
    let mut state = cfg.start_state;
    let mut m = 1;
    while counts.total_steps() < cfg.budget {
        let (tau, t_m, _) = episode_schedule(cfg.tau1, m)?;
        let policy = match plan(&counts, t_m) {
            Ok(d) => mix_uniform(policy_from_occupancy(&d), cfg.uniform_mix),
            Err(Error::Infeasible | Error::IterationLimit | Error::Numerical(_)) => {
                fallback.push(m as usize);
                Policy::uniform(kernel.n_states(), kernel.n_actions())
            }
            Err(e) => return Err(e),
        };
        let steps = tau.min(cfg.budget - counts.total_steps());
        for _ in 0..steps {
            let action = policy.sample(state, &mut rng);
            let next = sample_step(kernel, state, action, &mut rng)?;
            counts.record(state, action, next)?;
            state = next;
        }
        recorder.record(&counts, steps == tau)?;
        m += 1;
    }
    Ok(recorder.finish(cfg.algorithm, counts, (m - 1) as usize, fallback))
}

/// Frank-Wolfe weights `c_ucb / (T+)^kappa`, rescaled to unit max.
fn fw_weights(counts: &VisitCounts, conf: &ConfidenceState, cfg: &ExplorerConfig) -> Vec<f64> {
    let mut w: Vec<f64> = conf
        .c_ucb
        .iter()
        .zip(counts.floored_counts(cfg.epsilon_count))
        .map(|(c, t)| c / t.powf(cfg.kappa))
        .collect();
    let scale = w.iter().copied().fold(0.0, f64::max);
    if scale > 0.0 {
        w.iter_mut().for_each(|x| *x /= scale);
    }
    w
}

/// The episodic explorer: optimistic Frank-Wolfe directions from the
/// extended LP over the kernel confidence set.
pub fn run_fw_explorer(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    let eta = cfg.eta_for(kernel.n_pairs());
    let cfg = ExplorerConfig {
        algorithm: Algorithm::Fw,
        ..cfg.clone()
    };
    run_episodes(kernel, &cfg, |counts, t_m| {
        let conf = ConfidenceState::compute(counts, cfg.delta, t_m, cfg.kappa)?;
        let inst = ExtendedLpInstance {
            weights: fw_weights(counts, &conf, &cfg),
            empirical_kernel: empirical_kernel(counts),
            radii: conf.radii,
            eta,
        };
        let sol = solve_extended_lp(&inst)?;
        match sol.status {
            LpStatus::Optimal => sol
                .occupancy
                .ok_or_else(|| Error::Numerical("extended LP optimum is not a distribution".into())),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::IterationLimit | LpStatus::Unbounded => Err(Error::IterationLimit),
        }
    })
}

/// State-entropy gradient `-log d_s - 1`, shifted by `max(log t, 1)`, for
/// every pair of state `s`. `d_s` is the visit frequency of `s` after `t`
/// steps, floored at `epsilon / t`.
pub fn maxent_weights(counts: &VisitCounts, epsilon: f64) -> Vec<f64> {
    let t = counts.total_steps().max(1) as f64;
    let n_actions = counts.n_actions();
    let shift = t.ln().max(1.0);
    let visits = counts.pair_counts();
    (0..counts.n_states())
        .flat_map(|s| {
            let n_s: u64 = visits[s * n_actions..(s + 1) * n_actions].iter().sum();
            let d_s = (n_s as f64).max(epsilon) / t;
            std::iter::repeat(-d_s.ln() - 1.0 + shift).take(n_actions)
        })
        .collect()
}

/// Entropy weights scaled pairwise by complexity bounds.
pub fn weighted_maxent_weights(entropy: &[f64], complexity: &[f64]) -> Vec<f64> {
    entropy.iter().zip(complexity).map(|(w, c)| w * c).collect()
}

/// Entropy-seeking baseline: the episodic loop with entropy-gradient weights
/// and directions planned on the plug-in kernel.
pub fn run_maxent(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    let eta = cfg.eta_for(kernel.n_pairs());
    let cfg = ExplorerConfig {
        algorithm: Algorithm::Maxent,
        ..cfg.clone()
    };
    run_episodes(kernel, &cfg, |counts, _| {
        exact_direction(&maxent_weights(counts, cfg.epsilon_count), &empirical_kernel(counts), eta)
    })
}

/// MaxEnt with each pair's weight multiplied by its `kappa = 1` complexity
/// upper bound.
pub fn run_weighted_maxent(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    let eta = cfg.eta_for(kernel.n_pairs());
    let cfg = ExplorerConfig {
        algorithm: Algorithm::WeightedMaxent,
        ..cfg.clone()
    };
    run_episodes(kernel, &cfg, |counts, t_m| {
        let conf = ConfidenceState::compute(counts, cfg.delta, t_m, 1.0)?;
        let w = weighted_maxent_weights(&maxent_weights(counts, cfg.epsilon_count), &conf.c_ucb);
        exact_direction(&w, &empirical_kernel(counts), eta)
    })
}
