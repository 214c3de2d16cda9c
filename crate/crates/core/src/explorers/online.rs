//! Agents that choose every action from the data seen so far.

use rand::Rng;

use crate::error::Result;
use crate::estimation::{complexity_unchecked, delta_schedule, ucb_from_complexity, VisitCounts};
use crate::mdp::{sample_step, TransitionKernel};
use crate::planner::{greedy_action, truncated_action, value_iteration_from};

use super::{rng_for, Algorithm, ExplorerConfig, Horizon, Recorder, RunTrace};

/// Value iteration accuracy, relative to the largest current reward.
const VI_REL_TOL: f64 = 1e-4;

fn is_checkpoint(t: u64, budget: u64) -> bool {
    t.is_power_of_two() || t == budget
}

/// Counts plus an incrementally maintained plug-in kernel and per-pair
/// empirical complexities.
struct OnlineModel {
    counts: VisitCounts,
    kernel: TransitionKernel,
    c_hat: Vec<f64>,
}

impl OnlineModel {
    fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            counts: VisitCounts::new(n_states, n_actions),
            kernel: TransitionKernel::uniform(n_states, n_actions),
            c_hat: vec![0.0; n_states * n_actions],
        }
    }

    fn record(&mut self, state: usize, action: usize, next: usize) -> Result<()> {
        self.counts.record(state, action, next)?;
        let pair = self.kernel.pair(state, action);
        let total = self.counts.pair_counts()[pair] as f64;
        let row = self.kernel.pair_row_mut(pair);
        for (p, &c) in row.iter_mut().zip(self.counts.triple_row(pair)) {
            *p = c as f64 / total;
        }
        self.c_hat[pair] = complexity_unchecked(row);
        Ok(())
    }

    /// `c_ucb(t) / (T+)^kappa` for every pair.
    fn rewards(&self, cfg: &ExplorerConfig, t: u64, out: &mut [f64]) -> Result<()> {
        let n_states = self.counts.n_states();
        let delta_t = delta_schedule(cfg.delta, t.max(1), n_states, self.counts.n_actions())?;
        for ((r, &c), &visits) in out.iter_mut().zip(&self.c_hat).zip(self.counts.pair_counts()) {
            let ucb = ucb_from_complexity(c, n_states, visits, cfg.kappa, delta_t);
            *r = ucb / (visits as f64).max(cfg.epsilon_count).powf(cfg.kappa);
        }
        Ok(())
    }
}

/// The online explorer: at every step, rewards `c_ucb / (T+)^kappa` are
/// planned against the plug-in kernel to the configured depth.
pub fn run_dp_explorer(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    run_dp_with_model(kernel, cfg, None)
}

/// `planning` replaces the plug-in kernel during action selection.
pub(crate) fn run_dp_with_model(
    kernel: &TransitionKernel,
    cfg: &ExplorerConfig,
    planning: Option<&TransitionKernel>,
) -> Result<RunTrace> {
    cfg.validate(kernel)?;
    let mut recorder = Recorder::new(kernel, cfg)?;
    let mut rng = rng_for(cfg);
    let mut model = OnlineModel::new(kernel.n_states(), kernel.n_actions());
    let mut rewards = vec![0.0; kernel.n_pairs()];
    let mut values = vec![0.0; kernel.n_states()];
    let mut state = cfg.start_state;
    for t in 1..=cfg.budget {
        model.rewards(cfg, t, &mut rewards)?;
        let plan_kernel = planning.unwrap_or(&model.kernel);
        let action = match cfg.horizon {
            Horizon::Full => {
                let top = rewards.iter().copied().fold(0.0, f64::max);
                let tol = (VI_REL_TOL * top).max(f64::MIN_POSITIVE);
                let start = std::mem::take(&mut values);
                values = value_iteration_from(&rewards, plan_kernel, cfg.gamma, tol, start)?.0;
                greedy_action(&values, &rewards, plan_kernel, state, cfg.gamma)?
            }
            Horizon::H1 => truncated_action(&rewards, plan_kernel, state, 1, cfg.gamma)?,
            Horizon::H2 => truncated_action(&rewards, plan_kernel, state, 2, cfg.gamma)?,
        };
        let next = sample_step(kernel, state, action, &mut rng)?;
        model.record(state, action, next)?;
        state = next;
        if is_checkpoint(t, cfg.budget) {
            recorder.record(&model.counts, true)?;
        }
    }
    Ok(recorder.finish(Algorithm::Dp, model.counts, 0, Vec::new()))
}

/// Uniformly random actions.
pub fn run_random(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    cfg.validate(kernel)?;
    let mut recorder = Recorder::new(kernel, cfg)?;
    let mut rng = rng_for(cfg);
    let mut counts = VisitCounts::new(kernel.n_states(), kernel.n_actions());
    let mut state = cfg.start_state;
    for t in 1..=cfg.budget {
        let action = rng.gen_range(0..kernel.n_actions());
        let next = sample_step(kernel, state, action, &mut rng)?;
        counts.record(state, action, next)?;
        state = next;
        if is_checkpoint(t, cfg.budget) {
            recorder.record(&counts, true)?;
        }
    }
    Ok(recorder.finish(Algorithm::Random, counts, 0, Vec::new()))
}
