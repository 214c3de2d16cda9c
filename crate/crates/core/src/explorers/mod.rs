//! Exploration agents: the episodic Frank-Wolfe explorer, its online
//! dynamic-programming variant, and the Random / MaxEnt / Weighted-MaxEnt
//! baselines.

mod episodic;
mod online;
mod oracle;

pub use episodic::{maxent_weights, run_fw_explorer, run_maxent, run_weighted_maxent, weighted_maxent_weights};
pub use online::{run_dp_explorer, run_random};
pub use oracle::GapOracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::estimation::{empirical_kernel, VisitCounts};
use crate::mdp::TransitionKernel;

/// Largest state count accepted by the extended-LP explorer; its LP has
/// `2 S^2 A` variables and is solved densely.
pub const FW_MAX_STATES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fw,
    Dp,
    Random,
    Maxent,
    WeightedMaxent,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fw => "fw",
            Algorithm::Dp => "dp",
            Algorithm::Random => "random",
            Algorithm::Maxent => "maxent",
            Algorithm::WeightedMaxent => "weighted_maxent",
        }
    }

    fn uses_lp(self) -> bool {
        matches!(self, Algorithm::Fw | Algorithm::Maxent | Algorithm::WeightedMaxent)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fw" => Algorithm::Fw,
            "dp" => Algorithm::Dp,
            "random" => Algorithm::Random,
            "maxent" => Algorithm::Maxent,
            "weighted_maxent" => Algorithm::WeightedMaxent,
            other => return Err(input(format!("unknown algorithm {other:?}"))),
        })
    }
}

/// Planning depth of the online explorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "full")]
    Full,
    H1,
    H2,
}

impl std::str::FromStr for Horizon {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Horizon::Full,
            "H1" | "h1" | "1" => Horizon::H1,
            "H2" | "h2" | "2" => Horizon::H2,
            other => return Err(input(format!("unknown horizon {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerConfig {
    pub algorithm: Algorithm,
    pub kappa: f64,
    /// Occupancy floor parameter; `None` picks `1 / (20 S A)`.
    pub eta: Option<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub horizon: Horizon,
    /// First episode length of the episodic explorers.
    pub tau1: u64,
    /// The `eps` in `T+ = max(T, eps)`.
    pub epsilon_count: f64,
    pub budget: u64,
    pub seed: u64,
    pub start_state: usize,
    /// Weight of the uniform policy mixed into each episodic policy.
    pub uniform_mix: f64,
    /// Record `U(d*) - U(d_hat)` against the exact optimum of the true kernel.
    pub track_gap: bool,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Fw,
            kappa: 2.0,
            eta: None,
            delta: 0.1,
            gamma: 0.95,
            horizon: Horizon::Full,
            tau1: 50,
            epsilon_count: 0.1,
            budget: 10_000,
            seed: 0,
            start_state: 0,
            uniform_mix: 0.0,
            track_gap: false,
        }
    }
}

impl ExplorerConfig {
    pub fn eta_for(&self, n_pairs: usize) -> f64 {
        self.eta.unwrap_or(1.0 / (20.0 * n_pairs as f64))
    }

    pub fn validate(&self, kernel: &TransitionKernel) -> Result<()> {
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(input(format!("kappa = {} must be finite and >= 1", self.kappa)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(input(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(input(format!("gamma = {} outside [0, 1)", self.gamma)));
        }
        if !(self.epsilon_count > 0.0 && self.epsilon_count <= 1.0) {
            return Err(input(format!("epsilon_count = {} outside (0, 1]", self.epsilon_count)));
        }
        if self.tau1 == 0 || self.budget == 0 {
            return Err(input("tau1 and budget must be positive"));
        }
        if self.start_state >= kernel.n_states() {
            return Err(input(format!("start state {} out of range", self.start_state)));
        }
        if !(0.0..=1.0).contains(&self.uniform_mix) {
            return Err(input("uniform_mix outside [0, 1]"));
        }
        let n_pairs = kernel.n_pairs();
        let eta = self.eta_for(n_pairs);
        if (self.algorithm.uses_lp() || self.track_gap) && !(eta > 0.0 && 2.0 * eta * (n_pairs as f64) < 1.0) {
            return Err(input(format!("eta = {eta} outside (0, 1/(2SA))")));
        }
        if self.algorithm == Algorithm::Fw && kernel.n_states() > FW_MAX_STATES {
            return Err(input(format!(
                "the LP explorer is limited to {FW_MAX_STATES} states, got {}",
                kernel.n_states()
            )));
        }
        Ok(())
    }
}

/// Everything a run leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub counts: VisitCounts,
    pub kernel_estimate: TransitionKernel,
    /// `(t, T+(t) / t)` at episode ends (episodic agents) or at powers of two
    /// and the final step (online agents).
    pub occupancy_history: Vec<(u64, Vec<f64>)>,
    /// Gap at the same times, except after a truncated final episode.
    pub gap_history: Option<Vec<(u64, f64)>>,
    pub episodes: usize,
    /// Episodes run with the uniform policy because the planner failed.
    pub fallback_episodes: Vec<usize>,
}

/// `(tau_m, t_m, beta_m)`: episode length `tau1 m^2`, start time
/// `tau1 (m-1) m (2m-1) / 6 + 1`, and implied step size `tau_m / (t_{m+1} - 1)`.
pub fn episode_schedule(tau1: u64, m: u64) -> Result<(u64, u64, f64)> {
    if m == 0 || tau1 == 0 {
        return Err(input("episodes and tau1 start at 1"));
    }
    let start = |m: u64| tau1 * (m - 1) * m * (2 * m - 1) / 6 + 1;
    let tau = tau1 * m * m;
    let beta = tau as f64 / (start(m + 1) - 1) as f64;
    Ok((tau, start(m), beta))
}

/// Runs whichever agent `cfg.algorithm` names.
pub fn run_explorer(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<RunTrace> {
    match cfg.algorithm {
        Algorithm::Fw => run_fw_explorer(kernel, cfg),
        Algorithm::Dp => run_dp_explorer(kernel, cfg),
        Algorithm::Random => run_random(kernel, cfg),
        Algorithm::Maxent => run_maxent(kernel, cfg),
        Algorithm::WeightedMaxent => run_weighted_maxent(kernel, cfg),
    }
}

/// `T+(s,a) / t` after `t` recorded steps.
pub fn empirical_occupancy(counts: &VisitCounts, epsilon: f64) -> Vec<f64> {
    let t = counts.total_steps().max(1) as f64;
    counts.floored_counts(epsilon).into_iter().map(|x| x / t).collect()
}

/// Shared bookkeeping for history and gap recording.
struct Recorder {
    epsilon: f64,
    history: Vec<(u64, Vec<f64>)>,
    oracle: Option<GapOracle>,
    gaps: Vec<(u64, f64)>,
}

impl Recorder {
    fn new(kernel: &TransitionKernel, cfg: &ExplorerConfig) -> Result<Self> {
        let oracle = if cfg.track_gap {
            Some(GapOracle::new(kernel, cfg.kappa, cfg.eta_for(kernel.n_pairs()))?)
        } else {
            None
        };
        Ok(Self {
            epsilon: cfg.epsilon_count,
            history: Vec::new(),
            oracle,
            gaps: Vec::new(),
        })
    }

    /// Appends `d_hat(t)`, and the gap when `with_gap` holds and an oracle
    /// is present.
    fn record(&mut self, counts: &VisitCounts, with_gap: bool) -> Result<()> {
        let t = counts.total_steps();
        let d_hat = empirical_occupancy(counts, self.epsilon);
        if let (Some(oracle), true) = (&self.oracle, with_gap) {
            self.gaps.push((t, oracle.gap(&d_hat)?));
        }
        self.history.push((t, d_hat));
        Ok(())
    }

    fn finish(self, algorithm: Algorithm, counts: VisitCounts, episodes: usize, fallback_episodes: Vec<usize>) -> RunTrace {
        RunTrace {
            algorithm,
            kernel_estimate: empirical_kernel(&counts),
            counts,
            occupancy_history: self.history,
            gap_history: self.oracle.map(|_| self.gaps),
            episodes,
            fallback_episodes,
        }
    }
}

fn rng_for(cfg: &ExplorerConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(episode_schedule(10, 3).unwrap().0, 90);
        assert_eq!(episode_schedule(10, 3).unwrap().1, 51);
        assert_eq!(episode_schedule(7, 1).unwrap().1, 1);
        assert!(episode_schedule(10, 0).is_err());
    }

    #[test]
    fn schedule_invariants() {
        for tau1 in [1, 10, 50] {
            for m in 1..=100u64 {
                let (tau, t_m, beta) = episode_schedule(tau1, m).unwrap();
                let (_, t_next, _) = episode_schedule(tau1, m + 1).unwrap();
                assert_eq!(t_next - t_m, tau);
                let m = m as f64;
                assert!(beta >= 1.0 / m - 1e-15 && beta <= 3.0 / m + 1e-15, "{beta} at {m}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let kernel = TransitionKernel::uniform(3, 2);
        let ok = ExplorerConfig::default();
        assert!(ok.validate(&kernel).is_ok());
        assert!((ok.eta_for(6) - 1.0 / 120.0).abs() < 1e-15);
        for bad in [
            ExplorerConfig { kappa: 0.5, ..ok.clone() },
            ExplorerConfig { eta: Some(0.1), ..ok.clone() },
            ExplorerConfig { eta: Some(0.0), ..ok.clone() },
            ExplorerConfig { epsilon_count: 1.5, ..ok.clone() },
            ExplorerConfig { gamma: 1.0, ..ok.clone() },
            ExplorerConfig { start_state: 3, ..ok.clone() },
            ExplorerConfig { budget: 0, ..ok.clone() },
        ] {
            assert!(bad.validate(&kernel).is_err(), "{bad:?}");
        }
        // The floor only matters to LP-based agents.
        let dp = ExplorerConfig {
            algorithm: Algorithm::Dp,
            eta: Some(0.1),
            ..ok.clone()
        };
        assert!(dp.validate(&kernel).is_ok());
        let big = TransitionKernel::uniform(31, 1);
        assert!(ok.validate(&big).is_err());
    }

    #[test]
    fn names_round_trip() {
        for a in [
            Algorithm::Fw,
            Algorithm::Dp,
            Algorithm::Random,
            Algorithm::Maxent,
            Algorithm::WeightedMaxent,
        ] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("H2".parse::<Horizon>().unwrap(), Horizon::H2);
        assert!("H3".parse::<Horizon>().is_err());
    }
}
