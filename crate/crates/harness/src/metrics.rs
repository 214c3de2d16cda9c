//! Normalized per-pair estimation loss and its aggregates.

use kexplore::estimation::{kernel_complexities, VisitCounts};
use kexplore::mdp::TransitionKernel;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// `c(s,a) n / T(s,a)` for every pair; `+inf` marks a stochastic pair that
/// was never visited.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLossTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl PairLossTable {
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }
}

/// Scores `counts` against the complexities of the true kernel. Pairs with
/// `c = 0` score 0 whether visited or not.
pub fn pair_loss(kernel: &TransitionKernel, counts: &VisitCounts, n: u64) -> Result<PairLossTable> {
    if counts.n_states() != kernel.n_states() || counts.n_actions() != kernel.n_actions() {
        return Err(HarnessError::Core(kexplore::Error::Input(
            "counts and kernel disagree on the state or action count".into(),
        )));
    }
    if counts.total_steps() != n {
        return Err(HarnessError::Core(kexplore::Error::Input(format!(
            "budget {n} differs from the {} recorded steps",
            counts.total_steps()
        ))));
    }
    let values = kernel_complexities(kernel)
        .into_iter()
        .zip(counts.pair_counts())
        .map(|(c, &t)| match (c > 0.0, t) {
            (false, _) => 0.0,
            (true, 0) => f64::INFINITY,
            (true, t) => c * n as f64 / t as f64,
        })
        .collect();
    Ok(PairLossTable {
        n_states: kernel.n_states(),
        n_actions: kernel.n_actions(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub worst: f64,
    pub avg: f64,
    pub failed: bool,
}

/// Max and mean over pairs; both are infinite when any pair is.
pub fn aggregate(losses: &PairLossTable) -> Aggregate {
    let failed = losses.values.iter().any(|v| v.is_infinite());
    let worst = losses.values.iter().copied().fold(0.0, f64::max);
    let avg = losses.values.iter().sum::<f64>() / losses.values.len() as f64;
    Aggregate { worst, avg, failed }
}

/// Serializes `+inf` as the string `"inf"`, which JSON cannot carry as a
/// number.
pub(crate) mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            Err(serde::ser::Error::custom(format!("cannot store {x}")))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub index: usize,
    pub seed: u64,
    #[serde(with = "extended_real")]
    pub worst: f64,
    #[serde(with = "extended_real")]
    pub avg: f64,
    pub failed: bool,
    /// Set when the agent itself returned an error.
    pub error: Option<String>,
}

impl TrialMetrics {
    pub fn crashed(index: usize, seed: u64, error: String) -> Self {
        Self {
            index,
            seed,
            worst: f64::INFINITY,
            avg: f64::INFINITY,
            failed: true,
            error: Some(error),
        }
    }
}

/// One policy on one environment over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub env: String,
    pub budget: u64,
    pub per_trial: Vec<TrialMetrics>,
    pub failure_rate: f64,
    /// Means over trials that did not fail; `None` when all of them did.
    pub worst_mean: Option<f64>,
    pub avg_mean: Option<f64>,
}

impl MetricsReport {
    pub fn new(policy: impl Into<String>, env: impl Into<String>, budget: u64, mut per_trial: Vec<TrialMetrics>) -> Self {
        per_trial.sort_by_key(|t| t.index);
        let n = per_trial.len();
        let ok: Vec<&TrialMetrics> = per_trial.iter().filter(|t| !t.failed).collect();
        let failure_rate = if n == 0 { 0.0 } else { (n - ok.len()) as f64 / n as f64 };
        let mean = |f: fn(&TrialMetrics) -> f64| {
            if ok.is_empty() {
                None
            } else {
                Some(ok.iter().map(|t| f(t)).sum::<f64>() / ok.len() as f64)
            }
        };
        let worst_mean = mean(|t| t.worst);
        let avg_mean = mean(|t| t.avg);
        Self {
            policy: policy.into(),
            env: env.into(),
            budget,
            per_trial,
            failure_rate,
            worst_mean,
            avg_mean,
        }
    }

    pub fn n_trials(&self) -> usize {
        self.per_trial.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts_for(n_states: usize, n_actions: usize, visits: &[(usize, usize, usize, u64)]) -> VisitCounts {
        let mut counts = VisitCounts::new(n_states, n_actions);
        for &(s, a, n, k) in visits {
            for _ in 0..k {
                counts.record(s, a, n).unwrap();
            }
        }
        counts
    }

    #[test]
    fn scripted_losses() {
        // Pair (0,0) is a fair coin (c = 0.5), pair (0,1) deterministic,
        // pair (1,0) uniform, pair (1,1) a fair coin that is never tried.
        let kernel = TransitionKernel::from_rows(
            2,
            2,
            &[vec![0.5, 0.5], vec![0.0, 1.0], vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let counts = counts_for(2, 2, &[(0, 0, 0, 100), (0, 1, 1, 880), (1, 0, 1, 20)]);
        let table = pair_loss(&kernel, &counts, 1000).unwrap();
        assert_eq!(table.get(0, 0), 5.0);
        assert_eq!(table.get(0, 1), 0.0);
        assert_eq!(table.get(1, 0), 25.0);
        assert_eq!(table.get(1, 1), f64::INFINITY);
        let agg = aggregate(&table);
        assert!(agg.failed && agg.worst.is_infinite() && agg.avg.is_infinite());
    }

    #[test]
    fn unvisited_deterministic_pair_is_free() {
        let kernel = TransitionKernel::from_rows(1, 2, &[vec![1.0], vec![1.0]]).unwrap();
        let counts = counts_for(1, 2, &[(0, 0, 0, 10)]);
        let table = pair_loss(&kernel, &counts, 10).unwrap();
        assert_eq!(table.values, vec![0.0, 0.0]);
        assert!(!aggregate(&table).failed);
    }

    #[test]
    fn budget_mismatch_is_rejected() {
        let kernel = TransitionKernel::uniform(2, 1);
        let counts = counts_for(2, 1, &[(0, 0, 1, 3)]);
        assert!(pair_loss(&kernel, &counts, 4).is_err());
        assert!(pair_loss(&TransitionKernel::uniform(3, 1), &counts, 3).is_err());
    }

    #[test]
    fn aggregate_by_hand() {
        let table = |values: Vec<f64>| PairLossTable {
            n_states: 1,
            n_actions: values.len(),
            values,
        };
        assert_eq!(
            aggregate(&table(vec![1.0, 3.0])),
            Aggregate {
                worst: 3.0,
                avg: 2.0,
                failed: false
            }
        );
        assert_eq!(
            aggregate(&table(vec![0.0, 2.5, 7.25, 0.25])),
            Aggregate {
                worst: 7.25,
                avg: 2.5,
                failed: false
            }
        );
        assert!(aggregate(&table(vec![1.0, f64::INFINITY])).failed);
    }

    fn trial(index: usize, worst: f64, avg: f64) -> TrialMetrics {
        TrialMetrics {
            index,
            seed: index as u64,
            worst,
            avg,
            failed: worst.is_infinite(),
            error: None,
        }
    }

    #[test]
    fn report_means_skip_failures() {
        let report = MetricsReport::new(
            "p",
            "e",
            10,
            vec![trial(0, 4.0, 1.0), trial(1, f64::INFINITY, f64::INFINITY), trial(2, 6.0, 3.0)],
        );
        assert!((report.failure_rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.worst_mean, Some(5.0));
        assert_eq!(report.avg_mean, Some(2.0));
        let all_failed = MetricsReport::new("p", "e", 10, vec![TrialMetrics::crashed(0, 0, "boom".into())]);
        assert_eq!(all_failed.failure_rate, 1.0);
        assert_eq!(all_failed.worst_mean, None);
    }

    #[test]
    fn infinity_survives_json() {
        let report = MetricsReport::new("p", "e", 10, vec![trial(0, f64::INFINITY, f64::INFINITY), trial(1, 2.0, 1.5)]);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<MetricsReport>(&json).unwrap(), report);
    }

    proptest! {
        #[test]
        fn worst_dominates_average(values in prop::collection::vec(0.0f64..1e4, 1..40)) {
            let agg = aggregate(&PairLossTable { n_states: 1, n_actions: values.len(), values });
            prop_assert!(agg.worst >= agg.avg - 1e-9 * agg.worst.max(1.0));
        }

        #[test]
        fn means_ignore_trial_order(
            values in prop::collection::vec((0.0f64..1e3, 0.0f64..1e3, any::<bool>()), 1..12),
            rotation in 0usize..12,
        ) {
            let trials: Vec<TrialMetrics> = values
                .iter()
                .enumerate()
                .map(|(i, &(w, a, fail))| if fail { trial(i, f64::INFINITY, f64::INFINITY) } else { trial(i, w.max(a), a) })
                .collect();
            let mut shuffled = trials.clone();
            let k = rotation % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(MetricsReport::new("p", "e", 1, trials), MetricsReport::new("p", "e", 1, shuffled));
        }
    }
}
