//! Visit counts, the plug-in kernel estimate, intrinsic complexity and the
//! confidence quantities built on top of them.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::mdp::TransitionKernel;

/// Transition counts `T(s, a, s')`, their pair marginals `T(s, a)` and the
/// number of recorded steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitCounts {
    n_states: usize,
    n_actions: usize,
    triples: Vec<u64>,
    pairs: Vec<u64>,
    total: u64,
}

impl VisitCounts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            triples: vec![0; n_states * n_actions * n_states],
            pairs: vec![0; n_states * n_actions],
            total: 0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_steps(&self) -> u64 {
        self.total
    }

    pub fn pair_count(&self, state: usize, action: usize) -> u64 {
        self.pairs[state * self.n_actions + action]
    }

    /// Pair counts in state-major order.
    pub fn pair_counts(&self) -> &[u64] {
        &self.pairs
    }

    pub fn triple_count(&self, state: usize, action: usize, next: usize) -> u64 {
        self.triples[(state * self.n_actions + action) * self.n_states + next]
    }

    pub fn triple_row(&self, pair: usize) -> &[u64] {
        &self.triples[pair * self.n_states..(pair + 1) * self.n_states]
    }

    /// Records one observed transition `(s, a) -> s'`.
    pub fn record(&mut self, state: usize, action: usize, next: usize) -> Result<()> {
        if state >= self.n_states || action >= self.n_actions || next >= self.n_states {
            return Err(input(format!(
                "transition ({state}, {action}, {next}) out of range for S={}, A={}",
                self.n_states, self.n_actions
            )));
        }
        let pair = state * self.n_actions + action;
        self.triples[pair * self.n_states + next] += 1;
        self.pairs[pair] += 1;
        self.total += 1;
        Ok(())
    }

    /// `T+(s, a) = max(T(s, a), eps)` for every pair.
    pub fn floored_counts(&self, eps: f64) -> Vec<f64> {
        self.pairs.iter().map(|&t| (t as f64).max(eps)).collect()
    }

    /// Debug dump: header `S A t`, then one `s a s' count` line per nonzero
    /// triple in state-major order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_states, self.n_actions, self.total);
        for (idx, &c) in self.triples.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let pair = idx / self.n_states;
            let next = idx % self.n_states;
            writeln!(
                out,
                "{} {} {} {c}",
                pair / self.n_actions,
                pair % self.n_actions,
                next
            )
            .unwrap();
        }
        out
    }
}

impl FromStr for VisitCounts {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let fields: Vec<u64> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(hline, format!("bad header: {e}")))?;
        let [n_states, n_actions, total] = fields[..] else {
            return Err(bad(hline, "header must be `S A t`".into()));
        };
        let mut counts = VisitCounts::new(n_states as usize, n_actions as usize);
        for (lineno, line) in lines {
            let f: Vec<u64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(lineno, format!("bad triple: {e}")))?;
            let [s, a, next, c] = f[..] else {
                return Err(bad(lineno, "expected `s a s' count`".into()));
            };
            let (s, a, next) = (s as usize, a as usize, next as usize);
            if s >= counts.n_states || a >= counts.n_actions || next >= counts.n_states {
                return Err(bad(lineno, "index out of range".into()));
            }
            let pair = s * counts.n_actions + a;
            counts.triples[pair * counts.n_states + next] += c;
            counts.pairs[pair] += c;
            counts.total += c;
        }
        if counts.total != total {
            return Err(bad(hline, format!("header says t={total}, triples sum to {}", counts.total)));
        }
        Ok(counts)
    }
}

/// Plug-in estimate: observed frequencies, uniform rows for unvisited pairs.
pub fn empirical_kernel(counts: &VisitCounts) -> TransitionKernel {
    let n = counts.n_states();
    let mut probs = Vec::with_capacity(counts.triples.len());
    for (pair, &total) in counts.pairs.iter().enumerate() {
        if total == 0 {
            probs.extend(std::iter::repeat(1.0 / n as f64).take(n));
        } else {
            let denom = total as f64;
            probs.extend(counts.triple_row(pair).iter().map(|&c| c as f64 / denom));
        }
    }
    TransitionKernel::new(n, counts.n_actions(), probs)
        .expect("count ratios always form distributions")
}

/// Writes the plug-in row of one pair into `out` without rebuilding the kernel.
pub(crate) fn empirical_row_into(counts: &VisitCounts, pair: usize, out: &mut [f64]) {
    let total = counts.pairs[pair];
    if total == 0 {
        out.fill(1.0 / counts.n_states as f64);
    } else {
        let denom = total as f64;
        for (o, &c) in out.iter_mut().zip(counts.triple_row(pair)) {
            *o = c as f64 / denom;
        }
    }
}

const DIST_TOL: f64 = 1e-9;

fn check_dist(dist: &[f64]) -> Result<()> {
    if dist.is_empty() || dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(input("distribution has negative, non-finite or no entries"));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(input(format!("distribution sums to {sum}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn complexity_unchecked(dist: &[f64]) -> f64 {
    (1.0 - dist.iter().map(|p| p * p).sum::<f64>()).max(0.0)
}

/// Intrinsic complexity `c = 1 - sum p^2` of a next-state distribution.
pub fn intrinsic_complexity(dist: &[f64]) -> Result<f64> {
    check_dist(dist)?;
    Ok(complexity_unchecked(dist))
}

/// Square-root variant `sqrt(1 - sum p^2)`.
pub fn intrinsic_complexity_sqrt(dist: &[f64]) -> Result<f64> {
    intrinsic_complexity(dist).map(f64::sqrt)
}

/// Per-pair complexities of a kernel, state-major.
pub fn kernel_complexities(kernel: &TransitionKernel) -> Vec<f64> {
    (0..kernel.n_pairs())
        .map(|p| complexity_unchecked(kernel.pair_row(p)))
        .collect()
}

/// Time-uniform confidence schedule `delta_t = delta / (pi^2/3 * S * A * t^2)`.
pub fn delta_schedule(delta: f64, t: u64, n_states: usize, n_actions: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(input(format!("delta = {delta} outside (0, 1)")));
    }
    if t == 0 {
        return Err(input("time index starts at 1"));
    }
    let t = t as f64;
    let scale = std::f64::consts::PI.powi(2) / 3.0 * (n_states * n_actions) as f64 * t * t;
    Ok(delta / scale)
}

/// Upper confidence bound on `c(s,a)^kappa`:
/// `min{1, (c_hat + S * sqrt(log(2S/delta_t) / (2T)))^kappa}`, and 1 for
/// unvisited pairs.
pub fn complexity_ucb(
    counts: &VisitCounts,
    state: usize,
    action: usize,
    kappa: f64,
    delta_t: f64,
) -> f64 {
    let pair = state * counts.n_actions() + action;
    let mut row = vec![0.0; counts.n_states()];
    empirical_row_into(counts, pair, &mut row);
    ucb_from_row(&row, counts.pairs[pair], kappa, delta_t)
}

pub(crate) fn ucb_from_row(row: &[f64], visits: u64, kappa: f64, delta_t: f64) -> f64 {
    ucb_from_complexity(complexity_unchecked(row), row.len(), visits, kappa, delta_t)
}

pub(crate) fn ucb_from_complexity(c_hat: f64, n_states: usize, visits: u64, kappa: f64, delta_t: f64) -> f64 {
    if visits == 0 {
        return 1.0;
    }
    let s = n_states as f64;
    let dev = s * ((2.0 * s / delta_t).ln() / (2.0 * visits as f64)).sqrt();
    let base = c_hat + dev;
    if base >= 1.0 {
        1.0
    } else {
        base.powf(kappa)
    }
}

/// l1 radius of the kernel confidence ball: `min{2, sqrt(2 log(1/delta_t) / T)}`,
/// and 2 for unvisited pairs.
pub fn confidence_radius(counts: &VisitCounts, state: usize, action: usize, delta_t: f64) -> f64 {
    radius_from_visits(counts.pair_count(state, action), delta_t)
}

pub(crate) fn radius_from_visits(visits: u64, delta_t: f64) -> f64 {
    if visits == 0 {
        return 2.0;
    }
    (2.0 * (1.0 / delta_t).ln() / visits as f64).sqrt().min(2.0)
}

/// Confidence quantities for every pair at one time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    pub delta: f64,
    pub delta_t: f64,
    /// Upper bounds on `c^kappa`, state-major.
    pub c_ucb: Vec<f64>,
    /// l1 radii around the empirical rows, state-major.
    pub radii: Vec<f64>,
}

impl ConfidenceState {
    /// Evaluates both confidence constructions at time `t` from `counts`.
    pub fn compute(counts: &VisitCounts, delta: f64, t: u64, kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0) {
            return Err(input(format!("kappa = {kappa} must be >= 1")));
        }
        let delta_t = delta_schedule(delta, t, counts.n_states(), counts.n_actions())?;
        let mut row = vec![0.0; counts.n_states()];
        let mut c_ucb = Vec::with_capacity(counts.n_pairs());
        let mut radii = Vec::with_capacity(counts.n_pairs());
        for pair in 0..counts.n_pairs() {
            empirical_row_into(counts, pair, &mut row);
            let visits = counts.pairs[pair];
            c_ucb.push(ucb_from_row(&row, visits, kappa, delta_t));
            radii.push(radius_from_visits(visits, delta_t));
        }
        Ok(Self {
            delta,
            delta_t,
            c_ucb,
            radii,
        })
    }
}
