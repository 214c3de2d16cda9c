//! Exact tabular kernels for discretized Pendulum and Mountain Car, and
//! random test MDPs.
//!
//! The continuous dynamics are deterministic; stochasticity comes from a
//! finite additive noise on the control, so every kernel row is an exact
//! finite mixture of destination bins. Each cell is represented by a regular
//! grid of `cell_samples^2` start points (one point at the cell center when
//! `cell_samples = 1`), each carrying equal weight.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::mdp::TransitionKernel;

/// One continuous state dimension cut into equal-width bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub lower: f64,
    pub upper: f64,
    pub bins: usize,
}

impl Dimension {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Result<Self> {
        if !(lower < upper) || bins == 0 {
            return Err(input(format!("bad dimension [{lower}, {upper}] with {bins} bins")));
        }
        Ok(Self { lower, upper, bins })
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.bins as f64
    }

    /// Bin containing `x`; values outside the range go to the edge bins.
    pub fn bin(&self, x: f64) -> usize {
        let idx = ((x - self.lower) / self.width()).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.bins - 1)
        }
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lower + (bin as f64 + 0.5) * self.width()
    }

    /// The `k` evenly spaced sample points inside `bin`.
    fn sample_points(&self, bin: usize, k: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.width();
        let base = self.lower + bin as f64 * w;
        (0..k).map(move |j| base + (j as f64 + 0.5) / k as f64 * w)
    }
}

/// Grid over the state space plus the discrete control values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub dims: Vec<Dimension>,
    pub action_values: Vec<f64>,
    /// Start points per dimension inside each cell.
    pub cell_samples: usize,
}

impl DiscretizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.action_values.is_empty() || self.cell_samples == 0 {
            return Err(input("discretization needs dimensions, actions and cell samples"));
        }
        for d in &self.dims {
            Dimension::new(d.lower, d.upper, d.bins)?;
        }
        Ok(())
    }

    /// Angle in `[-pi, pi]` and angular velocity in `[-8, 8]`, torques
    /// `{-2, -1, 0, 1, 2}`.
    pub fn pendulum(bins: usize, cell_samples: usize) -> Self {
        Self {
            dims: vec![
                Dimension { lower: -PI, upper: PI, bins },
                Dimension { lower: -8.0, upper: 8.0, bins },
            ],
            action_values: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            cell_samples,
        }
    }

    /// Position in `[-1.2, 0.6]` and velocity in `[-0.07, 0.07]`, pushes
    /// `{-1, 0, 1}`.
    pub fn mountain_car(bins: usize, cell_samples: usize) -> Self {
        Self {
            dims: vec![
                Dimension { lower: -1.2, upper: 0.6, bins },
                Dimension { lower: -0.07, upper: 0.07, bins },
            ],
            action_values: vec![-1.0, 0.0, 1.0],
            cell_samples,
        }
    }

    pub fn n_states(&self) -> usize {
        self.dims.iter().map(|d| d.bins).product()
    }

    /// Row-major (first dimension slowest) state index of a bin tuple.
    pub fn state_of_bins(&self, bins: &[usize]) -> usize {
        self.dims
            .iter()
            .zip(bins)
            .fold(0, |acc, (d, &b)| acc * d.bins + b)
    }

    pub fn bins_of_state(&self, mut state: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = state % d.bins;
            state /= d.bins;
        }
        out
    }

    pub fn state_of_point(&self, point: &[f64]) -> usize {
        let bins: Vec<usize> = self.dims.iter().zip(point).map(|(d, &x)| d.bin(x)).collect();
        self.state_of_bins(&bins)
    }

    pub fn center_of_state(&self, state: usize) -> Vec<f64> {
        self.bins_of_state(state)
            .iter()
            .zip(&self.dims)
            .map(|(&b, d)| d.center(b))
            .collect()
    }

    /// Start points of a cell (Cartesian product of per-dimension points).
    fn cell_points(&self, state: usize) -> Vec<Vec<f64>> {
        let bins = self.bins_of_state(state);
        let mut points = vec![Vec::new()];
        for (d, &b) in self.dims.iter().zip(&bins) {
            let coords: Vec<f64> = d.sample_points(b, self.cell_samples).collect();
            points = points
                .into_iter()
                .flat_map(|p| {
                    coords.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    AdditiveControl,
}

/// Finite distribution of offsets added to the control before each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub support: Vec<(f64, f64)>,
}

impl NoiseModel {
    pub fn new(support: Vec<(f64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(input("noise support is empty"));
        }
        if support.iter().any(|(o, w)| !o.is_finite() || !(0.0..=1.0).contains(w)) {
            return Err(input("noise offsets must be finite and weights in [0, 1]"));
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(input(format!("noise weights sum to {total}")));
        }
        Ok(Self {
            kind: NoiseKind::AdditiveControl,
            support,
        })
    }

    /// `{(-sigma, 1/4), (0, 1/2), (+sigma, 1/4)}`.
    pub fn three_point(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::AdditiveControl,
            support: vec![(-sigma, 0.25), (0.0, 0.5), (sigma, 0.25)],
        }
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::AdditiveControl,
            support: vec![(0.0, 1.0)],
        }
    }
}

pub const PENDULUM_SIGMA: f64 = 0.5;
pub const MOUNTAIN_CAR_SIGMA: f64 = 0.0005;

/// One deterministic Pendulum step (g = 10, m = l = 1, dt = 0.05), angle 0
/// upright.
pub fn pendulum_step(theta: f64, velocity: f64, torque: f64) -> (f64, f64) {
    const G: f64 = 10.0;
    const M: f64 = 1.0;
    const L: f64 = 1.0;
    const DT: f64 = 0.05;
    let v = (velocity + (3.0 * G / (2.0 * L) * theta.sin() + 3.0 / (M * L * L) * torque) * DT).clamp(-8.0, 8.0);
    let th = theta + v * DT;
    (wrap_angle(th), v)
}

fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// One deterministic Mountain Car step; `force` is the velocity increment
/// supplied by the engine (0.001 per unit push).
pub fn mountain_car_step(position: f64, velocity: f64, force: f64) -> (f64, f64) {
    let mut v = (velocity + force - 0.0025 * (3.0 * position).cos()).clamp(-0.07, 0.07);
    let x = (position + v).clamp(-1.2, 0.6);
    if x <= -1.2 && v < 0.0 {
        v = 0.0;
    }
    (x, v)
}

fn build_kernel(
    spec: &DiscretizationSpec,
    noise: &NoiseModel,
    control: impl Fn(f64, f64) -> f64,
    step: impl Fn(&[f64], f64) -> Vec<f64>,
) -> Result<TransitionKernel> {
    spec.validate()?;
    NoiseModel::new(noise.support.clone())?;
    let n_states = spec.n_states();
    let n_actions = spec.action_values.len();
    let mut probs = vec![0.0; n_states * n_actions * n_states];
    for s in 0..n_states {
        let points = spec.cell_points(s);
        let n_points = points.len() as f64;
        for (a, &u) in spec.action_values.iter().enumerate() {
            let row = &mut probs[(s * n_actions + a) * n_states..(s * n_actions + a + 1) * n_states];
            for p in &points {
                for &(offset, w) in &noise.support {
                    let next = step(p, control(u, offset));
                    row[spec.state_of_point(&next)] += w;
                }
            }
            // Dividing the summed weights once keeps dyadic weights exact.
            for p in row.iter_mut() {
                *p = (*p / n_points).min(1.0);
            }
        }
    }
    TransitionKernel::new(n_states, n_actions, probs)
}

/// Tabular Pendulum kernel.
pub fn build_pendulum(spec: &DiscretizationSpec, noise: &NoiseModel) -> Result<TransitionKernel> {
    if spec.dims.len() != 2 {
        return Err(input("pendulum needs (angle, velocity) dimensions"));
    }
    build_kernel(spec, noise, |u, xi| u + xi, |p, u| {
        let (th, v) = pendulum_step(p[0], p[1], u);
        vec![th, v]
    })
}

/// Tabular Mountain Car kernel. Action values are push directions; the
/// noise offset is added to the engine force `0.001 * push`.
pub fn build_mountain_car(spec: &DiscretizationSpec, noise: &NoiseModel) -> Result<TransitionKernel> {
    if spec.dims.len() != 2 {
        return Err(input("mountain car needs (position, velocity) dimensions"));
    }
    build_kernel(spec, noise, |a, xi| 0.001 * a + xi, |p, f| {
        let (x, v) = mountain_car_step(p[0], p[1], f);
        vec![x, v]
    })
}

/// Whether every state can reach every other under some action sequence.
pub fn strongly_connected(kernel: &TransitionKernel) -> bool {
    let n = kernel.n_states();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for t in 0..n {
                if seen[t] {
                    continue;
                }
                let (from, to) = if forward { (s, t) } else { (t, s) };
                if (0..kernel.n_actions()).any(|a| kernel.prob(from, a, to) > 0.0) {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach(true) && reach(false)
}

/// Random MDP whose rows each put Dirichlet(1) weights on `branching`
/// distinct successors; resampled until strongly connected.
pub fn build_random_mdp(n_states: usize, n_actions: usize, branching: usize, seed: u64) -> Result<TransitionKernel> {
    if n_states == 0 || n_actions == 0 {
        return Err(input("random MDP needs states and actions"));
    }
    if branching == 0 || branching > n_states {
        return Err(input(format!("branching {branching} outside [1, {n_states}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut probs = vec![0.0; n_states * n_actions * n_states];
        for row in probs.chunks_mut(n_states) {
            let succ = sample(&mut rng, n_states, branching).into_vec();
            let raw: Vec<f64> = succ
                .iter()
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let total: f64 = raw.iter().sum();
            let mut assigned = 0.0;
            for (i, (&t, w)) in succ.iter().zip(&raw).enumerate() {
                let p = if i + 1 == succ.len() { 1.0 - assigned } else { w / total };
                row[t] = p;
                assigned += p;
            }
        }
        let kernel = TransitionKernel::new(n_states, n_actions, probs)?;
        if strongly_connected(&kernel) {
            return Ok(kernel);
        }
    }
}

/// A kernel together with the state every run starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub kernel: TransitionKernel,
    pub start_state: usize,
}

/// Declarative environment choice, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvSpec {
    Pendulum {
        bins: usize,
        #[serde(default = "pendulum_sigma")]
        noise_sigma: f64,
        #[serde(default = "cell_samples")]
        cell_samples: usize,
    },
    MountainCar {
        bins: usize,
        #[serde(default = "mountain_car_sigma")]
        noise_sigma: f64,
        #[serde(default = "cell_samples")]
        cell_samples: usize,
    },
    Random {
        states: usize,
        actions: usize,
        branching: usize,
        seed: u64,
    },
}

/// Start points per dimension used by the benchmark kernels.
pub const DEFAULT_CELL_SAMPLES: usize = 5;

fn pendulum_sigma() -> f64 {
    PENDULUM_SIGMA
}

fn mountain_car_sigma() -> f64 {
    MOUNTAIN_CAR_SIGMA
}

fn cell_samples() -> usize {
    DEFAULT_CELL_SAMPLES
}

impl EnvSpec {
    pub fn pendulum(bins: usize) -> Self {
        EnvSpec::Pendulum {
            bins,
            noise_sigma: PENDULUM_SIGMA,
            cell_samples: DEFAULT_CELL_SAMPLES,
        }
    }

    pub fn mountain_car(bins: usize) -> Self {
        EnvSpec::MountainCar {
            bins,
            noise_sigma: MOUNTAIN_CAR_SIGMA,
            cell_samples: DEFAULT_CELL_SAMPLES,
        }
    }

    pub fn name(&self) -> String {
        match self {
            EnvSpec::Pendulum { bins, .. } => format!("pendulum-{bins}x{bins}"),
            EnvSpec::MountainCar { bins, .. } => format!("mountain_car-{bins}x{bins}"),
            EnvSpec::Random { states, actions, .. } => format!("random-{states}x{actions}"),
        }
    }

    pub fn build(&self) -> Result<Environment> {
        let name = self.name();
        match *self {
            EnvSpec::Pendulum {
                bins,
                noise_sigma,
                cell_samples,
            } => {
                let spec = DiscretizationSpec::pendulum(bins, cell_samples);
                let kernel = build_pendulum(&spec, &NoiseModel::three_point(noise_sigma))?;
                // Hanging down at rest.
                let start_state = spec.state_of_point(&[PI, 0.0]);
                Ok(Environment { name, kernel, start_state })
            }
            EnvSpec::MountainCar {
                bins,
                noise_sigma,
                cell_samples,
            } => {
                let spec = DiscretizationSpec::mountain_car(bins, cell_samples);
                let kernel = build_mountain_car(&spec, &NoiseModel::three_point(noise_sigma))?;
                // Resting in the valley.
                let start_state = spec.state_of_point(&[-0.5, 0.0]);
                Ok(Environment { name, kernel, start_state })
            }
            EnvSpec::Random {
                states,
                actions,
                branching,
                seed,
            } => Ok(Environment {
                name,
                kernel: build_random_mdp(states, actions, branching, seed)?,
                start_state: 0,
            }),
        }
    }
}
