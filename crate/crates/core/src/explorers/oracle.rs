//! Reference optimum `d*` of `U_kappa` over the floored occupancy polytope of
//! a known kernel, by away-step Frank-Wolfe with exact line search.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::kernel_complexities;
use crate::mdp::{OccupancyMeasure, TransitionKernel};
use crate::objectives::{grad_u_kappa, u_kappa, ObjectiveSpec};
use crate::planner::exact_direction;

const MAX_ITERATIONS: usize = 5000;
const GAP_TOL: f64 = 1e-6;
const BISECTIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapOracle {
    pub spec: ObjectiveSpec,
    pub d_star: OccupancyMeasure,
    /// `U_kappa(d*)`.
    pub value: f64,
    /// Frank-Wolfe duality gap at `d*`, an upper bound on its suboptimality.
    pub duality_gap: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(d: &[f64], dir: &[f64], lambda: f64) -> Vec<f64> {
    d.iter().zip(dir).map(|(x, y)| x + lambda * y).collect()
}

/// Linear maximizer for gradient `grad`; the gradient is rescaled to unit
/// max norm before reaching the LP, which leaves the argmax unchanged.
fn vertex(grad: &[f64], kernel: &TransitionKernel, eta: f64) -> Result<Vec<f64>> {
    let scale = grad.iter().copied().fold(0.0, f64::max);
    let weights: Vec<f64> = if scale > 0.0 {
        grad.iter().map(|g| g / scale).collect()
    } else {
        grad.to_vec()
    };
    Ok(exact_direction(&weights, kernel, eta)?.mass().to_vec())
}

/// Largest `lambda` in `[0, max]` along `dir` where the directional
/// derivative is still nonnegative; it decreases in `lambda` by concavity.
fn line_search(d: &[f64], dir: &[f64], max: f64, spec: &ObjectiveSpec) -> Result<f64> {
    let slope = |lambda: f64| -> Result<f64> { Ok(dot(&grad_u_kappa(&axpy(d, dir, lambda), spec)?, dir)) };
    if slope(max)? >= 0.0 {
        return Ok(max);
    }
    let (mut lo, mut hi) = (0.0, max);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl GapOracle {
    /// Maximizes `U_kappa` with the true complexities of `kernel` over
    /// stationary occupancies whose entries are at least `2 eta`.
    pub fn new(kernel: &TransitionKernel, kappa: f64, eta: f64) -> Result<Self> {
        let spec = ObjectiveSpec::new(kappa, kernel_complexities(kernel))?;
        let n_pairs = kernel.n_pairs();
        let first = vertex(&vec![1.0; n_pairs], kernel, eta)?;
        let mut d = first.clone();
        // The iterate as a convex combination of LP vertices.
        let mut active: Vec<(Vec<f64>, f64)> = vec![(first, 1.0)];
        let mut duality_gap = f64::INFINITY;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            let grad = grad_u_kappa(&d, &spec)?;
            let v = vertex(&grad, kernel, eta)?;
            let toward: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a - b).collect();
            duality_gap = dot(&grad, &toward).max(0.0);
            if duality_gap <= GAP_TOL {
                break;
            }
            iterations += 1;
            let (away_idx, away_score) = active
                .iter()
                .enumerate()
                .map(|(i, (a, _))| (i, dot(&grad, a)))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("active set is never empty");
            let away_gap = dot(&grad, &d) - away_score;
            if duality_gap >= away_gap || active.len() == 1 {
                let lambda = line_search(&d, &toward, 1.0, &spec)?;
                for (_, w) in active.iter_mut() {
                    *w *= 1.0 - lambda;
                }
                match active.iter_mut().find(|(a, _)| a.iter().zip(&v).all(|(x, y)| (x - y).abs() < 1e-12)) {
                    Some((_, w)) => *w += lambda,
                    None => active.push((v, lambda)),
                }
                d = axpy(&d, &toward, lambda);
            } else {
                let weight = active[away_idx].1;
                let max = weight / (1.0 - weight);
                let away: Vec<f64> = d.iter().zip(&active[away_idx].0).map(|(a, b)| a - b).collect();
                let lambda = line_search(&d, &away, max, &spec)?;
                for (_, w) in active.iter_mut() {
                    *w *= 1.0 + lambda;
                }
                active[away_idx].1 -= lambda;
                d = axpy(&d, &away, lambda);
            }
            active.retain(|(_, w)| *w > 1e-14);
        }
        let value = u_kappa(&d, &spec)?;
        let d_star = OccupancyMeasure::from_solver(kernel.n_states(), kernel.n_actions(), d)?;
        Ok(Self {
            spec,
            d_star,
            value,
            duality_gap,
            iterations,
        })
    }

    /// `U_kappa(d*) - U_kappa(d_hat)`.
    pub fn gap(&self, d_hat: &[f64]) -> Result<f64> {
        Ok(self.value - u_kappa(d_hat, &self.spec)?)
    }
}
