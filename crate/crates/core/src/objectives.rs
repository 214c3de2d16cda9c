//! The `U_kappa` estimation objectives over occupancy measures.
//!
//! For `kappa = 1`, `U(d) = sum c log d`; for `kappa > 1`,
//! `U(d) = sum c^kappa / (1 - kappa) * d^(1 - kappa)`. Both are separable and
//! concave with gradient `(c / d)^kappa`. Pairs with `c = 0` contribute
//! nothing to the value, the gradient or the worst-case ratio.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Curvature plus per-pair complexity weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    kappa: f64,
    complexities: Vec<f64>,
}

impl ObjectiveSpec {
    pub fn new(kappa: f64, complexities: Vec<f64>) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(input(format!("kappa = {kappa} must be a finite value >= 1")));
        }
        if complexities.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(input("complexities must be finite and nonnegative"));
        }
        Ok(Self {
            kappa,
            complexities,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn complexities(&self) -> &[f64] {
        &self.complexities
    }

    fn check_len(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.complexities.len() {
            return Err(input(format!(
                "occupancy has {} pairs, objective has {}",
                d.len(),
                self.complexities.len()
            )));
        }
        Ok(())
    }
}

fn domain(pair: usize, d: f64) -> Error {
    Error::Domain(format!("occupancy {d} at pair {pair} must be positive"))
}

/// `U_kappa(d)`. `d` may be any positive vector; it need not sum to one.
pub fn u_kappa(d: &[f64], spec: &ObjectiveSpec) -> Result<f64> {
    spec.check_len(d)?;
    let kappa = spec.kappa;
    let mut total = 0.0;
    for (pair, (&c, &x)) in spec.complexities.iter().zip(d).enumerate() {
        if c == 0.0 {
            continue;
        }
        if !(x > 0.0) {
            return Err(domain(pair, x));
        }
        total += if kappa == 1.0 {
            c * x.ln()
        } else {
            c.powf(kappa) / (1.0 - kappa) * x.powf(1.0 - kappa)
        };
    }
    Ok(total)
}

/// Entrywise `(c / d)^kappa`.
pub fn grad_u_kappa(d: &[f64], spec: &ObjectiveSpec) -> Result<Vec<f64>> {
    spec.check_len(d)?;
    spec.complexities
        .iter()
        .zip(d)
        .enumerate()
        .map(|(pair, (&c, &x))| {
            if c == 0.0 {
                Ok(0.0)
            } else if x > 0.0 {
                Ok((c / x).powf(spec.kappa))
            } else {
                Err(domain(pair, x))
            }
        })
        .collect()
}

fn ratios<'a>(c: &'a [f64], d: &'a [f64]) -> Result<impl Iterator<Item = f64> + 'a> {
    if c.len() != d.len() {
        return Err(input("complexity and occupancy lengths differ"));
    }
    if let Some((pair, x)) = c
        .iter()
        .zip(d)
        .enumerate()
        .find(|(_, (c, x))| **c > 0.0 && !(**x > 0.0))
        .map(|(i, (_, x))| (i, *x))
    {
        return Err(domain(pair, x));
    }
    Ok(c.iter()
        .zip(d)
        .map(|(&c, &x)| if c == 0.0 { 0.0 } else { c / x }))
}

/// Average-case objective `-(1/SA) sum c / d`.
pub fn v_avg(c: &[f64], d: &[f64]) -> Result<f64> {
    let n = c.len() as f64;
    Ok(-ratios(c, d)?.sum::<f64>() / n)
}

/// Worst-case objective `-max c / d`; zero when every complexity is zero.
pub fn v_worst(c: &[f64], d: &[f64]) -> Result<f64> {
    Ok(-ratios(c, d)?.fold(0.0, f64::max))
}

/// Gradient-Lipschitz constant of `U_kappa` on occupancies bounded below by
/// `2 eta`: `kappa c_max^kappa / (2^(kappa+1) eta^(kappa+1))`.
pub fn smoothness_constant(c_max: f64, kappa: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(input(format!("eta = {eta} must be positive")));
    }
    if !(kappa >= 1.0) {
        return Err(input(format!("kappa = {kappa} must be >= 1")));
    }
    Ok(kappa * c_max.powf(kappa) / (2.0 * eta).powf(kappa + 1.0))
}
