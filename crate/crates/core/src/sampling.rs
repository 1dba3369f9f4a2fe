// SPDX-License-Identifier: MIT OR Apache-2.0

//! Random draws used by the simulators and the null-model calibration.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Negative binomial draw with `P(y) = C(y+r-1, y) (1-p)^y p^r`, via the
/// gamma-Poisson mixture. Mean `r(1-p)/p`.
pub fn negbin<R: Rng + ?Sized>(rng: &mut R, r: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "negative binomial probability must lie in (0,1), got {p}"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!(
            "negative binomial size must be positive, got {r}"
        )));
    }
    let gamma = Gamma::new(r, (1.0 - p) / p).map_err(|e| Error::invalid(e.to_string()))?;
    let lambda: f64 = gamma.sample(rng);
    if lambda <= 0.0 || !lambda.is_finite() {
        return Ok(0.0);
    }
    let pois = Poisson::new(lambda).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(pois.sample(rng))
}

/// `rows × n` matrix of independent standard normal noise.
pub fn gaussian_noise<R: Rng + ?Sized>(rng: &mut R, rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..n).map(|_| standard_normal(rng)).collect())
        .collect()
}
