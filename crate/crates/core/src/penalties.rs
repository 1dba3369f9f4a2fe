// SPDX-License-Identifier: MIT OR Apache-2.0

//! Penalty constants `(α, β, K)` for `Pen(p) = min(β + αp, K)`.
//!
//! Defaults follow the Gaussian false-positive bound: `α = 2 ln d`,
//! `β = (J + ε) ln n`, `K = β + d + √(2βd)`. Because that bound is
//! conservative, [`calibrate_beta`] instead tunes `β` by simulation, keeping
//! `α` and the `β → K` relationship fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::costs::{CostModel, GaussianCost, NegBinCost, DEFAULT_R_MAX};
use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::rng::RandomSource;
use crate::sampling;
use crate::single_change::IntervalExtremes;
use crate::wbs;

/// Upper end of the bisection bracket for `β`.
pub const BETA_BRACKET_MAX: f64 = 1.0e6;
/// Absolute tolerance of the per-dataset `β*` bisection.
pub const BETA_TOLERANCE: f64 = 1.0e-3;
/// Smallest number of null replicates accepted by [`calibrate_beta`].
pub const MIN_CALIBRATION_REPS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltySource {
    Theoretical,
    Calibrated,
    Manual,
}

impl std::fmt::Display for PenaltySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltySource::Theoretical => "theoretical",
            PenaltySource::Calibrated => "calibrated",
            PenaltySource::Manual => "manual",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub source: PenaltySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calib_reps: Option<usize>,
}

/// `K(β) = β + d + √(2βd)`.
pub fn dense_cap(beta: f64, d: usize) -> f64 {
    let d = d as f64;
    beta + d + (2.0 * beta * d).sqrt()
}

/// `α = 2 ln d`.
pub fn default_alpha(d: usize) -> f64 {
    2.0 * (d as f64).ln()
}

fn require_dimension(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid(format!(
            "d = {d}: automatic penalties need d >= 2; supply alpha, beta and K manually"
        )));
    }
    Ok(())
}

impl PenaltyConfig {
    /// Explicit constants; requires `α, β >= 0` and `K >= β`.
    pub fn manual(alpha: f64, beta: f64, k: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && k.is_finite()) {
            return Err(Error::invalid("penalties must be finite"));
        }
        if alpha < 0.0 || beta < 0.0 {
            return Err(Error::invalid(format!(
                "alpha and beta must be non-negative (alpha = {alpha}, beta = {beta})"
            )));
        }
        if k < beta {
            return Err(Error::invalid(format!("K = {k} must be at least beta = {beta}")));
        }
        Ok(Self {
            alpha,
            beta,
            k,
            source: PenaltySource::Manual,
            target_fp: None,
            calib_reps: None,
        })
    }

    /// Defaults from the false-positive bound with `β = (J + ε) ln n`.
    pub fn theoretical(n: usize, d: usize, j: f64, eps: f64) -> Result<Self> {
        require_dimension(d)?;
        if n < 2 || !(j > 0.0) || !(eps > 0.0) {
            return Err(Error::invalid(format!(
                "theoretical penalties need n >= 2, J > 0, eps > 0 (n = {n}, J = {j}, eps = {eps})"
            )));
        }
        let beta = (j + eps) * (n as f64).ln();
        Ok(Self {
            alpha: default_alpha(d),
            beta,
            k: dense_cap(beta, d),
            source: PenaltySource::Theoretical,
            target_fp: None,
            calib_reps: None,
        })
    }

    /// `α = 2 ln d` and `K = K(β)` around a calibrated `β`.
    pub fn calibrated(d: usize, beta: f64, target_fp: f64, reps: usize) -> Result<Self> {
        require_dimension(d)?;
        Ok(Self {
            alpha: default_alpha(d),
            beta,
            k: dense_cap(beta, d),
            source: PenaltySource::Calibrated,
            target_fp: Some(target_fp),
            calib_reps: Some(reps),
        })
    }
}

/// Sparse-branch `β` from the type-I bound for the soft-thresholded sum:
/// `(√(2d·q) + C√(ln n))²` with `q = Γ(½, α/2)/Γ(½) = erfc(√(ln d))` at
/// `α = 2 ln d`.
pub fn sparse_beta_bound(n: usize, d: usize, c: f64) -> Result<f64> {
    require_dimension(d)?;
    if n < 2 || !(c > 0.0) {
        return Err(Error::invalid(format!("need n >= 2 and C > 0 (n = {n}, C = {c})")));
    }
    let q = erfc((d as f64).ln().sqrt());
    let root = (2.0 * d as f64 * q).sqrt() + c * (n as f64).ln().sqrt();
    Ok(root * root)
}

/// Data-generating model used for calibration under no change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NullModel {
    /// Unit-variance white noise. With `estimate_sigma` the detector
    /// re-estimates the scale on every replicate, otherwise it uses `σ = 1`.
    Gaussian { estimate_sigma: bool },
    /// Independent `Neg-Bin(r_i, p_i)` per variate; dispersion is always
    /// re-estimated per replicate, as the detector would.
    Negbin { r: Vec<f64>, p: Vec<f64>, r_max: f64 },
}

impl NullModel {
    pub fn gaussian() -> Self {
        NullModel::Gaussian {
            estimate_sigma: false,
        }
    }

    pub fn negbin_uniform(d: usize, r: f64, p: f64) -> Self {
        NullModel::Negbin {
            r: vec![r; d],
            p: vec![p; d],
            r_max: DEFAULT_R_MAX,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if let NullModel::Negbin { r, p, .. } = self {
            if r.len() != d || p.len() != d {
                return Err(Error::invalid(format!(
                    "null model has {} sizes and {} probabilities for d = {d}",
                    r.len(),
                    p.len()
                )));
            }
        }
        Ok(())
    }

    pub fn simulate(&self, n: usize, d: usize, src: RandomSource) -> Result<TimeSeriesMatrix> {
        let mut rng = src.rng();
        let rows = match self {
            NullModel::Gaussian { .. } => sampling::gaussian_noise(&mut rng, d, n),
            NullModel::Negbin { r, p, .. } => (0..d)
                .map(|i| {
                    (0..n)
                        .map(|_| sampling::negbin(&mut rng, r[i], p[i]))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
        };
        TimeSeriesMatrix::from_rows(rows)
    }

    /// Cost model the detector would fit to a replicate.
    pub fn fit(&self, matrix: &TimeSeriesMatrix) -> Result<CostModel> {
        match self {
            NullModel::Gaussian { estimate_sigma } => {
                let unit = [1.0];
                let sigma = (!estimate_sigma).then_some(&unit[..]);
                GaussianCost::new(matrix, sigma).map(CostModel::Gaussian)
            }
            NullModel::Negbin { r_max, .. } => NegBinCost::new(matrix, *r_max).map(CostModel::Negbin),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSpec {
    pub n: usize,
    pub d: usize,
    pub null: NullModel,
    pub target_fp: f64,
    pub reps: usize,
    /// Random intervals per replicate; 0 runs the plain full-interval scan.
    pub intervals: usize,
}

/// Smallest `β` (to [`BETA_TOLERANCE`]) at which neither branch fires,
/// given the interval-wide extremes of `Σ D'` and `Σ D`.
///
/// Both branches are non-increasing in `β` (`K` tracks `β`), so the
/// no-detection region is a half-line and bisection finds its edge.
pub fn minimal_beta(extremes: IntervalExtremes, d: usize) -> Result<f64> {
    let quiet = |beta: f64| extremes.soft <= beta && extremes.total <= dense_cap(beta, d);
    if quiet(0.0) {
        return Ok(0.0);
    }
    if !quiet(BETA_BRACKET_MAX) {
        return Err(Error::Numerical(format!(
            "beta bracket exhausted at {BETA_BRACKET_MAX}: statistic {extremes:?} never silenced"
        )));
    }
    let (mut lo, mut hi) = (0.0, BETA_BRACKET_MAX);
    while hi - lo > BETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if quiet(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Order statistic at rank `⌈q·len⌉` (1-based) of `values`.
pub(crate) fn empirical_quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

pub(crate) fn check_calibration(target_fp: f64, reps: usize, min_reps: usize) -> Result<()> {
    if reps == 0 || reps < min_reps {
        return Err(Error::invalid(format!(
            "calibration needs at least {min_reps} replicates, got {reps}"
        )));
    }
    if !(target_fp > 0.0 && target_fp < 1.0) {
        return Err(Error::invalid(format!("target_fp must lie in (0,1), got {target_fp}")));
    }
    Ok(())
}

/// Per-replicate `β*` values for a calibration run.
pub fn null_minimal_betas(spec: &CalibrationSpec, src: RandomSource) -> Result<Vec<f64>> {
    require_dimension(spec.d)?;
    spec.null.validate(spec.d)?;
    let alpha = default_alpha(spec.d);
    (0..spec.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let rep_src = src.derive(rep);
            let data = spec.null.simulate(spec.n, spec.d, rep_src.derive(0))?;
            let model = spec.null.fit(&data)?;
            let intervals = wbs::draw_intervals(spec.n, spec.intervals, rep_src.derive(1))?;
            let extremes = wbs::extremes(&model, alpha, &intervals);
            minimal_beta(extremes, spec.d)
        })
        .collect()
}

/// Tunes `β` so that a fraction `target_fp` of null datasets report a change.
pub fn calibrate_beta(spec: &CalibrationSpec, src: RandomSource) -> Result<PenaltyConfig> {
    check_calibration(spec.target_fp, spec.reps, MIN_CALIBRATION_REPS)?;
    let mut betas = null_minimal_betas(spec, src)?;
    let beta = empirical_quantile(&mut betas, 1.0 - spec.target_fp);
    PenaltyConfig::calibrated(spec.d, beta, spec.target_fp, spec.reps)
}
