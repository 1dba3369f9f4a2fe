// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-variate segment costs `C(y_{i,s:t}) = -2 · max log-likelihood`.
//!
//! Both models precompute prefix tables of length `n + 1` (entry 0 is zero),
//! after which any segment cost or split gain is O(1).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;

/// Dispersion used when a series shows no over-dispersion (`v <= m`).
pub const DEFAULT_R_MAX: f64 = 1.0e4;

/// Normal consistency constant for the median absolute deviation.
const MAD_CONSISTENCY: f64 = 0.6745;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gaussian,
    Negbin,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Negbin => "negbin",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ModelKind::Gaussian),
            "negbin" => Ok(ModelKind::Negbin),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected gaussian or negbin)"
            ))),
        }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn scale_estimate(y: &[f64]) -> Option<f64> {
    if y.len() < 2 {
        return None;
    }
    let mut diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let centre = median(&mut diffs);
    let mut dev: Vec<f64> = diffs.iter().map(|x| (x - centre).abs()).collect();
    let sigma = median(&mut dev) / (MAD_CONSISTENCY * std::f64::consts::SQRT_2);
    (sigma > 0.0 && sigma.is_finite()).then_some(sigma)
}

/// Noise scale from the median absolute deviation of first differences.
pub fn estimate_sigma(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::invalid("scale estimate needs at least 2 points"));
    }
    scale_estimate(y).ok_or(Error::ZeroScale { variate: 0 })
}

/// Method-of-moments over-dispersion `m² / (v − m)`, capped at `r_max`.
///
/// Returns `r_max` when the sample variance does not exceed the mean.
pub fn estimate_dispersion(y: &[f64], r_max: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::invalid("dispersion estimate needs at least 2 points"));
    }
    if let Some((index, &value)) = y
        .iter()
        .enumerate()
        .find(|(_, v)| **v < 0.0 || v.fract() != 0.0)
    {
        return Err(Error::NotCounts {
            variate: 0,
            index: index + 1,
            value,
        });
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateCounts { variate: 0 });
    }
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let v = y.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    if v <= m {
        return Ok(r_max);
    }
    Ok((m * m / (v - m)).min(r_max))
}

fn prefix(xs: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for x in xs {
        acc += x;
        out.push(acc);
    }
    out
}

/// Gaussian change in mean with known per-variate scale.
///
/// Data are stored standardised, `z = (y − ȳ) / σ`, so costs are in units of
/// `σ²` and large offsets do not erode precision.
#[derive(Clone, Debug)]
pub struct GaussianCost {
    sigma: Vec<f64>,
    offset: Vec<f64>,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
}

impl GaussianCost {
    /// `sigma = None` estimates each scale with [`estimate_sigma`].
    pub fn new(matrix: &TimeSeriesMatrix, sigma: Option<&[f64]>) -> Result<Self> {
        let d = matrix.d();
        let sigma: Vec<f64> = match sigma {
            Some(s) if s.len() == d => s.to_vec(),
            Some(s) if s.len() == 1 => vec![s[0]; d],
            Some(s) => {
                return Err(Error::invalid(format!(
                    "{} sigma values supplied for {d} variates",
                    s.len()
                )))
            }
            None => (0..d)
                .map(|i| scale_estimate(matrix.row(i)).ok_or(Error::ZeroScale { variate: i }))
                .collect::<Result<_>>()?,
        };
        if let Some(i) = sigma.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!(
                "sigma for variate {i} must be positive, got {}",
                sigma[i]
            )));
        }
        let n = matrix.n();
        let mut offset = Vec::with_capacity(d);
        let mut sum = Vec::with_capacity(d);
        let mut sum_sq = Vec::with_capacity(d);
        for (i, row) in matrix.rows().iter().enumerate() {
            let mean = row.iter().sum::<f64>() / n as f64;
            let s = sigma[i];
            sum.push(prefix(row.iter().map(|y| (y - mean) / s), n));
            sum_sq.push(prefix(row.iter().map(|y| ((y - mean) / s).powi(2)), n));
            offset.push(mean);
        }
        Ok(Self {
            sigma,
            offset,
            sum,
            sum_sq,
        })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    #[inline]
    fn cost(&self, i: usize, s: usize, t: usize) -> f64 {
        let len = (t - s + 1) as f64;
        let sy = self.sum[i][t] - self.sum[i][s - 1];
        let sq = self.sum_sq[i][t] - self.sum_sq[i][s - 1];
        (sq - sy * sy / len).max(0.0)
    }

    #[inline]
    fn gain(&self, i: usize, l: usize, t: usize, u: usize) -> f64 {
        let p = &self.sum[i];
        let left = (t - l + 1) as f64;
        let right = (u - t) as f64;
        let diff = (p[u] - p[t]) / right - (p[t] - p[l - 1]) / left;
        left * right / (left + right) * diff * diff
    }

    fn mean(&self, i: usize, s: usize, t: usize) -> f64 {
        let len = (t - s + 1) as f64;
        self.offset[i] + self.sigma[i] * (self.sum[i][t] - self.sum[i][s - 1]) / len
    }
}

/// Negative binomial change in success probability with a fixed,
/// per-variate dispersion estimated once over the full series.
#[derive(Clone, Debug)]
pub struct NegBinCost {
    r: Vec<f64>,
    sum: Vec<Vec<f64>>,
    log_binom: Vec<Vec<f64>>,
}

/// `Sy·ln(1−p̂) + L·r·ln p̂` at `p̂ = L r / (L r + Sy)`, with `0·ln 0 = 0`.
#[inline]
fn negbin_profile(sy: f64, lr: f64) -> f64 {
    if sy <= 0.0 {
        return 0.0;
    }
    let total = lr + sy;
    sy * (sy / total).ln() + lr * (lr / total).ln()
}

impl NegBinCost {
    /// Estimates each dispersion by method of moments, capped at `r_max`.
    pub fn new(matrix: &TimeSeriesMatrix, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::invalid(format!("r_max must be positive, got {r_max}")));
        }
        let r = (0..matrix.d())
            .map(|i| {
                estimate_dispersion(matrix.row(i), r_max).map_err(|e| match e {
                    Error::DegenerateCounts { .. } => Error::DegenerateCounts { variate: i },
                    Error::NotCounts { index, value, .. } => Error::NotCounts {
                        variate: i,
                        index,
                        value,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_dispersion(matrix, &r)
    }

    /// Uses the supplied dispersions instead of estimating them.
    pub fn with_dispersion(matrix: &TimeSeriesMatrix, r: &[f64]) -> Result<Self> {
        if r.len() != matrix.d() {
            return Err(Error::invalid(format!(
                "{} dispersions supplied for {} variates",
                r.len(),
                matrix.d()
            )));
        }
        if let Some(i) = r.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!(
                "dispersion for variate {i} must be positive, got {}",
                r[i]
            )));
        }
        let n = matrix.n();
        let mut sum = Vec::with_capacity(r.len());
        let mut log_binom = Vec::with_capacity(r.len());
        for (i, row) in matrix.rows().iter().enumerate() {
            if let Some(j) = row.iter().position(|v| *v < 0.0 || v.fract() != 0.0) {
                return Err(Error::NotCounts {
                    variate: i,
                    index: j + 1,
                    value: row[j],
                });
            }
            let ri = r[i];
            let lg_r = ln_gamma(ri);
            sum.push(prefix(row.iter().copied(), n));
            log_binom.push(prefix(
                row.iter().map(|&y| {
                    if y == 0.0 {
                        0.0
                    } else {
                        ln_gamma(y + ri) - lg_r - ln_gamma(y + 1.0)
                    }
                }),
                n,
            ));
        }
        Ok(Self {
            r: r.to_vec(),
            sum,
            log_binom,
        })
    }

    pub fn dispersion(&self) -> &[f64] {
        &self.r
    }

    #[inline]
    fn profile(&self, i: usize, s: usize, t: usize) -> f64 {
        let sy = self.sum[i][t] - self.sum[i][s - 1];
        negbin_profile(sy, (t - s + 1) as f64 * self.r[i])
    }

    #[inline]
    fn cost(&self, i: usize, s: usize, t: usize) -> f64 {
        let lb = self.log_binom[i][t] - self.log_binom[i][s - 1];
        -2.0 * (lb + self.profile(i, s, t))
    }

    #[inline]
    fn gain(&self, i: usize, l: usize, t: usize, u: usize) -> f64 {
        // Binomial-coefficient terms cancel between the split and the whole.
        2.0 * (self.profile(i, l, t) + self.profile(i, t + 1, u) - self.profile(i, l, u))
    }

    fn mean(&self, i: usize, s: usize, t: usize) -> f64 {
        (self.sum[i][t] - self.sum[i][s - 1]) / (t - s + 1) as f64
    }
}

/// A fitted per-variate segment cost.
#[derive(Clone, Debug)]
pub enum CostModel {
    Gaussian(GaussianCost),
    Negbin(NegBinCost),
}

impl CostModel {
    pub fn gaussian(matrix: &TimeSeriesMatrix, sigma: Option<&[f64]>) -> Result<Self> {
        GaussianCost::new(matrix, sigma).map(CostModel::Gaussian)
    }

    pub fn negbin(matrix: &TimeSeriesMatrix, r_max: f64) -> Result<Self> {
        NegBinCost::new(matrix, r_max).map(CostModel::Negbin)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            CostModel::Gaussian(_) => ModelKind::Gaussian,
            CostModel::Negbin(_) => ModelKind::Negbin,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            CostModel::Gaussian(g) => g.sum.len(),
            CostModel::Negbin(nb) => nb.sum.len(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CostModel::Gaussian(g) => g.sum[0].len() - 1,
            CostModel::Negbin(nb) => nb.sum[0].len() - 1,
        }
    }

    fn check_segment(&self, i: usize, s: usize, t: usize) -> Result<()> {
        if i >= self.d() {
            return Err(Error::invalid(format!(
                "variate {i} out of range for d = {}",
                self.d()
            )));
        }
        if s == 0 || s > t || t > self.n() {
            return Err(Error::invalid(format!(
                "segment ({s}, {t}) must satisfy 1 <= s <= t <= {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// Cost of the 1-based inclusive segment `s..=t` of variate `i`.
    pub fn cost(&self, i: usize, s: usize, t: usize) -> Result<f64> {
        self.check_segment(i, s, t)?;
        Ok(self.cost_unchecked(i, s, t))
    }

    #[inline]
    pub(crate) fn cost_unchecked(&self, i: usize, s: usize, t: usize) -> f64 {
        match self {
            CostModel::Gaussian(g) => g.cost(i, s, t),
            CostModel::Negbin(nb) => nb.cost(i, s, t),
        }
    }

    /// `cost(l,u) − cost(l,t) − cost(t+1,u)`, clamped at zero.
    #[inline]
    pub(crate) fn gain_unchecked(&self, i: usize, l: usize, t: usize, u: usize) -> f64 {
        let g = match self {
            CostModel::Gaussian(g) => g.gain(i, l, t, u),
            CostModel::Negbin(nb) => nb.gain(i, l, t, u),
        };
        g.max(0.0)
    }

    /// Maximum-likelihood segment mean on the original scale.
    pub fn segment_mean(&self, i: usize, s: usize, t: usize) -> Result<f64> {
        self.check_segment(i, s, t)?;
        Ok(match self {
            CostModel::Gaussian(g) => g.mean(i, s, t),
            CostModel::Negbin(nb) => nb.mean(i, s, t),
        })
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        match self {
            CostModel::Gaussian(g) => Some(g.sigma()),
            CostModel::Negbin(_) => None,
        }
    }

    pub fn dispersion(&self) -> Option<&[f64]> {
        match self {
            CostModel::Gaussian(_) => None,
            CostModel::Negbin(nb) => Some(nb.dispersion()),
        }
    }
}
