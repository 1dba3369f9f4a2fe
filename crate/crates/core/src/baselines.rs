// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM-aggregation comparators: Mean, Max and Bin-Weight.
//!
//! All three use the interval-local standardised CUSUM
//! `W_{i,t} = σ⁻¹ √(L₁L₂/L) |ȳ_right − ȳ_left|`, which satisfies `W² = D` for
//! the Gaussian model, and run inside the same WBS driver as SUBSET.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, ModelKind};
use crate::detection::{ChangeKind, Detection};
use crate::error::{Error, Result};
use crate::penalties::{check_calibration, empirical_quantile, NullModel, MIN_CALIBRATION_REPS};
use crate::rng::RandomSource;
use crate::wbs::{self, IntervalScanner, IntervalSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Mean,
    Max,
    Binweight,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 3] = [BaselineMethod::Mean, BaselineMethod::Max, BaselineMethod::Binweight];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Mean => "mean",
            BaselineMethod::Max => "max",
            BaselineMethod::Binweight => "binweight",
        }
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(BaselineMethod::Mean),
            "max" => Ok(BaselineMethod::Max),
            "binweight" | "bin-weight" => Ok(BaselineMethod::Binweight),
            other => Err(Error::invalid(format!(
                "unknown baseline '{other}' (expected mean, max or binweight)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Detection threshold `β_b`.
    pub threshold: f64,
    /// Bin-Weight's hard threshold `α_b`; ignored by Mean and Max.
    pub hard_threshold: f64,
}

/// `√(2 ln n)`, the Bin-Weight threshold used for benchmark parity.
pub fn default_hard_threshold(n: usize) -> f64 {
    (2.0 * (n as f64).ln()).sqrt()
}

/// `√(2 ln d)`, the alternative Bin-Weight threshold.
pub fn dimension_hard_threshold(d: usize) -> f64 {
    (2.0 * (d as f64).ln()).sqrt()
}

pub(crate) fn require_gaussian(model: &CostModel) -> Result<()> {
    if model.kind() != ModelKind::Gaussian {
        return Err(Error::invalid(
            "CUSUM baselines are defined for the Gaussian model only",
        ));
    }
    Ok(())
}

/// Standardised CUSUM of variate `i` at split `t` on `l..=u`.
pub fn cusum(model: &CostModel, i: usize, l: usize, u: usize, t: usize) -> Result<f64> {
    require_gaussian(model)?;
    if l == 0 || u > model.n() || t < l || t >= u || i >= model.d() {
        return Err(Error::invalid(format!(
            "cusum arguments out of range: i = {i}, l = {l}, t = {t}, u = {u}"
        )));
    }
    Ok(model.gain_unchecked(i, l, t, u).sqrt())
}

fn aggregate(method: BaselineMethod, w: &[f64], hard_threshold: f64) -> f64 {
    match method {
        BaselineMethod::Mean => w.iter().sum::<f64>() / w.len() as f64,
        BaselineMethod::Max => w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        BaselineMethod::Binweight => w.iter().filter(|&&x| x > hard_threshold).sum(),
    }
}

/// Aggregated CUSUM minus the threshold; a detection when positive.
pub fn baseline_statistic(w: &[f64], config: &BaselineConfig) -> f64 {
    aggregate(config.method, w, config.hard_threshold) - config.threshold
}

/// Unthresholded aggregate at every split of `l..=u`, indexed by `t − l`.
fn profile(model: &CostModel, method: BaselineMethod, hard_threshold: f64, l: usize, u: usize) -> Vec<f64> {
    let len = u - l;
    let d = model.d();
    let mut acc = vec![
        match method {
            BaselineMethod::Max => f64::NEG_INFINITY,
            _ => 0.0,
        };
        len
    ];
    for i in 0..d {
        for (k, t) in (l..u).enumerate() {
            let w = model.gain_unchecked(i, l, t, u).sqrt();
            match method {
                BaselineMethod::Mean => acc[k] += w,
                BaselineMethod::Max => acc[k] = acc[k].max(w),
                BaselineMethod::Binweight => {
                    if w > hard_threshold {
                        acc[k] += w
                    }
                }
            }
        }
    }
    if method == BaselineMethod::Mean {
        for a in &mut acc {
            *a /= d as f64;
        }
    }
    acc
}

pub struct BaselineScanner<'a> {
    pub model: &'a CostModel,
    pub config: &'a BaselineConfig,
}

impl IntervalScanner for BaselineScanner<'_> {
    fn scan(&self, l: usize, u: usize) -> Option<Detection> {
        let prof = profile(self.model, self.config.method, self.config.hard_threshold, l, u);
        let mut best = (l, f64::NEG_INFINITY);
        for (k, v) in prof.iter().enumerate() {
            if *v > best.1 {
                best = (l + k, *v);
            }
        }
        let statistic = best.1 - self.config.threshold;
        (statistic > 0.0).then(|| Detection {
            tau: best.0,
            kind: ChangeKind::Dense,
            affected: (0..self.model.d()).collect(),
            statistic,
            interval: (l, u),
        })
    }
}

/// Baseline detector inside wild binary segmentation; every detection
/// reports all variates.
pub fn baseline_wbs(model: &CostModel, config: &BaselineConfig, intervals: &IntervalSet) -> Result<Vec<Detection>> {
    require_gaussian(model)?;
    if intervals.n() != model.n() {
        return Err(Error::invalid("interval set does not match series length"));
    }
    Ok(wbs::segment(&BaselineScanner { model, config }, intervals))
}

/// Maximum unthresholded statistic over every stored interval.
pub fn null_maximum(model: &CostModel, method: BaselineMethod, hard_threshold: f64, intervals: &IntervalSet) -> f64 {
    intervals
        .pairs()
        .par_iter()
        .filter(|(l, u)| u - l > 1)
        .map(|&(l, u)| {
            profile(model, method, hard_threshold, l, u)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Threshold at the `1 − target_fp` quantile of the null maximum statistic.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_threshold(
    method: BaselineMethod,
    hard_threshold: f64,
    n: usize,
    d: usize,
    target_fp: f64,
    reps: usize,
    intervals: usize,
    src: RandomSource,
) -> Result<BaselineConfig> {
    check_calibration(target_fp, reps, MIN_CALIBRATION_REPS)?;
    let null = NullModel::gaussian();
    let mut maxima = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let rep_src = src.derive(rep);
            let data = null.simulate(n, d, rep_src.derive(0))?;
            let model = null.fit(&data)?;
            let set = wbs::draw_intervals(n, intervals, rep_src.derive(1))?;
            Ok(null_maximum(&model, method, hard_threshold, &set))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BaselineConfig {
        method,
        threshold: empirical_quantile(&mut maxima, 1.0 - target_fp),
        hard_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::TimeSeriesMatrix;
    use proptest::prelude::*;

    fn cfg(method: BaselineMethod, threshold: f64, hard: f64) -> BaselineConfig {
        BaselineConfig {
            method,
            threshold,
            hard_threshold: hard,
        }
    }

    #[test]
    fn statistic_examples() {
        let w = [3.0, 1.0];
        assert_eq!(baseline_statistic(&w, &cfg(BaselineMethod::Mean, 1.0, 0.0)), 1.0);
        assert_eq!(baseline_statistic(&w, &cfg(BaselineMethod::Max, 4.0, 0.0)), -1.0);
        assert_eq!(baseline_statistic(&w, &cfg(BaselineMethod::Binweight, 1.0, 2.0)), 2.0);
    }

    #[test]
    fn cusum_examples() {
        let m = TimeSeriesMatrix::from_rows(vec![vec![0.0, 0.0, 2.0, 2.0], vec![1.0; 4]]).unwrap();
        let model = CostModel::gaussian(&m, Some(&[1.0])).unwrap();
        assert!((cusum(&model, 0, 1, 4, 2).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(cusum(&model, 1, 1, 4, 2).unwrap(), 0.0);
        assert!(cusum(&model, 0, 1, 4, 4).is_err());
    }

    #[test]
    fn negbin_model_is_rejected() {
        let m = TimeSeriesMatrix::from_rows(vec![vec![1.0, 3.0, 2.0, 5.0]]).unwrap();
        let model = CostModel::negbin(&m, 1e4).unwrap();
        assert!(cusum(&model, 0, 1, 4, 2).is_err());
    }

    #[test]
    fn default_thresholds() {
        assert!((default_hard_threshold(1000) - (2.0 * 1000f64.ln()).sqrt()).abs() < 1e-12);
        assert!((dimension_hard_threshold(12) - (2.0 * 12f64.ln()).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn statistics_are_monotone_in_each_component(
            w in prop::collection::vec(0.0f64..10.0, 1..12),
            k in 0usize..12,
            bump in 0.0f64..5.0,
        ) {
            let k = k % w.len();
            let mut up = w.clone();
            up[k] += bump;
            for method in BaselineMethod::ALL {
                let c = cfg(method, 1.0, 2.0);
                prop_assert!(baseline_statistic(&up, &c) >= baseline_statistic(&w, &c));
            }
        }
    }
}
