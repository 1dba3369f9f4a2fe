// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::costs::ModelKind;
use crate::penalties::PenaltyConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    /// Found through the `β + α·|S|` branch; carries an explicit affected set.
    Sparse,
    /// Found through the capped `K` branch; all variates labelled.
    Dense,
}

/// One estimated changepoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Last index of the pre-change segment, `1 <= tau <= n - 1`.
    pub tau: usize,
    pub kind: ChangeKind,
    /// Sorted 0-based variate indices.
    pub affected: Vec<usize>,
    /// Value of the aggregated statistic that triggered the detection.
    pub statistic: f64,
    /// 1-based inclusive interval the detection was found on.
    pub interval: (usize, usize),
}

/// Thresholds the detector ran with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum DetectorSettings {
    Subset(PenaltyConfig),
    Baseline(BaselineConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    /// Sorted by `tau`, strictly increasing.
    pub detections: Vec<Detection>,
    pub settings: DetectorSettings,
    pub model: ModelKind,
    pub seed: u64,
    pub n_intervals: usize,
}

impl SegmentationResult {
    pub fn taus(&self) -> Vec<usize> {
        self.detections.iter().map(|d| d.tau).collect()
    }

    pub fn penalties(&self) -> Option<&PenaltyConfig> {
        match &self.settings {
            DetectorSettings::Subset(p) => Some(p),
            DetectorSettings::Baseline(_) => None,
        }
    }
}
