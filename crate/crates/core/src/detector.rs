// SPDX-License-Identifier: MIT OR Apache-2.0

//! One entry point for running SUBSET or a baseline on a fitted model.

use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_wbs, require_gaussian, BaselineConfig, BaselineMethod, BaselineScanner};
use crate::costs::CostModel;
use crate::detection::{DetectorSettings, SegmentationResult};
use crate::error::{Error, Result};
use crate::penalties::PenaltyConfig;
use crate::postprocess::{postprocess, PostprocessOptions};
use crate::rng::RandomSource;
use crate::single_change::scan_interval;
use crate::wbs::{draw_intervals, subset_wbs, IntervalScanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Subset,
    Mean,
    Max,
    Binweight,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [MethodKind::Subset, MethodKind::Mean, MethodKind::Max, MethodKind::Binweight];

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Subset => "subset",
            MethodKind::Mean => "mean",
            MethodKind::Max => "max",
            MethodKind::Binweight => "binweight",
        }
    }

    pub fn baseline(&self) -> Option<BaselineMethod> {
        match self {
            MethodKind::Subset => None,
            MethodKind::Mean => Some(BaselineMethod::Mean),
            MethodKind::Max => Some(BaselineMethod::Max),
            MethodKind::Binweight => Some(BaselineMethod::Binweight),
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subset" => Ok(MethodKind::Subset),
            other => other
                .parse::<BaselineMethod>()
                .map(|b| match b {
                    BaselineMethod::Mean => MethodKind::Mean,
                    BaselineMethod::Max => MethodKind::Max,
                    BaselineMethod::Binweight => MethodKind::Binweight,
                })
                .map_err(|_| Error::invalid(format!(
                    "unknown method '{other}' (expected subset, mean, max or binweight)"
                ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Subset {
        penalties: PenaltyConfig,
        postprocess: PostprocessOptions,
        /// Skip the post-processing DP altogether.
        raw: bool,
    },
    Baseline(BaselineConfig),
}

/// A fully configured detector.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub method: Method,
    /// Random intervals for WBS; 0 gives plain binary segmentation.
    pub intervals: usize,
    /// At-most-one-change mode: a single scan of the full series.
    pub amoc: bool,
}

impl Detector {
    pub fn subset(penalties: PenaltyConfig, intervals: usize) -> Self {
        Self {
            method: Method::Subset {
                penalties,
                postprocess: PostprocessOptions::default(),
                raw: false,
            },
            intervals,
            amoc: false,
        }
    }

    pub fn baseline(config: BaselineConfig, intervals: usize) -> Self {
        Self {
            method: Method::Baseline(config),
            intervals,
            amoc: false,
        }
    }

    pub fn amoc(mut self) -> Self {
        self.amoc = true;
        self
    }

    pub fn kind(&self) -> MethodKind {
        match &self.method {
            Method::Subset { .. } => MethodKind::Subset,
            Method::Baseline(c) => match c.method {
                BaselineMethod::Mean => MethodKind::Mean,
                BaselineMethod::Max => MethodKind::Max,
                BaselineMethod::Binweight => MethodKind::Binweight,
            },
        }
    }

    /// Runs the detector; `src` drives the interval draw.
    pub fn run(&self, model: &CostModel, src: RandomSource) -> Result<SegmentationResult> {
        let n = model.n();
        let detections = match (&self.method, self.amoc) {
            (Method::Subset { penalties, .. }, true) => {
                scan_interval(model, penalties, 1, n)?.into_iter().collect()
            }
            (Method::Baseline(config), true) => {
                let scanner = BaselineScanner { model, config };
                require_gaussian(model)?;
                scanner.scan(1, n).into_iter().collect()
            }
            (Method::Subset { penalties, postprocess: opts, raw }, false) => {
                let intervals = draw_intervals(n, self.intervals, src)?;
                let candidates = subset_wbs(model, penalties, &intervals)?;
                if *raw {
                    candidates
                } else {
                    postprocess(model, penalties.alpha, &candidates, *opts)?
                }
            }
            (Method::Baseline(config), false) => {
                let intervals = draw_intervals(n, self.intervals, src)?;
                baseline_wbs(model, config, &intervals)?
            }
        };
        let settings = match &self.method {
            Method::Subset { penalties, .. } => DetectorSettings::Subset(penalties.clone()),
            Method::Baseline(c) => DetectorSettings::Baseline(*c),
        };
        Ok(SegmentationResult {
            detections,
            settings,
            model: model.kind(),
            seed: src.seed,
            n_intervals: if self.amoc { 0 } else { self.intervals },
        })
    }
}
