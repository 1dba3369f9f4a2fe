// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multivariate changepoint detection with a penalty that adapts between
//! sparse changes (few variates) and dense changes (many variates).
//!
//! A candidate change at `t` in interval `l..=u` is scored per variate by the
//! likelihood gain `D_i = C(l:u) − C(l:t) − C(t+1:u)`. The sparse branch pays
//! `β + α` per included variate, the dense branch pays the cap `K` once:
//!
//! ```text
//! S_t = max( Σ_i max(D_i − α, 0) − β ,  Σ_i D_i − K )
//! ```
//!
//! Multiple changes are found with wild binary segmentation and the affected
//! sets refined by a per-variate dynamic program.
//!
//! ```
//! use subset_core::{CostModel, Detector, PenaltyConfig, RandomSource, TimeSeriesMatrix};
//!
//! let mut rows = vec![vec![0.0; 100]; 3];
//! for t in 50..100 {
//!     rows[1][t] = 3.0;
//! }
//! let m = TimeSeriesMatrix::from_rows(rows).unwrap();
//! let model = CostModel::gaussian(&m, Some(&[1.0])).unwrap();
//! let pen = PenaltyConfig::theoretical(100, 3, 1.0, 0.1).unwrap();
//! let result = Detector::subset(pen, 50).run(&model, RandomSource::new(1)).unwrap();
//! assert_eq!(result.taus(), vec![50]);
//! assert_eq!(result.detections[0].affected, vec![1]);
//! ```

pub mod analysis;
pub mod baselines;
pub mod costs;
pub mod detection;
pub mod detector;
pub mod error;
pub mod io;
pub mod matrix;
pub mod penalties;
pub mod postprocess;
pub mod rng;
pub mod sampling;
pub mod simlab;
pub mod single_change;
pub mod wbs;

pub use analysis::{detect, AnalysisReport, DetectOptions};
pub use baselines::{BaselineConfig, BaselineMethod};
pub use costs::{CostModel, ModelKind};
pub use detection::{ChangeKind, Detection, SegmentationResult};
pub use detector::{Detector, Method, MethodKind};
pub use error::{Error, Result};
pub use io::read_csv;
pub use matrix::TimeSeriesMatrix;
pub use penalties::{PenaltyConfig, PenaltySource};
pub use rng::RandomSource;
pub use simlab::{named_scenario, GroundTruth, MetricsReport, ScenarioParams, ScenarioSpec};
