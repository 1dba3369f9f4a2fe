// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end analysis of one data set: fit, calibrate, segment, diagnose.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, ModelKind, DEFAULT_R_MAX};
use crate::detection::{ChangeKind, Detection};
use crate::detector::{Detector, Method};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::matrix::TimeSeriesMatrix;
use crate::penalties::{calibrate_beta, CalibrationSpec, NullModel, PenaltyConfig, PenaltySource};
use crate::rng::RandomSource;
use crate::wbs::DEFAULT_INTERVALS;

pub const OVERDISPERSION_WARNING: &str = "over-dispersed counts; negbin recommended";

#[derive(Clone, Debug, PartialEq)]
pub struct DetectOptions {
    pub model: ModelKind,
    /// Manual penalties; all three or none.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<f64>,
    pub target_fp: f64,
    pub calib_reps: usize,
    pub intervals: usize,
    pub seed: u64,
    /// One value for all variates, or one per variate.
    pub sigma: Option<Vec<f64>>,
    pub r_max: f64,
    pub postprocess: bool,
    /// Overrides for the count null used in calibration. By default each
    /// variate's null is a negative binomial matching its overall mean and
    /// estimated dispersion.
    pub null_r: Option<f64>,
    pub null_p: Option<f64>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            model: ModelKind::Gaussian,
            alpha: None,
            beta: None,
            k: None,
            target_fp: 0.05,
            calib_reps: 200,
            intervals: DEFAULT_INTERVALS,
            seed: 0,
            sigma: None,
            r_max: DEFAULT_R_MAX,
            postprocess: true,
            null_r: None,
            null_p: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPenalties {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub source: PenaltySource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDetection {
    pub tau: usize,
    pub time_label: Option<String>,
    pub kind: ChangeKind,
    pub affected: Vec<String>,
    pub statistic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    /// 1-based inclusive bounds.
    pub start: usize,
    pub end: usize,
    pub mean: f64,
}

/// Fitted piecewise-constant mean of one variate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariateSegments {
    pub name: String,
    /// Noise scale (Gaussian) or dispersion `r̂` (negbin).
    pub nuisance: f64,
    pub segments: Vec<SegmentFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Mean pairwise Pearson-residual correlation; absent when `d = 1`.
    pub mean_residual_correlation: Option<f64>,
    pub max_abs_residual_correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub d: usize,
    pub model: ModelKind,
    pub penalties: ReportPenalties,
    pub seed: u64,
    pub intervals: usize,
    pub detections: Vec<ReportDetection>,
    pub fits: Vec<VariateSegments>,
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        write_atomic(path, s.as_bytes())
    }

    /// One `(tau, time_label, variate, kind)` row per affected variate.
    pub fn pairs_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(e.to_string());
        w.write_record(["tau", "time_label", "variate", "kind"]).map_err(csv_err)?;
        for det in &self.detections {
            let kind = match det.kind {
                ChangeKind::Sparse => "sparse",
                ChangeKind::Dense => "dense",
            };
            for name in &det.affected {
                let tau = det.tau.to_string();
                let label = det.time_label.as_deref().unwrap_or("");
                w.write_record([tau.as_str(), label, name, kind]).map_err(csv_err)?;
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_pairs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.pairs_csv()?)
    }
}

/// Change positions that apply to variate `i`.
fn variate_taus(detections: &[Detection], i: usize) -> Vec<usize> {
    let mut taus: Vec<usize> = detections
        .iter()
        .filter(|e| e.affected.binary_search(&i).is_ok())
        .map(|e| e.tau)
        .collect();
    taus.sort_unstable();
    taus.dedup();
    taus
}

fn fit_segments(model: &CostModel, i: usize, taus: &[usize]) -> Result<Vec<SegmentFit>> {
    let n = model.n();
    let mut bounds = Vec::with_capacity(taus.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(taus);
    bounds.push(n);
    bounds
        .windows(2)
        .map(|w| {
            Ok(SegmentFit {
                start: w[0] + 1,
                end: w[1],
                mean: model.segment_mean(i, w[0] + 1, w[1])?,
            })
        })
        .collect()
}

/// Per-observation Pearson residuals under the segmentation: each variate is
/// split at the detections whose affected set contains it.
pub fn pearson_residuals(matrix: &TimeSeriesMatrix, model: &CostModel, detections: &[Detection]) -> Result<Vec<Vec<f64>>> {
    if matrix.d() != model.d() || matrix.n() != model.n() {
        return Err(Error::invalid("model was fitted to a different matrix"));
    }
    (0..matrix.d())
        .map(|i| {
            let y = matrix.row(i);
            let mut out = Vec::with_capacity(y.len());
            for seg in fit_segments(model, i, &variate_taus(detections, i))? {
                let mu = seg.mean;
                let sd = match model {
                    CostModel::Gaussian(g) => g.sigma()[i],
                    CostModel::Negbin(nb) => (mu * (1.0 + mu / nb.dispersion()[i])).sqrt(),
                };
                for &v in &y[seg.start - 1..seg.end] {
                    // A zero-mean count segment is all zeros: residual 0.
                    out.push(if sd > 0.0 { (v - mu) / sd } else { 0.0 });
                }
            }
            Ok(out)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualCorrelations {
    pub matrix: Vec<Vec<f64>>,
    pub mean_off_diagonal: Option<f64>,
    pub max_abs_off_diagonal: Option<f64>,
}

pub fn pearson_residual_correlations(
    matrix: &TimeSeriesMatrix,
    model: &CostModel,
    detections: &[Detection],
) -> Result<ResidualCorrelations> {
    let residuals = pearson_residuals(matrix, model, detections)?;
    let n = matrix.n() as f64;
    let centred: Vec<Vec<f64>> = residuals
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let m = r.iter().sum::<f64>() / n;
            let c: Vec<f64> = r.iter().map(|v| v - m).collect();
            let ss = c.iter().map(|v| v * v).sum::<f64>();
            if ss <= 1e-12 * n {
                return Err(Error::Numerical(format!(
                    "residuals of variate '{}' have zero variance",
                    matrix.variate_names()[i]
                )));
            }
            let norm = ss.sqrt();
            Ok(c.into_iter().map(|v| v / norm).collect())
        })
        .collect::<Result<_>>()?;
    let d = centred.len();
    let mut corr = vec![vec![1.0; d]; d];
    let (mut sum, mut max_abs, mut pairs) = (0.0, 0.0_f64, 0usize);
    for a in 0..d {
        for b in a + 1..d {
            let r = centred[a].iter().zip(&centred[b]).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
            corr[a][b] = r;
            corr[b][a] = r;
            sum += r;
            max_abs = max_abs.max(r.abs());
            pairs += 1;
        }
    }
    Ok(ResidualCorrelations {
        matrix: corr,
        mean_off_diagonal: (pairs > 0).then(|| sum / pairs as f64),
        max_abs_off_diagonal: (pairs > 0).then_some(max_abs),
    })
}

fn overdispersed(matrix: &TimeSeriesMatrix) -> bool {
    matrix.is_count_data()
        && matrix.rows().iter().any(|y| {
            let n = y.len() as f64;
            let m = y.iter().sum::<f64>() / n;
            let v = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            v > m
        })
}

fn manual_penalties(opts: &DetectOptions) -> Result<Option<PenaltyConfig>> {
    match (opts.alpha, opts.beta, opts.k) {
        (Some(a), Some(b), Some(k)) => PenaltyConfig::manual(a, b, k).map(Some),
        (None, None, None) => Ok(None),
        _ => Err(Error::invalid("--alpha, --beta and --K must be given together")),
    }
}

fn fit_model(matrix: &TimeSeriesMatrix, opts: &DetectOptions) -> Result<CostModel> {
    match opts.model {
        ModelKind::Gaussian => CostModel::gaussian(matrix, opts.sigma.as_deref()),
        ModelKind::Negbin => {
            if opts.sigma.is_some() {
                return Err(Error::invalid("--sigma applies only to the gaussian model"));
            }
            CostModel::negbin(matrix, opts.r_max)
        }
    }
}

/// Null model that mirrors how `model` was fitted to `matrix`.
fn null_for(matrix: &TimeSeriesMatrix, model: &CostModel, opts: &DetectOptions) -> Result<NullModel> {
    Ok(match model {
        CostModel::Gaussian(_) => NullModel::Gaussian {
            estimate_sigma: opts.sigma.is_none(),
        },
        CostModel::Negbin(nb) => {
            let r: Vec<f64> = match opts.null_r {
                Some(r) => vec![r; matrix.d()],
                None => nb.dispersion().to_vec(),
            };
            let p = match opts.null_p {
                Some(p) => vec![p; matrix.d()],
                None => matrix
                    .rows()
                    .iter()
                    .zip(&r)
                    .map(|(y, r)| r / (r + y.iter().sum::<f64>() / y.len() as f64))
                    .collect(),
            };
            if let Some(bad) = r.iter().chain(&p).find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::invalid(format!("invalid null parameter {bad}")));
            }
            NullModel::Negbin {
                r,
                p,
                r_max: opts.r_max,
            }
        }
    })
}

/// Runs the full pipeline. Calibration uses `seed` sub-stream 0 and the
/// interval draw sub-stream 1, so a fixed seed gives an identical report.
pub fn detect(matrix: &TimeSeriesMatrix, opts: &DetectOptions) -> Result<AnalysisReport> {
    let mut warnings = Vec::new();
    if opts.model == ModelKind::Gaussian && overdispersed(matrix) {
        warnings.push(OVERDISPERSION_WARNING.to_string());
    }
    let model = fit_model(matrix, opts)?;
    let (n, d) = (matrix.n(), matrix.d());
    let src = RandomSource::new(opts.seed);
    let penalties = match manual_penalties(opts)? {
        Some(p) => p,
        None => calibrate_beta(
            &CalibrationSpec {
                n,
                d,
                null: null_for(matrix, &model, opts)?,
                target_fp: opts.target_fp,
                reps: opts.calib_reps,
                intervals: opts.intervals,
            },
            src.derive(0),
        )?,
    };
    let mut detector = Detector::subset(penalties.clone(), opts.intervals);
    if let Method::Subset { raw, .. } = &mut detector.method {
        *raw = !opts.postprocess;
    }
    let result = detector.run(&model, src.derive(1))?;
    let names = matrix.variate_names();

    let fits = (0..d)
        .map(|i| {
            Ok(VariateSegments {
                name: names[i].clone(),
                nuisance: match &model {
                    CostModel::Gaussian(g) => g.sigma()[i],
                    CostModel::Negbin(nb) => nb.dispersion()[i],
                },
                segments: fit_segments(&model, i, &variate_taus(&result.detections, i))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = match pearson_residual_correlations(matrix, &model, &result.detections) {
        Ok(c) => Diagnostics {
            mean_residual_correlation: c.mean_off_diagonal,
            max_abs_residual_correlation: c.max_abs_off_diagonal,
        },
        Err(e) => {
            warnings.push(format!("residual diagnostics unavailable: {e}"));
            Diagnostics {
                mean_residual_correlation: None,
                max_abs_residual_correlation: None,
            }
        }
    };
    Ok(AnalysisReport {
        n,
        d,
        model: opts.model,
        penalties: ReportPenalties {
            alpha: penalties.alpha,
            beta: penalties.beta,
            k: penalties.k,
            source: penalties.source,
        },
        seed: opts.seed,
        intervals: opts.intervals,
        detections: result
            .detections
            .iter()
            .map(|e| ReportDetection {
                tau: e.tau,
                time_label: matrix.time_label(e.tau).map(str::to_string),
                kind: e.kind,
                affected: e.affected.iter().map(|&i| names[i].clone()).collect(),
                statistic: e.statistic,
            })
            .collect(),
        fits,
        diagnostics,
        warnings,
    })
}
