// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation scenarios and evaluation metrics.
//!
//! A change is *missed* when no estimate lies within `⌈ln n⌉` of it; an
//! estimate is a *false alarm* when no true change lies within `⌈ln n⌉`.
//! Matching is by window only, so one estimate may cover several changes.
//!
//! For at-most-one-change testing, power is the plain detection rate: the
//! share of replicates containing a change in which the test fires at all.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{calibrate_threshold, default_hard_threshold};
use crate::costs::{CostModel, DEFAULT_R_MAX};
use crate::detection::{ChangeKind, Detection};
use crate::detector::{Detector, MethodKind};
use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::penalties::{calibrate_beta, CalibrationSpec, NullModel};
use crate::rng::RandomSource;
use crate::sampling;

/// Change times of the three-change scenarios at `n = 1000`.
pub const MULTI_CHANGE_TIMES: [usize; 3] = [600, 783, 926];
/// Epidemic "surge" on the third variate.
pub const SURGE_TIMES: [usize; 2] = [280, 320];
pub const SURGE_VARIATE: usize = 2;
/// The first and seventh variates, used by the sparse changes at `d = 12`.
pub const SMALL_SPARSE_VARIATES: [usize; 2] = [0, 6];
pub const GAUSSIAN_SURGE_MAGNITUDE: f64 = 5.0;
pub const NEGBIN_BASE_P: f64 = 0.5;

pub const VALID_SCENARIOS: [&str; 10] = [
    "A", "B", "C", "D", "E", "Aprime", "Bprime", "Cprime", "Dprime", "amoc",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AffectedSpec {
    All,
    /// Fraction of variates, drawn at random per replicate (at least one).
    Density(f64),
    /// Explicit 0-based variates.
    Variates(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSpec {
    pub tau: usize,
    pub affected: AffectedSpec,
    /// Mean shift (Gaussian) or decrease in success probability (negbin).
    pub magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    Gaussian,
    Negbin { r: f64, base_p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    AmocGauss,
    MultiGauss,
    SmallGauss,
    SmallNegbin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub n: usize,
    pub d: usize,
    pub changes: Vec<ChangeSpec>,
    /// Adds an up-and-back change pair at [`SURGE_TIMES`] on the third variate.
    pub surge: bool,
    pub surge_magnitude: f64,
    pub noise: Noise,
}

fn letter_pattern(letter: char, small: bool) -> Result<[AffectedSpec; 3]> {
    use AffectedSpec::*;
    let sparse = || {
        if small {
            Variates(SMALL_SPARSE_VARIATES.to_vec())
        } else {
            Density(0.005)
        }
    };
    Ok(match (letter, small) {
        ('A', _) => [All, All, All],
        ('B', _) => [All, sparse(), All],
        ('C', _) => [sparse(), All, sparse()],
        ('D', true) => [sparse(), sparse(), sparse()],
        ('D', false) => [Density(0.01), Density(0.01), Density(0.01)],
        ('E', false) => [Density(0.005), Density(0.01), Density(0.05)],
        _ => {
            return Err(Error::invalid(format!(
                "unknown scenario '{letter}{}'; valid names: {}",
                if small { "prime" } else { "" },
                VALID_SCENARIOS.join(", ")
            )))
        }
    })
}

impl ScenarioSpec {
    /// Single change at `tau` affecting a fraction `density` of variates.
    pub fn amoc_gauss(n: usize, d: usize, tau: usize, density: f64, delta: f64) -> Self {
        Self {
            name: "amoc".into(),
            kind: ScenarioKind::AmocGauss,
            n,
            d,
            changes: vec![ChangeSpec {
                tau,
                affected: if density >= 1.0 {
                    AffectedSpec::All
                } else {
                    AffectedSpec::Density(density)
                },
                magnitude: delta,
            }],
            surge: false,
            surge_magnitude: 0.0,
            noise: Noise::Gaussian,
        }
    }

    /// Scenarios A–E: three changes, times scaled from `n = 1000`.
    pub fn multi_gauss(letter: char, n: usize, d: usize, delta: f64) -> Result<Self> {
        let pattern = letter_pattern(letter, false)?;
        let changes = MULTI_CHANGE_TIMES
            .iter()
            .zip(pattern)
            .map(|(&t, affected)| ChangeSpec {
                tau: ((t * n) as f64 / 1000.0).round() as usize,
                affected,
                magnitude: delta,
            })
            .collect();
        Ok(Self {
            name: letter.to_string(),
            kind: ScenarioKind::MultiGauss,
            n,
            d,
            changes,
            surge: false,
            surge_magnitude: 0.0,
            noise: Noise::Gaussian,
        })
    }

    fn small(letter: char, kind: ScenarioKind, noise: Noise, magnitude: f64, surge: bool, surge_magnitude: f64) -> Result<Self> {
        let pattern = letter_pattern(letter, true)?;
        Ok(Self {
            name: format!("{letter}prime"),
            kind,
            n: 1000,
            d: 12,
            changes: MULTI_CHANGE_TIMES
                .iter()
                .zip(pattern)
                .map(|(&tau, affected)| ChangeSpec {
                    tau,
                    affected,
                    magnitude,
                })
                .collect(),
            surge,
            surge_magnitude,
            noise,
        })
    }

    /// Scenarios A′–D′ at `n = 1000`, `d = 12` with Gaussian noise.
    pub fn small_gauss(letter: char, delta: f64, surge: bool) -> Result<Self> {
        Self::small(letter, ScenarioKind::SmallGauss, Noise::Gaussian, delta, surge, GAUSSIAN_SURGE_MAGNITUDE)
    }

    /// Scenarios A′–D′ with `Neg-Bin(r, p)` counts, `p` starting at 0.5.
    pub fn small_negbin(letter: char, r: f64, dp: f64, surge: bool) -> Result<Self> {
        Self::small(
            letter,
            ScenarioKind::SmallNegbin,
            Noise::Negbin { r, base_p: NEGBIN_BASE_P },
            dp,
            surge,
            dp,
        )
    }

    /// All changes in time order, including the surge pair.
    pub fn all_changes(&self) -> Vec<ChangeSpec> {
        let mut out = self.changes.clone();
        if self.surge {
            out.push(ChangeSpec {
                tau: SURGE_TIMES[0],
                affected: AffectedSpec::Variates(vec![SURGE_VARIATE]),
                magnitude: self.surge_magnitude,
            });
            out.push(ChangeSpec {
                tau: SURGE_TIMES[1],
                affected: AffectedSpec::Variates(vec![SURGE_VARIATE]),
                magnitude: -self.surge_magnitude,
            });
        }
        out.sort_by_key(|c| c.tau);
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.d == 0 {
            return Err(Error::invalid(format!("scenario needs n >= 3 and d >= 1 (n = {}, d = {})", self.n, self.d)));
        }
        let changes = self.all_changes();
        for w in changes.windows(2) {
            if w[0].tau >= w[1].tau {
                return Err(Error::invalid(format!("change times must be strictly increasing: {} then {}", w[0].tau, w[1].tau)));
            }
        }
        for c in &changes {
            if c.tau == 0 || c.tau >= self.n {
                return Err(Error::invalid(format!("change time {} outside 1..={}", c.tau, self.n - 1)));
            }
            match &c.affected {
                AffectedSpec::Density(f) if !(*f > 0.0 && *f <= 1.0) => {
                    return Err(Error::invalid(format!("density {f} outside (0, 1]")))
                }
                AffectedSpec::Variates(v) if v.iter().any(|&i| i >= self.d) => {
                    return Err(Error::invalid(format!("affected variates {v:?} exceed d = {}", self.d)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The same scenario with every change removed.
    pub fn null(&self) -> Self {
        Self {
            changes: Vec::new(),
            surge: false,
            ..self.clone()
        }
    }

    pub fn null_model(&self) -> NullModel {
        match self.noise {
            Noise::Gaussian => NullModel::gaussian(),
            Noise::Negbin { r, base_p } => NullModel::negbin_uniform(self.d, r, base_p),
        }
    }

    /// Cost model the simulations use: known unit variance, or
    /// method-of-moments dispersion for counts.
    pub fn fit(&self, matrix: &TimeSeriesMatrix) -> Result<CostModel> {
        match self.noise {
            Noise::Gaussian => CostModel::gaussian(matrix, Some(&[1.0])),
            Noise::Negbin { .. } => CostModel::negbin(matrix, DEFAULT_R_MAX),
        }
    }
}

/// Free parameters for [`named_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    /// Length and dimension; the primed scenarios are fixed at 1000 × 12.
    pub n: usize,
    pub d: usize,
    /// Mean shift, or decrease in `p` for counts.
    pub delta: f64,
    pub surge: bool,
    /// Negative binomial size; `None` gives Gaussian noise.
    pub negbin_r: Option<f64>,
    /// Single-change scenario only.
    pub density: f64,
    pub tau: Option<usize>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 1000,
            delta: 1.0,
            surge: false,
            negbin_r: None,
            density: 1.0,
            tau: None,
        }
    }
}

/// Looks up one of [`VALID_SCENARIOS`].
pub fn named_scenario(name: &str, params: &ScenarioParams) -> Result<ScenarioSpec> {
    let unknown = || Error::invalid(format!("unknown scenario '{name}'; valid names: {}", VALID_SCENARIOS.join(", ")));
    if name == "amoc" {
        if params.negbin_r.is_some() {
            return Err(Error::invalid("the single-change scenario is Gaussian only"));
        }
        let tau = params.tau.unwrap_or(params.n / 2);
        let spec = ScenarioSpec::amoc_gauss(params.n, params.d, tau, params.density, params.delta);
        spec.validate()?;
        return Ok(spec);
    }
    let mut chars = name.chars();
    let letter = chars.next().ok_or_else(unknown)?;
    match chars.as_str() {
        "" => {
            if params.negbin_r.is_some() || params.surge {
                return Err(Error::invalid(format!("scenario {name} is Gaussian without surge")));
            }
            ScenarioSpec::multi_gauss(letter, params.n, params.d, params.delta).map_err(|_| unknown())
        }
        "prime" => match params.negbin_r {
            None => ScenarioSpec::small_gauss(letter, params.delta, params.surge),
            Some(r) => ScenarioSpec::small_negbin(letter, r, params.delta, params.surge),
        }
        .map_err(|_| unknown()),
        _ => Err(unknown()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueChange {
    pub tau: usize,
    pub affected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub d: usize,
    pub changes: Vec<TrueChange>,
    /// Both surge changes are counted as true changes.
    pub surge_counted_as_two: bool,
}

/// Draws one dataset and its ground truth.
pub fn generate(spec: &ScenarioSpec, src: RandomSource) -> Result<(TimeSeriesMatrix, GroundTruth)> {
    spec.validate()?;
    let mut rng = src.rng();
    let (n, d) = (spec.n, spec.d);
    let resolved: Vec<(usize, Vec<usize>, f64)> = spec
        .all_changes()
        .into_iter()
        .map(|c| {
            let mut affected = match c.affected {
                AffectedSpec::All => (0..d).collect(),
                AffectedSpec::Density(f) => {
                    let k = ((f * d as f64).round() as usize).clamp(1, d);
                    sample(&mut rng, d, k).into_vec()
                }
                AffectedSpec::Variates(v) => v,
            };
            affected.sort_unstable();
            affected.dedup();
            (c.tau, affected, c.magnitude)
        })
        .collect();

    let mut params = vec![
        match spec.noise {
            Noise::Gaussian => 0.0,
            Noise::Negbin { base_p, .. } => base_p,
        };
        d
    ];
    let mut rows = vec![Vec::with_capacity(n); d];
    let mut next = 0;
    for j in 1..=n {
        while next < resolved.len() && resolved[next].0 < j {
            let (_, affected, magnitude) = &resolved[next];
            for &i in affected {
                match spec.noise {
                    Noise::Gaussian => params[i] += magnitude,
                    Noise::Negbin { .. } => {
                        params[i] -= magnitude;
                        if !(params[i] > 0.0 && params[i] < 1.0) {
                            return Err(Error::invalid(format!(
                                "negative binomial probability {} for variate {i} after time {} leaves (0,1)",
                                params[i], resolved[next].0
                            )));
                        }
                    }
                }
            }
            next += 1;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(match spec.noise {
                Noise::Gaussian => params[i] + sampling::standard_normal(&mut rng),
                Noise::Negbin { r, .. } => sampling::negbin(&mut rng, r, params[i])?,
            });
        }
    }
    let truth = GroundTruth {
        d,
        changes: resolved
            .into_iter()
            .filter(|(_, a, m)| *m != 0.0 && !a.is_empty())
            .map(|(tau, affected, _)| TrueChange { tau, affected })
            .collect(),
        surge_counted_as_two: spec.surge,
    };
    Ok((TimeSeriesMatrix::from_rows(rows)?, truth))
}

/// `⌈ln n⌉`.
pub fn tolerance(n: usize) -> usize {
    (n as f64).ln().ceil() as usize
}

/// Raw outcome of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub missed: usize,
    pub false_alarms: usize,
    pub n_true: usize,
    /// At least one detection, wherever it lies.
    pub detected: bool,
    /// Per matched sparse detection.
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub taus: Vec<usize>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn evaluate_replicate(detections: &[Detection], truth: &GroundTruth, n: usize) -> ReplicateOutcome {
    let tol = tolerance(n);
    let near = |a: usize, b: usize| a.abs_diff(b) <= tol;
    let missed = truth
        .changes
        .iter()
        .filter(|c| !detections.iter().any(|e| near(e.tau, c.tau)))
        .count();
    let false_alarms = detections
        .iter()
        .filter(|e| !truth.changes.iter().any(|c| near(e.tau, c.tau)))
        .count();
    let mut tpr = Vec::new();
    let mut fpr = Vec::new();
    for e in detections.iter().filter(|e| e.kind == ChangeKind::Sparse) {
        let Some(c) = truth
            .changes
            .iter()
            .filter(|c| near(e.tau, c.tau))
            .min_by_key(|c| c.tau.abs_diff(e.tau))
        else {
            continue;
        };
        let hits = e.affected.iter().filter(|i| c.affected.contains(i)).count();
        tpr.push(hits as f64 / c.affected.len() as f64);
        let negatives = truth.d - c.affected.len();
        if negatives > 0 {
            fpr.push((e.affected.len() - hits) as f64 / negatives as f64);
        }
    }
    ReplicateOutcome {
        missed,
        false_alarms,
        n_true: truth.changes.len(),
        detected: !detections.is_empty(),
        tpr,
        fpr,
        taus: detections.iter().map(|e| e.tau).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub reps: usize,
    pub avg_missed: f64,
    pub avg_false_alarms: f64,
    /// Replicate standard deviations of the two averages.
    pub sd_missed: f64,
    pub sd_false_alarms: f64,
    /// Share of replicates with a true change in which nothing was detected.
    pub type2_rate: f64,
    /// Fraction of true changes missed.
    pub missed_rate: f64,
    /// Mean over matched sparse detections; `None` when there were none.
    pub affected_tpr: Option<f64>,
    pub affected_fpr: Option<f64>,
    pub affected_matches: usize,
    /// Estimated change location → count.
    pub location_histogram: BTreeMap<usize, usize>,
    pub surge_counted_as_two: bool,
}

impl MetricsReport {
    pub fn from_outcomes(outcomes: &[ReplicateOutcome], surge_counted_as_two: bool) -> Self {
        let reps = outcomes.len().max(1) as f64;
        let total_true: usize = outcomes.iter().map(|o| o.n_true).sum();
        let missed: usize = outcomes.iter().map(|o| o.missed).sum();
        let tpr: Vec<f64> = outcomes.iter().flat_map(|o| o.tpr.iter().copied()).collect();
        let fpr: Vec<f64> = outcomes.iter().flat_map(|o| o.fpr.iter().copied()).collect();
        let with_change: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.n_true > 0).collect();
        let undetected = with_change.iter().filter(|o| !o.detected).count();
        let mut location_histogram = BTreeMap::new();
        for t in outcomes.iter().flat_map(|o| &o.taus) {
            *location_histogram.entry(*t).or_insert(0) += 1;
        }
        let sd = |f: fn(&ReplicateOutcome) -> usize| {
            if outcomes.len() < 2 {
                return 0.0;
            }
            let xs: Vec<f64> = outcomes.iter().map(|o| f(o) as f64).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        Self {
            reps: outcomes.len(),
            sd_missed: sd(|o| o.missed),
            sd_false_alarms: sd(|o| o.false_alarms),
            avg_missed: missed as f64 / reps,
            avg_false_alarms: outcomes.iter().map(|o| o.false_alarms).sum::<usize>() as f64 / reps,
            type2_rate: if with_change.is_empty() { 0.0 } else { undetected as f64 / with_change.len() as f64 },
            missed_rate: if total_true == 0 { 0.0 } else { missed as f64 / total_true as f64 },
            affected_tpr: mean(&tpr),
            affected_fpr: mean(&fpr),
            affected_matches: tpr.len(),
            location_histogram,
            surge_counted_as_two,
        }
    }

    pub fn power(&self) -> f64 {
        1.0 - self.type2_rate
    }
}

/// Metrics for a single segmentation.
pub fn evaluate(detections: &[Detection], truth: &GroundTruth, n: usize) -> MetricsReport {
    MetricsReport::from_outcomes(&[evaluate_replicate(detections, truth, n)], truth.surge_counted_as_two)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: String,
    pub method: MethodKind,
    pub report: MetricsReport,
    pub outcomes: Vec<ReplicateOutcome>,
    pub seed: u64,
}

/// Runs `reps` independent replicates. Replicate `k` uses the sub-stream
/// `src.derive(k)`, so results do not depend on scheduling.
pub fn run_experiment(spec: &ScenarioSpec, detector: &Detector, reps: usize, src: RandomSource) -> Result<Experiment> {
    if reps == 0 {
        return Err(Error::invalid("an experiment needs at least one replicate"));
    }
    spec.validate()?;
    let outcomes = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let rep_src = src.derive(rep);
            let (data, truth) = generate(spec, rep_src.derive(0))?;
            let model = spec.fit(&data)?;
            let result = detector.run(&model, rep_src.derive(1))?;
            Ok(evaluate_replicate(&result.detections, &truth, spec.n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        scenario: spec.name.clone(),
        method: detector.kind(),
        report: MetricsReport::from_outcomes(&outcomes, spec.surge),
        outcomes,
        seed: src.seed,
    })
}

/// Calibrates a detector on the scenario's no-change version.
pub fn calibrate_for(
    spec: &ScenarioSpec,
    method: MethodKind,
    target_fp: f64,
    calib_reps: usize,
    intervals: usize,
    amoc: bool,
    src: RandomSource,
) -> Result<Detector> {
    let m = if amoc { 0 } else { intervals };
    let detector = match method.baseline() {
        None => {
            let spec = CalibrationSpec {
                n: spec.n,
                d: spec.d,
                null: spec.null_model(),
                target_fp,
                reps: calib_reps,
                intervals: m,
            };
            Detector::subset(calibrate_beta(&spec, src)?, intervals)
        }
        Some(b) => {
            if spec.noise != Noise::Gaussian {
                return Err(Error::invalid("baselines are only defined for Gaussian scenarios"));
            }
            let config = calibrate_threshold(b, default_hard_threshold(spec.n), spec.n, spec.d, target_fp, calib_reps, m, src)?;
            Detector::baseline(config, intervals)
        }
    };
    Ok(if amoc { detector.amoc() } else { detector })
}

/// Detection rate at each magnitude, with the same replicate seeds at every
/// point.
pub fn power_curve(
    spec_at: impl Fn(f64) -> ScenarioSpec,
    deltas: &[f64],
    detector: &Detector,
    reps: usize,
    src: RandomSource,
) -> Result<Vec<(f64, f64)>> {
    deltas
        .iter()
        .map(|&delta| Ok((delta, run_experiment(&spec_at(delta), detector, reps, src)?.report.power())))
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

/// Tab-separated per-replicate rows followed by a summary row.
pub fn render_experiment(exp: &Experiment) -> String {
    let mut out = String::from("rep\tseed\tstream\tmissed\tfalse_alarms\ttpr\tfpr\n");
    let root = RandomSource::new(exp.seed);
    for (k, o) in exp.outcomes.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k}\t{}\t{}\t{}\t{}\t{}\t{}",
            exp.seed,
            root.derive(k as u64).stream,
            o.missed,
            o.false_alarms,
            fmt_opt(mean(&o.tpr)),
            fmt_opt(mean(&o.fpr)),
        );
    }
    let r = &exp.report;
    let _ = writeln!(
        out,
        "summary\t{}\t-\t{:.4}\t{:.4}\t{}\t{}",
        exp.seed,
        r.avg_missed,
        r.avg_false_alarms,
        fmt_opt(r.affected_tpr),
        fmt_opt(r.affected_fpr),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(tau: usize, kind: ChangeKind, affected: Vec<usize>) -> Detection {
        Detection {
            tau,
            kind,
            affected,
            statistic: 1.0,
            interval: (1, 1000),
        }
    }

    fn truth(taus: &[usize], d: usize) -> GroundTruth {
        GroundTruth {
            d,
            changes: taus.iter().map(|&tau| TrueChange { tau, affected: vec![0] }).collect(),
            surge_counted_as_two: false,
        }
    }

    #[test]
    fn tolerance_is_ceil_natural_log() {
        assert_eq!(tolerance(1000), 7);
        assert_eq!(tolerance(200), 6);
        assert_eq!(tolerance(564), 7);
    }

    #[test]
    fn window_matching_examples() {
        let t = truth(&[600], 5);
        let r = evaluate(&[det(605, ChangeKind::Dense, vec![])], &t, 1000);
        assert_eq!((r.avg_missed, r.avg_false_alarms), (0.0, 0.0));
        let r = evaluate(
            &[det(400, ChangeKind::Dense, vec![]), det(605, ChangeKind::Dense, vec![])],
            &t,
            1000,
        );
        assert_eq!((r.avg_missed, r.avg_false_alarms), (0.0, 1.0));
        let r = evaluate(&[det(608, ChangeKind::Dense, vec![])], &t, 1000);
        assert_eq!((r.avg_missed, r.avg_false_alarms), (1.0, 1.0));
        assert_eq!(r.missed_rate, 1.0);
        // The test still fired, so it is not a type II error.
        assert_eq!(r.type2_rate, 0.0);
        assert_eq!(evaluate(&[], &t, 1000).type2_rate, 1.0);
    }

    #[test]
    fn one_estimate_may_cover_two_changes() {
        let t = truth(&[100, 105], 3);
        let r = evaluate(&[det(102, ChangeKind::Dense, vec![])], &t, 1000);
        assert_eq!((r.avg_missed, r.avg_false_alarms), (0.0, 0.0));
    }

    #[test]
    fn affected_rates() {
        let t = GroundTruth {
            d: 10,
            changes: vec![TrueChange { tau: 50, affected: vec![1, 2] }],
            surge_counted_as_two: false,
        };
        let r = evaluate(&[det(51, ChangeKind::Sparse, vec![1, 5])], &t, 200);
        assert_eq!(r.affected_tpr, Some(0.5));
        assert_eq!(r.affected_fpr, Some(1.0 / 8.0));
        // Dense detections are not scored for set accuracy.
        let r = evaluate(&[det(51, ChangeKind::Dense, (0..10).collect())], &t, 200);
        assert_eq!(r.affected_tpr, None);
    }

    #[test]
    fn scenario_a_has_three_full_changes() {
        let spec = ScenarioSpec::multi_gauss('A', 1000, 1000, 1.0).unwrap();
        let (_, t) = generate(&spec, RandomSource::new(1)).unwrap();
        assert_eq!(t.changes.iter().map(|c| c.tau).collect::<Vec<_>>(), vec![600, 783, 926]);
        assert!(t.changes.iter().all(|c| c.affected.len() == 1000));
    }

    #[test]
    fn scenario_b_prime_second_change_is_sparse() {
        let spec = ScenarioSpec::small_gauss('B', 1.0, false).unwrap();
        let (m, t) = generate(&spec, RandomSource::new(1)).unwrap();
        assert_eq!((m.d(), m.n()), (12, 1000));
        assert_eq!(t.changes[1].affected, vec![0, 6]);
        assert_eq!(t.changes[0].affected.len(), 12);
    }

    #[test]
    fn surge_adds_two_single_variate_changes() {
        let spec = ScenarioSpec::small_gauss('D', 1.0, true).unwrap();
        let (m, t) = generate(&spec, RandomSource::new(4)).unwrap();
        assert_eq!(t.changes.iter().map(|c| c.tau).collect::<Vec<_>>(), vec![280, 320, 600, 783, 926]);
        assert_eq!(t.changes[0].affected, vec![2]);
        assert!(t.surge_counted_as_two);
        let seg = |a: usize, b: usize| m.row(2)[a..b].iter().sum::<f64>() / (b - a) as f64;
        assert!((seg(280, 320) - seg(0, 280) - 5.0).abs() < 1.0);
        assert!((seg(320, 600) - seg(0, 280)).abs() < 0.5);
    }

    #[test]
    fn zero_magnitude_is_pure_noise() {
        let spec = ScenarioSpec::multi_gauss('C', 300, 20, 0.0).unwrap();
        let (m, t) = generate(&spec, RandomSource::new(3)).unwrap();
        assert!(t.changes.is_empty());
        let avg = m.rows().iter().flatten().sum::<f64>() / (300.0 * 20.0);
        assert!(avg.abs() < 0.05);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec::multi_gauss('E', 400, 50, 1.0).unwrap();
        let a = generate(&spec, RandomSource::new(8)).unwrap();
        let b = generate(&spec, RandomSource::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negbin_probability_must_stay_inside_unit_interval() {
        let spec = ScenarioSpec::small_negbin('A', 20.0, 0.2, false).unwrap();
        assert!(generate(&spec, RandomSource::new(1)).is_err());
        let spec = ScenarioSpec::small_negbin('A', 20.0, 0.1, false).unwrap();
        let (m, t) = generate(&spec, RandomSource::new(1)).unwrap();
        assert!(m.is_count_data());
        assert_eq!(t.changes.len(), 3);
    }

    #[test]
    fn scenarios_by_name() {
        let p = ScenarioParams::default();
        assert_eq!(named_scenario("C", &p).unwrap().changes.len(), 3);
        let s = named_scenario("Bprime", &ScenarioParams { negbin_r: Some(20.0), ..p.clone() }).unwrap();
        assert_eq!((s.n, s.d, s.kind), (1000, 12, ScenarioKind::SmallNegbin));
        let s = named_scenario("amoc", &ScenarioParams { n: 200, d: 20, ..p.clone() }).unwrap();
        assert_eq!(s.changes[0].tau, 100);
        let err = named_scenario("Z", &p).unwrap_err().to_string();
        assert!(err.contains("Aprime") && err.contains("amoc"), "{err}");
        assert!(named_scenario("Eprime", &p).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ScenarioSpec::multi_gauss('Z', 1000, 10, 1.0).is_err());
        assert!(ScenarioSpec::small_gauss('E', 1.0, false).is_err());
        let mut spec = ScenarioSpec::amoc_gauss(100, 10, 50, 0.5, 1.0);
        spec.changes[0].affected = AffectedSpec::Density(1.5);
        assert!(spec.validate().is_err());
        let spec = ScenarioSpec::amoc_gauss(100, 10, 100, 0.5, 1.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn relabelling_variates_preserves_rates() {
        let t = GroundTruth {
            d: 6,
            changes: vec![TrueChange { tau: 30, affected: vec![0, 3] }],
            surge_counted_as_two: false,
        };
        let perm = [5, 2, 4, 1, 0, 3];
        let t2 = GroundTruth {
            changes: vec![TrueChange { tau: 30, affected: { let mut v = vec![perm[0], perm[3]]; v.sort(); v } }],
            ..t.clone()
        };
        let e = det(30, ChangeKind::Sparse, vec![0, 2]);
        let mut a2: Vec<usize> = e.affected.iter().map(|&i| perm[i]).collect();
        a2.sort();
        let e2 = det(30, ChangeKind::Sparse, a2);
        let (r1, r2) = (evaluate(&[e], &t, 100), evaluate(&[e2], &t2, 100));
        assert_eq!(r1.affected_tpr, r2.affected_tpr);
        assert_eq!(r1.affected_fpr, r2.affected_fpr);
    }
}
