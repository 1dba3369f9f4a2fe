// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p subset-core --test acceptance -- 4 5`.

use std::time::{Duration, Instant};

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use subset_core::costs::DEFAULT_R_MAX;
use subset_core::detection::ChangeKind;
use subset_core::penalties::{calibrate_beta, CalibrationSpec, NullModel};
use subset_core::postprocess::optimal_subset;
use subset_core::simlab::{
    calibrate_for, power_curve, run_experiment, AffectedSpec, ChangeSpec, Noise, ScenarioKind, ScenarioSpec,
};
use subset_core::single_change::{d_statistic, scan_interval, StatisticProfile};
use subset_core::{
    analysis, sampling, CostModel, DetectOptions, MethodKind, ModelKind, PenaltyConfig, RandomSource,
    TimeSeriesMatrix,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Independent cost oracles, written from the likelihoods directly.

fn gaussian_cost(y: &[f64], sigma: f64) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (sigma * sigma)
}

fn negbin_cost(y: &[f64], r: f64) -> f64 {
    let len = y.len() as f64;
    let s: f64 = y.iter().sum();
    let p = len * r / (len * r + s);
    let xlogy = |x: f64, v: f64| if x == 0.0 { 0.0 } else { x * v.ln() };
    let log_binom: f64 = y
        .iter()
        .map(|&v| ln_gamma(v + r) - ln_gamma(v + 1.0) - ln_gamma(r))
        .sum();
    -2.0 * (log_binom + xlogy(s, 1.0 - p) + xlogy(len * r, p))
}

/// `y[l-1..u]` split after `t`, all 1-based.
fn oracle_gain(cost: &dyn Fn(&[f64]) -> f64, y: &[f64], l: usize, t: usize, u: usize) -> f64 {
    cost(&y[l - 1..u]) - cost(&y[l - 1..t]) - cost(&y[t..u])
}

fn random_gaussian_panel(rng: &mut impl Rng, d: usize, n: usize) -> (TimeSeriesMatrix, Vec<f64>) {
    let mut sigmas = Vec::with_capacity(d);
    let rows = (0..d)
        .map(|_| {
            let sigma = rng.random_range(0.3..3.0);
            sigmas.push(sigma);
            let cp = rng.random_range(1..n);
            let shift = if rng.random_bool(0.5) { rng.random_range(-4.0..4.0) } else { 0.0 };
            let base = rng.random_range(-10.0..10.0);
            (0..n)
                .map(|j| base + if j >= cp { shift } else { 0.0 } + sigma * sampling::standard_normal(rng))
                .collect()
        })
        .collect();
    (TimeSeriesMatrix::from_rows(rows).unwrap(), sigmas)
}

fn random_count_panel(rng: &mut impl Rng, d: usize, n: usize) -> TimeSeriesMatrix {
    let rows = (0..d)
        .map(|_| {
            let r = rng.random_range(1.0..30.0);
            let cp = rng.random_range(1..n);
            let p0 = rng.random_range(0.2..0.8);
            let p1 = if rng.random_bool(0.5) { rng.random_range(0.2..0.8) } else { p0 };
            let mut row: Vec<f64> = (0..n)
                .map(|j| sampling::negbin(rng, r, if j >= cp { p1 } else { p0 }).unwrap())
                .collect();
            if row.iter().all(|v| *v == 0.0) {
                row[0] = 1.0;
            }
            row
        })
        .collect();
    TimeSeriesMatrix::from_rows(rows).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------

fn gaussian_identity() -> Outcome {
    let mut rng = RandomSource::new(101).rng();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(3..=200);
        let (m, sigmas) = random_gaussian_panel(&mut rng, d, n);
        let model = CostModel::gaussian(&m, Some(&sigmas)).unwrap();
        let i = rng.random_range(0..d);
        let l = rng.random_range(1..=n - 2);
        let u = rng.random_range(l + 2..=n);
        let t = rng.random_range(l..u);
        let y = m.row(i);
        let (a, b) = (&y[l - 1..t], &y[t..u]);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let (l1, l2) = (a.len() as f64, b.len() as f64);
        let w = (l1 * l2 / (l1 + l2)).sqrt() * (mean(b) - mean(a)).abs() / sigmas[i];
        let dv = d_statistic(&model, i, l, u, t).unwrap();
        worst = worst.max((dv - w * w).abs());
    }
    outcome(worst < 1e-9, format!("max |D - W^2| = {worst:.2e} over 1000 triples"))
}

fn brute_force_best(gains: &[Vec<f64>], pen: &PenaltyConfig) -> (usize, f64) {
    let d = gains[0].len();
    let mut best = (0, f64::NEG_INFINITY);
    for (k, g) in gains.iter().enumerate() {
        for mask in 0u32..(1 << d) {
            let size = mask.count_ones() as f64;
            let sum: f64 = (0..d).filter(|i| mask >> i & 1 == 1).map(|i| g[i]).sum();
            let v = sum - (pen.beta + pen.alpha * size).min(pen.k);
            if v > best.1 {
                best = (k, v);
            }
        }
    }
    best
}

fn soft_threshold_equivalence() -> Outcome {
    let mut rng = RandomSource::new(202).rng();
    let mut mismatches = Vec::new();
    for instance in 0..200 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(3..=30);
        let counts = instance % 2 == 1;
        type Oracle = Box<dyn Fn(usize, &[f64]) -> f64>;
        let (m, model, cost): (TimeSeriesMatrix, CostModel, Oracle) = if counts {
            let m = random_count_panel(&mut rng, d, n);
            let model = CostModel::negbin(&m, DEFAULT_R_MAX).unwrap();
            let r = model.dispersion().unwrap().to_vec();
            (m, model, Box::new(move |i, y| negbin_cost(y, r[i])))
        } else {
            let (m, s) = random_gaussian_panel(&mut rng, d, n);
            let model = CostModel::gaussian(&m, Some(&s)).unwrap();
            (m, model, Box::new(move |i, y| gaussian_cost(y, s[i])))
        };
        let alpha = rng.random_range(0.0..6.0);
        let beta = rng.random_range(0.0..25.0);
        let k = beta + rng.random_range(0.0..alpha * d as f64 + 10.0);
        let pen = PenaltyConfig::manual(alpha, beta, k).unwrap();
        let l = rng.random_range(1..=n - 2);
        let u = rng.random_range(l + 2..=n);
        let gains: Vec<Vec<f64>> = (l..u)
            .map(|t| (0..d).map(|i| oracle_gain(&|y| cost(i, y), m.row(i), l, t, u).max(0.0)).collect())
            .collect();
        let (k_best, v_best) = brute_force_best(&gains, &pen);
        let profile = StatisticProfile::compute(&model, &pen, l, u).unwrap();
        let (tau, value) = profile.argmax();
        let scanned = scan_interval(&model, &pen, l, u).unwrap();
        let scan_ok = match scanned {
            Some(det) => v_best > 0.0 && det.tau == l + k_best && close(det.statistic, v_best, 1e-9),
            None => v_best <= 1e-9,
        };
        if tau != l + k_best || !close(value, v_best, 1e-9) || !scan_ok {
            mismatches.push(format!(
                "#{instance}: scan ({tau}, {value}) vs brute force ({}, {v_best})",
                l + k_best
            ));
        }
    }
    let detail = match mismatches.first() {
        None => "200/200 instances match brute force over all subsets and splits".to_string(),
        Some(first) => format!("{} mismatches, first {first}", mismatches.len()),
    };
    outcome(mismatches.is_empty(), detail)
}

fn dp_oracle() -> Outcome {
    let mut rng = RandomSource::new(303).rng();
    let mut failures = Vec::new();
    for instance in 0..200 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(12..=60);
        let (m, sigmas) = random_gaussian_panel(&mut rng, d, n);
        let model = CostModel::gaussian(&m, Some(&sigmas)).unwrap();
        let q = rng.random_range(1..=8.min(n - 1));
        let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, q)
            .into_iter()
            .map(|p| p + 1)
            .collect();
        positions.sort_unstable();
        let alpha = rng.random_range(0.0..12.0);
        for i in 0..d {
            let y = m.row(i);
            let mut best = (f64::INFINITY, 0u32);
            for mask in 0u32..(1 << q) {
                let mut bounds = vec![0];
                bounds.extend((0..q).filter(|k| mask >> k & 1 == 1).map(|k| positions[k]));
                bounds.push(n);
                let total: f64 = bounds
                    .windows(2)
                    .map(|w| gaussian_cost(&y[w[0]..w[1]], sigmas[i]))
                    .sum::<f64>()
                    + alpha * mask.count_ones() as f64;
                if total < best.0 {
                    best = (total, mask);
                }
            }
            let expected: Vec<usize> = (0..q).filter(|k| best.1 >> k & 1 == 1).collect();
            for prune in [false, true] {
                let fit = optimal_subset(&model, i, alpha, &positions, prune);
                if !close(fit.objective, best.0, 1e-9) || fit.selected != expected {
                    failures.push(format!(
                        "#{instance} variate {i} prune={prune}: {} {:?} vs {} {expected:?}",
                        fit.objective, fit.selected, best.0
                    ));
                }
            }
        }
    }
    let detail = match failures.first() {
        None => "200/200 instances match exhaustive subset search (with and without pruning)".to_string(),
        Some(first) => format!("{} mismatches, first {first}", failures.len()),
    };
    outcome(failures.is_empty(), detail)
}

fn null_scan_rate(pen: &PenaltyConfig, n: usize, d: usize, reps: u64, src: RandomSource) -> f64 {
    let null = NullModel::gaussian();
    let alarms = (0..reps)
        .filter(|&rep| {
            let data = null.simulate(n, d, src.derive(rep)).unwrap();
            let model = null.fit(&data).unwrap();
            scan_interval(&model, pen, 1, n).unwrap().is_some()
        })
        .count();
    alarms as f64 / reps as f64
}

fn calibration_loop() -> Outcome {
    let (n, d) = (200, 20);
    let spec = CalibrationSpec {
        n,
        d,
        null: NullModel::gaussian(),
        target_fp: 0.05,
        reps: 500,
        intervals: 0,
    };
    let pen = calibrate_beta(&spec, RandomSource::new(404)).unwrap();
    let rate = null_scan_rate(&pen, n, d, 500, RandomSource::new(405));
    outcome(
        (0.02..=0.08).contains(&rate),
        format!("beta = {:.3}, fresh-null false-alarm rate {:.1}% (target 5%, band 2-8%)", pen.beta, 100.0 * rate),
    )
}

fn theoretical_penalties_conservative() -> Outcome {
    let (n, d) = (200, 20);
    let pen = PenaltyConfig::theoretical(n, d, 2.0, 0.1).unwrap();
    let rate = null_scan_rate(&pen, n, d, 500, RandomSource::new(505));
    outcome(
        rate <= 0.05,
        format!("alpha = {:.3}, beta = {:.3}, K = {:.3}: null false-alarm rate {:.1}% (<= 5%)", pen.alpha, pen.beta, pen.k, 100.0 * rate),
    )
}

fn gaussian_three_changes() -> Outcome {
    let spec = ScenarioSpec::small_gauss('A', 1.0, false).unwrap();
    let det = calibrate_for(&spec, MethodKind::Subset, 0.05, 200, 200, false, RandomSource::new(606)).unwrap();
    let r = run_experiment(&spec, &det, 100, RandomSource::new(607)).unwrap().report;
    outcome(
        r.avg_missed <= 0.10 && r.avg_false_alarms <= 0.15,
        format!("avg missed {:.2} (<= 0.10), avg false alarms {:.2} (<= 0.15)", r.avg_missed, r.avg_false_alarms),
    )
}

fn negbin_three_changes() -> Outcome {
    let spec = ScenarioSpec::small_negbin('A', 100.0, 0.1, false).unwrap();
    let det = calibrate_for(&spec, MethodKind::Subset, 0.05, 200, 200, false, RandomSource::new(707)).unwrap();
    let a = run_experiment(&spec, &det, 50, RandomSource::new(708)).unwrap().report;

    let spec = ScenarioSpec::small_negbin('D', 3.0, 0.1, true).unwrap();
    let det = calibrate_for(&spec, MethodKind::Subset, 0.05, 200, 200, false, RandomSource::new(709)).unwrap();
    let d = run_experiment(&spec, &det, 50, RandomSource::new(710)).unwrap().report;
    outcome(
        a.avg_missed == 0.0 && a.avg_false_alarms <= 0.02 && d.avg_missed >= 1.0,
        format!(
            "all-variate r=100: missed {:.2} (= 0), false alarms {:.2} (<= 0.02); sparse+surge r=3: missed {:.2} (>= 1.0)",
            a.avg_missed, a.avg_false_alarms, d.avg_missed
        ),
    )
}

fn first_reaching(curve: &[(f64, f64)], level: f64) -> f64 {
    curve.iter().find(|(_, p)| *p >= level).map_or(f64::INFINITY, |(delta, _)| *delta)
}

fn power_ordering() -> Outcome {
    let (n, d, tau) = (200, 200, 100);
    let deltas: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let null = ScenarioSpec::amoc_gauss(n, d, tau, 1.0, 0.0);
    let detectors: Vec<_> = [MethodKind::Subset, MethodKind::Mean, MethodKind::Max]
        .into_iter()
        .enumerate()
        .map(|(k, method)| calibrate_for(&null, method, 0.05, 500, 0, true, RandomSource::new(800 + k as u64)).unwrap())
        .collect();
    let mut reach = Vec::new();
    for density in [0.5, 0.005] {
        let row: Vec<f64> = detectors
            .iter()
            .map(|det| {
                let curve = power_curve(
                    |delta| ScenarioSpec::amoc_gauss(n, d, tau, density, delta),
                    &deltas,
                    det,
                    100,
                    RandomSource::new(810),
                )
                .unwrap();
                first_reaching(&curve, 0.95)
            })
            .collect();
        reach.push(row);
    }
    let (dense, sparse) = (&reach[0], &reach[1]);
    // Order: subset, mean, max.
    let dense_ok = dense[0].is_finite() && dense[1].is_finite() && dense[0] <= dense[2] && dense[1] <= dense[2];
    let sparse_ok = sparse[0].is_finite() && sparse[2].is_finite() && sparse[0] <= sparse[1] && sparse[2] <= sparse[1];
    outcome(
        dense_ok && sparse_ok,
        format!(
            "delta reaching 95% power (subset/mean/max): 50% density {:?}, single variate {:?}",
            dense, sparse
        ),
    )
}

fn affected_set_recovery() -> Outcome {
    let spec = ScenarioSpec::amoc_gauss(400, 200, 200, 0.005, 3.0);
    let det = calibrate_for(&spec, MethodKind::Subset, 0.05, 200, 0, true, RandomSource::new(909)).unwrap();
    let r = run_experiment(&spec, &det, 100, RandomSource::new(910)).unwrap().report;
    let (tpr, fpr) = (r.affected_tpr.unwrap_or(0.0), r.affected_fpr.unwrap_or(1.0));
    outcome(
        tpr >= 0.9 && fpr <= 0.01 && r.affected_matches >= 90,
        format!(
            "{} sparse detections matched; TPR {:.3} (>= 0.9), FPR {:.4} (<= 0.01)",
            r.affected_matches, tpr, fpr
        ),
    )
}

/// Monthly labels from 1970-01 with the year 1993 absent: 564 months.
fn month_labels() -> Vec<String> {
    (1970..=2017)
        .filter(|&y| y != 1993)
        .flat_map(|y| (1..=12).map(move |m| format!("{y}-{m:02}")))
        .collect()
}

pub const DENSE_TAU: usize = 324;
pub const SPARSE_CHANGES: [(usize, usize); 2] = [(120, 3), (450, 8)];

fn dense_label_spec() -> ScenarioSpec {
    ScenarioSpec {
        name: "dense-label surrogate".into(),
        kind: ScenarioKind::SmallNegbin,
        n: 564,
        d: 12,
        changes: vec![
            ChangeSpec {
                tau: SPARSE_CHANGES[0].0,
                affected: AffectedSpec::Variates(vec![SPARSE_CHANGES[0].1]),
                magnitude: 0.2,
            },
            ChangeSpec {
                tau: DENSE_TAU,
                affected: AffectedSpec::All,
                magnitude: 0.15,
            },
            ChangeSpec {
                tau: SPARSE_CHANGES[1].0,
                affected: AffectedSpec::Variates(vec![SPARSE_CHANGES[1].1]),
                magnitude: 0.2,
            },
        ],
        surge: false,
        surge_magnitude: 0.0,
        noise: Noise::Negbin { r: 20.0, base_p: 0.5 },
    }
}

fn dense_label_end_to_end() -> Outcome {
    let spec = dense_label_spec();
    let labels = month_labels();
    assert_eq!(labels.len(), 564);
    assert_eq!(labels[DENSE_TAU], "1998-01");
    let pen = calibrate_beta(
        &CalibrationSpec {
            n: spec.n,
            d: spec.d,
            null: spec.null_model(),
            target_fp: 0.05,
            reps: 200,
            intervals: 1000,
        },
        RandomSource::new(1000),
    )
    .unwrap();
    let tol = subset_core::simlab::tolerance(spec.n);
    let seeds = 50;
    let mut good = 0;
    let mut first_bad = None;
    for seed in 0..seeds {
        let (data, _) = subset_core::simlab::generate(&spec, RandomSource::new(1001).derive(seed)).unwrap();
        let data = data.with_time_labels(labels.clone()).unwrap();
        let opts = DetectOptions {
            model: ModelKind::Negbin,
            alpha: Some(pen.alpha),
            beta: Some(pen.beta),
            k: Some(pen.k),
            seed,
            ..DetectOptions::default()
        };
        let report = analysis::detect(&data, &opts).unwrap();
        let near = |tau: usize| report.detections.iter().find(|e| e.tau.abs_diff(tau) <= tol);
        let dense_ok = near(DENSE_TAU).is_some_and(|e| e.kind == ChangeKind::Dense);
        let sparse_ok = SPARSE_CHANGES.iter().all(|&(tau, v)| {
            near(tau).is_some_and(|e| e.kind == ChangeKind::Sparse && e.affected == vec![data.variate_names()[v].clone()])
        });
        if dense_ok && sparse_ok {
            good += 1;
        } else if first_bad.is_none() {
            let found: Vec<_> = report
                .detections
                .iter()
                .map(|e| format!("{}:{:?}:{:?}", e.tau, e.kind, e.affected))
                .collect();
            first_bad = Some(format!("seed {seed}: {found:?}"));
        }
    }
    let rate = good as f64 / seeds as f64;
    let mut detail = format!("{good}/{seeds} seeds fully correct ({:.0}%, need >= 90%)", 100.0 * rate);
    if let Some(bad) = first_bad {
        detail.push_str(&format!("; first miss {bad}"));
    }
    outcome(rate >= 0.9, detail)
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "gaussian gain equals squared CUSUM", budget: Duration::from_secs(5), run: gaussian_identity },
        Criterion { id: 2, name: "soft-threshold scan equals subset brute force", budget: Duration::from_secs(30), run: soft_threshold_equivalence },
        Criterion { id: 3, name: "post-processing DP equals exhaustive search", budget: Duration::from_secs(30), run: dp_oracle },
        Criterion { id: 4, name: "calibrated beta holds its false-alarm rate", budget: Duration::from_secs(300), run: calibration_loop },
        Criterion { id: 5, name: "theoretical penalties are conservative", budget: Duration::from_secs(300), run: theoretical_penalties_conservative },
        Criterion { id: 6, name: "three all-variate gaussian changes", budget: Duration::from_secs(900), run: gaussian_three_changes },
        Criterion { id: 7, name: "negative binomial scenarios", budget: Duration::from_secs(900), run: negbin_three_changes },
        Criterion { id: 8, name: "power ordering against mean and max", budget: Duration::from_secs(1800), run: power_ordering },
        Criterion { id: 9, name: "single-variate affected-set recovery", budget: Duration::from_secs(600), run: affected_set_recovery },
        Criterion { id: 10, name: "dense and sparse labels end to end", budget: Duration::from_secs(600), run: dense_label_end_to_end },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = out.pass && in_budget;
        println!(
            "criterion {:>2} {} {}: {} [{:.1}s of {}s]",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            out.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
        );
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
