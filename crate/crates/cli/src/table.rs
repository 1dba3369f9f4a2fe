// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plain-text comparison tables.

use std::fmt::Write as _;

use subset_core::simlab::Experiment;
use subset_core::MethodKind;

pub struct BenchmarkRow {
    scenario: String,
    method: MethodKind,
    reps: usize,
    missed: (f64, f64),
    false_alarms: (f64, f64),
    surge_counted_as_two: bool,
}

impl BenchmarkRow {
    pub fn new(exp: &Experiment) -> Self {
        let r = &exp.report;
        Self {
            scenario: exp.scenario.clone(),
            method: exp.method,
            reps: r.reps,
            missed: (r.avg_missed, r.sd_missed),
            false_alarms: (r.avg_false_alarms, r.sd_false_alarms),
            surge_counted_as_two: r.surge_counted_as_two,
        }
    }
}

/// Means with replicate standard deviations in brackets.
pub fn render(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("scenario\tmethod\treps\tmissed (sd)\tfalse alarms (sd)\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.2} ({:.2})\t{:.2} ({:.2})",
            r.scenario,
            r.method.name(),
            r.reps,
            r.missed.0,
            r.missed.1,
            r.false_alarms.0,
            r.false_alarms.1
        );
    }
    if rows.iter().any(|r| r.surge_counted_as_two) {
        out.push_str("# surge changes are counted as two true changepoints\n");
    }
    out
}

pub fn render_power(deltas: &[f64], curves: &[(MethodKind, Vec<(f64, f64)>)]) -> String {
    let mut out = String::from("delta");
    for (m, _) in curves {
        let _ = write!(out, "\t{}", m.name());
    }
    out.push('\n');
    for (k, delta) in deltas.iter().enumerate() {
        let _ = write!(out, "{delta:.2}");
        for (_, curve) in curves {
            let _ = write!(out, "\t{:.3}", curve[k].1);
        }
        out.push('\n');
    }
    out
}
