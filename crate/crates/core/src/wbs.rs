// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wild binary segmentation driver.
//!
//! A fixed set of random intervals is drawn once. On each active segment
//! every stored interval contained in it is scanned, together with the
//! segment itself; the strongest candidate is recorded and the segment is
//! split into `[l0, η]` and `[η + 1, u0]`. Because a scan only depends on
//! its own interval, each stored interval is evaluated at most once.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::CostModel;
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::penalties::PenaltyConfig;
use crate::rng::RandomSource;
use crate::single_change::{interval_extremes, scan_unchecked, IntervalExtremes};

/// Number of random intervals used when none is specified.
pub const DEFAULT_INTERVALS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    n: usize,
    /// `pairs[0] = (1, n)`; the rest are the random draws in draw order.
    pairs: Vec<(usize, usize)>,
}

impl IntervalSet {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of random intervals, excluding the full one.
    pub fn m(&self) -> usize {
        self.pairs.len() - 1
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// `M` random intervals on `1..=n`, each the sorted pair of two distinct
/// uniform draws, after the deterministic full interval.
pub fn draw_intervals(n: usize, m: usize, src: RandomSource) -> Result<IntervalSet> {
    if n < 3 {
        return Err(Error::invalid(format!("interval drawing needs n >= 3, got {n}")));
    }
    let mut rng = src.rng();
    let mut pairs = Vec::with_capacity(m + 1);
    pairs.push((1, n));
    for _ in 0..m {
        let r = rng.random_range(1..=n);
        let mut s = rng.random_range(1..=n);
        while s == r {
            s = rng.random_range(1..=n);
        }
        pairs.push((r.min(s), r.max(s)));
    }
    Ok(IntervalSet { n, pairs })
}

/// A single-change test that can be run on any interval.
pub trait IntervalScanner: Sync {
    /// Best candidate on `l..=u` (`u − l > 1`), if the test fires.
    fn scan(&self, l: usize, u: usize) -> Option<Detection>;
}

/// The penalised-likelihood test with fixed `(α, β, K)`.
pub struct SubsetScanner<'a> {
    pub model: &'a CostModel,
    pub penalties: &'a PenaltyConfig,
}

impl IntervalScanner for SubsetScanner<'_> {
    fn scan(&self, l: usize, u: usize) -> Option<Detection> {
        scan_unchecked(self.model, self.penalties, l, u)
    }
}

type Ranked = (usize, Detection);

/// Larger statistic wins; equal statistics go to the smaller interval index.
fn better(a: Option<Ranked>, b: Option<Ranked>) -> Option<Ranked> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let pick_a = a.1.statistic > b.1.statistic || (a.1.statistic == b.1.statistic && a.0 <= b.0);
            Some(if pick_a { a } else { b })
        }
    }
}

/// Runs the recursive search and returns candidates sorted by position.
pub fn segment<S: IntervalScanner>(scanner: &S, intervals: &IntervalSet) -> Vec<Detection> {
    let pairs = intervals.pairs();
    let cache: Vec<OnceLock<Option<Detection>>> = (0..pairs.len()).map(|_| OnceLock::new()).collect();
    let mut found = Vec::new();
    let mut active = vec![(1, intervals.n())];
    while let Some((l0, u0)) = active.pop() {
        if u0 < l0 + 2 {
            continue;
        }
        let own = if (l0, u0) == pairs[0] {
            cache[0].get_or_init(|| scanner.scan(l0, u0)).clone()
        } else {
            scanner.scan(l0, u0)
        };
        let best = (1..pairs.len())
            .into_par_iter()
            .filter(|&j| {
                let (l, u) = pairs[j];
                l >= l0 && u <= u0 && u - l > 1
            })
            .map(|j| {
                let (l, u) = pairs[j];
                cache[j].get_or_init(|| scanner.scan(l, u)).clone().map(|d| (j, d))
            })
            .reduce(|| None, better);
        let Some((_, det)) = better(own.map(|d| (0, d)), best) else {
            continue;
        };
        let eta = det.tau;
        debug_assert!(l0 <= eta && eta < u0);
        found.push(det);
        active.push((eta + 1, u0));
        active.push((l0, eta));
    }
    found.sort_by_key(|d| d.tau);
    found
}

/// Candidate changepoints before post-processing.
pub fn subset_wbs(model: &CostModel, penalties: &PenaltyConfig, intervals: &IntervalSet) -> Result<Vec<Detection>> {
    if intervals.n() != model.n() {
        return Err(Error::invalid(format!(
            "intervals drawn for n = {} but data has n = {}",
            intervals.n(),
            model.n()
        )));
    }
    if !(penalties.alpha.is_finite() && penalties.beta.is_finite() && penalties.k.is_finite()) {
        return Err(Error::invalid("penalties must be finite"));
    }
    Ok(segment(&SubsetScanner { model, penalties }, intervals))
}

/// Extremes of `Σ D'` and `Σ D` over every scannable stored interval.
pub(crate) fn extremes(model: &CostModel, alpha: f64, intervals: &IntervalSet) -> IntervalExtremes {
    intervals
        .pairs()
        .par_iter()
        .filter(|(l, u)| u - l > 1)
        .map(|&(l, u)| interval_extremes(model, alpha, l, u))
        .reduce(IntervalExtremes::default, IntervalExtremes::merge)
}
