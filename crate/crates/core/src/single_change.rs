// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-changepoint test on one interval.
//!
//! For a split `t` of the interval `l..=u`, each variate contributes the
//! likelihood-ratio gain `D_{i,t}`. Maximising `Σ_{i∈S} D_{i,t} − Pen(|S|)`
//! over subsets `S` under `Pen(p) = min(β + αp, K)` reduces to
//!
//! ```text
//! S_t = max( Σ_i max(D_{i,t} − α, 0) − β ,  Σ_i D_{i,t} − K )
//! ```
//!
//! so a whole interval is scanned in `O((u − l)·d)`.

use crate::costs::CostModel;
use crate::detection::{ChangeKind, Detection};
use crate::error::{Error, Result};
use crate::penalties::PenaltyConfig;

/// Split gain of variate `i` at `t` on the interval `l..=u` (1-based).
pub fn d_statistic(model: &CostModel, i: usize, l: usize, u: usize, t: usize) -> Result<f64> {
    check_interval(model, l, u, 1)?;
    if i >= model.d() {
        return Err(Error::invalid(format!("variate {i} out of range")));
    }
    if t < l || t >= u {
        return Err(Error::invalid(format!(
            "split {t} outside [{l}, {}]",
            u - 1
        )));
    }
    Ok(model.gain_unchecked(i, l, t, u))
}

fn check_interval(model: &CostModel, l: usize, u: usize, min_gap: usize) -> Result<()> {
    if l == 0 || u > model.n() || l >= u || u - l < min_gap {
        return Err(Error::invalid(format!(
            "interval ({l}, {u}) invalid for n = {} (need 1 <= l, u - l >= {min_gap}, u <= n)",
            model.n()
        )));
    }
    Ok(())
}

/// The two penalised branches at one split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchValues {
    /// `Σ max(D − α, 0) − β`
    pub sparse: f64,
    /// `Σ D − K`
    pub dense: f64,
}

impl BranchValues {
    pub fn value(&self) -> f64 {
        self.sparse.max(self.dense)
    }

    /// Sparse wins exact ties.
    pub fn kind(&self) -> ChangeKind {
        if self.sparse >= self.dense {
            ChangeKind::Sparse
        } else {
            ChangeKind::Dense
        }
    }
}

/// Aggregates one column of gains under the piecewise-linear penalty.
pub fn combine(gains: &[f64], penalties: &PenaltyConfig) -> BranchValues {
    let (soft, total) = gains.iter().fold((0.0, 0.0), |(s, t), &g| {
        (s + (g - penalties.alpha).max(0.0), t + g)
    });
    BranchValues {
        sparse: soft - penalties.beta,
        dense: total - penalties.k,
    }
}

/// Per-split statistic over an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticProfile {
    pub l: usize,
    pub u: usize,
    /// Indexed by `t − l` for `t` in `l..u`.
    pub branches: Vec<BranchValues>,
}

impl StatisticProfile {
    pub fn compute(model: &CostModel, penalties: &PenaltyConfig, l: usize, u: usize) -> Result<Self> {
        check_interval(model, l, u, 1)?;
        let mut soft = Vec::new();
        let mut total = Vec::new();
        accumulate(model, penalties.alpha, l, u, &mut soft, &mut total);
        let branches = soft
            .iter()
            .zip(&total)
            .map(|(s, t)| BranchValues {
                sparse: s - penalties.beta,
                dense: t - penalties.k,
            })
            .collect();
        Ok(Self { l, u, branches })
    }

    pub fn at(&self, t: usize) -> Option<BranchValues> {
        t.checked_sub(self.l).and_then(|k| self.branches.get(k)).copied()
    }

    /// `(t*, S_{t*})` with the smallest index winning ties.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (self.l, f64::NEG_INFINITY);
        for (k, b) in self.branches.iter().enumerate() {
            let v = b.value();
            if v > best.1 {
                best = (self.l + k, v);
            }
        }
        best
    }
}

/// Fills `soft[k] = Σ_i max(D_{i,l+k} − α, 0)` and `total[k] = Σ_i D_{i,l+k}`.
fn accumulate(
    model: &CostModel,
    alpha: f64,
    l: usize,
    u: usize,
    soft: &mut Vec<f64>,
    total: &mut Vec<f64>,
) {
    let len = u - l;
    soft.clear();
    soft.resize(len, 0.0);
    total.clear();
    total.resize(len, 0.0);
    for i in 0..model.d() {
        for (k, t) in (l..u).enumerate() {
            let g = model.gain_unchecked(i, l, t, u);
            total[k] += g;
            soft[k] += (g - alpha).max(0.0);
        }
    }
}

fn affected_at(model: &CostModel, alpha: f64, l: usize, u: usize, t: usize, kind: ChangeKind) -> Vec<usize> {
    match kind {
        ChangeKind::Dense => (0..model.d()).collect(),
        ChangeKind::Sparse => (0..model.d())
            .filter(|&i| model.gain_unchecked(i, l, t, u) > alpha)
            .collect(),
    }
}

/// Best candidate on `l..=u`, or `None` when `max_t S_t <= 0`.
///
/// Requires `u − l > 1`.
pub fn scan_interval(
    model: &CostModel,
    penalties: &PenaltyConfig,
    l: usize,
    u: usize,
) -> Result<Option<Detection>> {
    check_interval(model, l, u, 2)?;
    Ok(scan_unchecked(model, penalties, l, u))
}

pub(crate) fn scan_unchecked(
    model: &CostModel,
    penalties: &PenaltyConfig,
    l: usize,
    u: usize,
) -> Option<Detection> {
    let mut soft = Vec::new();
    let mut total = Vec::new();
    accumulate(model, penalties.alpha, l, u, &mut soft, &mut total);
    let mut best: Option<(usize, BranchValues)> = None;
    for k in 0..soft.len() {
        let b = BranchValues {
            sparse: soft[k] - penalties.beta,
            dense: total[k] - penalties.k,
        };
        if best.map_or(true, |(_, cur)| b.value() > cur.value()) {
            best = Some((l + k, b));
        }
    }
    let (tau, branches) = best?;
    let statistic = branches.value();
    if statistic <= 0.0 {
        return None;
    }
    let kind = branches.kind();
    Some(Detection {
        tau,
        kind,
        affected: affected_at(model, penalties.alpha, l, u, tau, kind),
        statistic,
        interval: (l, u),
    })
}

/// `max_t Σ max(D−α,0)` and `max_t Σ D` over one interval; these decide
/// whether the interval yields a candidate for any `β`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntervalExtremes {
    pub soft: f64,
    pub total: f64,
}

impl IntervalExtremes {
    pub fn merge(self, other: Self) -> Self {
        Self {
            soft: self.soft.max(other.soft),
            total: self.total.max(other.total),
        }
    }
}

pub(crate) fn interval_extremes(model: &CostModel, alpha: f64, l: usize, u: usize) -> IntervalExtremes {
    let mut soft = Vec::new();
    let mut total = Vec::new();
    accumulate(model, alpha, l, u, &mut soft, &mut total);
    IntervalExtremes {
        soft: soft.iter().copied().fold(0.0, f64::max),
        total: total.iter().copied().fold(0.0, f64::max),
    }
}
