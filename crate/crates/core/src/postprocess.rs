// SPDX-License-Identifier: MIT OR Apache-2.0

//! Re-estimation of affected sets given the candidate changepoints.
//!
//! Each variate is segmented on its own by optimal partitioning, with splits
//! restricted to the candidate positions and a penalty `α` per segment:
//!
//! ```text
//! F[0] = −α,   F[j] = min_{k < j} F[k] + C(ξ_k + 1 ..= ξ_j) + α
//! ```
//!
//! with `ξ_0 = 0` and `ξ_{q+1} = n`. A variate is assigned to every
//! candidate on its optimal path; candidates chosen by no variate are dropped.

use rayon::prelude::*;

use crate::costs::CostModel;
use crate::detection::Detection;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PostprocessOptions {
    /// PELT-style pruning of the DP's candidate set.
    pub prune: bool,
}

/// Optimal restricted segmentation of one variate.
#[derive(Clone, Debug, PartialEq)]
pub struct VariateFit {
    /// `Σ_segments (C + α) − α`.
    pub objective: f64,
    /// Indices into the candidate list, increasing.
    pub selected: Vec<usize>,
}

/// Solves the per-variate DP over split points `positions` (1-based taus).
pub fn optimal_subset(model: &CostModel, i: usize, alpha: f64, positions: &[usize], prune: bool) -> VariateFit {
    let q = positions.len();
    let bound = |k: usize| -> usize {
        match k {
            0 => 0,
            k if k <= q => positions[k - 1],
            _ => model.n(),
        }
    };
    let mut f = vec![0.0; q + 2];
    let mut last = vec![0usize; q + 2];
    f[0] = -alpha;
    let mut admissible: Vec<usize> = vec![0];
    for j in 1..=q + 1 {
        let end = bound(j);
        let mut best = (f64::INFINITY, 0usize);
        for &k in &admissible {
            let v = f[k] + model.cost_unchecked(i, bound(k) + 1, end) + alpha;
            if v < best.0 {
                best = (v, k);
            }
        }
        f[j] = best.0;
        last[j] = best.1;
        if prune {
            admissible.retain(|&k| f[k] + model.cost_unchecked(i, bound(k) + 1, end) <= f[j]);
        }
        admissible.push(j);
    }
    let mut selected = Vec::new();
    let mut k = last[q + 1];
    while k > 0 {
        selected.push(k - 1);
        k = last[k];
    }
    selected.reverse();
    VariateFit {
        objective: f[q + 1],
        selected,
    }
}

/// Replaces each candidate's affected set with the DP assignments and drops
/// candidates no variate selects. Positions, kinds and statistics are kept.
pub fn postprocess(
    model: &CostModel,
    alpha: f64,
    candidates: &[Detection],
    options: PostprocessOptions,
) -> Result<Vec<Detection>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let n = model.n();
    let positions: Vec<usize> = candidates.iter().map(|c| c.tau).collect();
    if positions.iter().any(|&t| t == 0 || t >= n) || positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "candidates must be strictly increasing within 1..={}: {positions:?}",
            n - 1
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let fits: Vec<Vec<usize>> = (0..model.d())
        .into_par_iter()
        .map(|i| optimal_subset(model, i, alpha, &positions, options.prune).selected)
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); candidates.len()];
    for (i, sel) in fits.iter().enumerate() {
        for &k in sel {
            members[k].push(i);
        }
    }
    Ok(candidates
        .iter()
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, affected)| Detection {
            affected,
            ..c.clone()
        })
        .collect())
}
