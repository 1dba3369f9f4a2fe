// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared inputs for the benchmarks.

use subset_core::{sampling, RandomSource, TimeSeriesMatrix};

/// Unit-variance noise with a mean shift of `delta` after `n / 2` on the
/// first `affected` variates.
pub fn gaussian_panel(d: usize, n: usize, affected: usize, delta: f64, seed: u64) -> TimeSeriesMatrix {
    let mut rng = RandomSource::new(seed).rng();
    let mut rows = sampling::gaussian_noise(&mut rng, d, n);
    for row in rows.iter_mut().take(affected) {
        for v in &mut row[n / 2..] {
            *v += delta;
        }
    }
    TimeSeriesMatrix::from_rows(rows).expect("valid panel")
}

/// `Neg-Bin(r, 0.5)` counts with `p` dropping to 0.35 after `n / 2` on the
/// first `affected` variates.
pub fn count_panel(d: usize, n: usize, affected: usize, r: f64, seed: u64) -> TimeSeriesMatrix {
    let mut rng = RandomSource::new(seed).rng();
    let rows = (0..d)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let p = if i < affected && j >= n / 2 { 0.35 } else { 0.5 };
                    sampling::negbin(&mut rng, r, p).expect("valid parameters")
                })
                .collect()
        })
        .collect();
    TimeSeriesMatrix::from_rows(rows).expect("valid panel")
}
