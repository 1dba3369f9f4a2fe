// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `d × n` observation panel.
//!
//! Time indices are 1-based throughout the crate: a changepoint `tau` is the
//! last index of the pre-change segment and segment `k` covers
//! `tau_{k-1} + 1 ..= tau_k`. Variates are addressed by 0-based position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesMatrix {
    values: Vec<Vec<f64>>,
    variate_names: Vec<String>,
    time_labels: Option<Vec<String>>,
}

impl TimeSeriesMatrix {
    /// Builds a validated matrix from one row per variate.
    ///
    /// Requires at least one row, rows of equal length `n >= 2`, finite
    /// entries and one name per row. Integer checks for count models happen
    /// when the cost model is built.
    pub fn new(rows: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("no variates supplied".into()));
        }
        let n = rows[0].len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Ragged {
                    row,
                    got: r.len(),
                    expected: n,
                });
            }
        }
        if n < 2 {
            return Err(Error::invalid(format!(
                "series length must be at least 2, got {n}"
            )));
        }
        if names.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} names supplied for {} variates",
                names.len(),
                rows.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite value in variate {i} at time {}",
                    j + 1
                )));
            }
        }
        Ok(Self {
            values: rows,
            variate_names: names,
            time_labels: None,
        })
    }

    /// Like [`TimeSeriesMatrix::new`] with generated names `V1..Vd`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=rows.len()).map(|i| format!("V{i}")).collect();
        Self::new(rows, names)
    }

    pub fn with_time_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::invalid(format!(
                "{} time labels for series of length {}",
                labels.len(),
                self.n()
            )));
        }
        self.time_labels = Some(labels);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.values[0].len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn variate_names(&self) -> &[String] {
        &self.variate_names
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    /// Label for 1-based time index `t`, if labels are present.
    pub fn time_label(&self, t: usize) -> Option<&str> {
        self.time_labels
            .as_ref()
            .and_then(|l| l.get(t.checked_sub(1)?))
            .map(String::as_str)
    }

    /// True when every entry is a non-negative integer.
    pub fn is_count_data(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|v| *v >= 0.0 && v.fract() == 0.0)
    }

    /// Returns a copy with every variate scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.values {
            for v in r.iter_mut() {
                *v *= factor;
            }
        }
        out
    }
}
