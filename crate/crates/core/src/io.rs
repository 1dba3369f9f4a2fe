// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and atomic file output.
//!
//! Input files have a header `time,<name1>,...,<named>` and one row per time
//! point. Row and column numbers in errors are 1-based file coordinates, so
//! the header is row 1.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;

fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Ragged {
            row,
            got: len as usize,
            expected: expected_len as usize,
        },
        other => Error::Parse {
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<TimeSeriesMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| with_path(path, e))?;
    parse_csv(file)
}

pub fn parse_csv<R: Read>(input: R) -> Result<TimeSeriesMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() < 2 {
        return Err(Error::Empty(
            "header needs a time column and at least one variate".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::invalid(format!("duplicate variate name '{name}'")));
        }
    }

    let mut labels = Vec::new();
    let mut rows = vec![Vec::new(); names.len()];
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = k + 2;
        labels.push(record[0].to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: j + 2,
                    message: format!("'{cell}' is not a finite number"),
                })?;
            rows[j].push(value);
        }
    }
    match labels.len() {
        0 => Err(Error::Empty("no data rows after the header".into())),
        1 => Err(Error::invalid("need at least 2 data rows, got 1")),
        _ => TimeSeriesMatrix::new(rows, names)?.with_time_labels(labels),
    }
}

/// Writes the matrix back in the input layout. Without time labels the
/// first column holds `1..=n`.
pub fn write_csv(matrix: &TimeSeriesMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("time").chain(matrix.variate_names().iter().map(String::as_str));
    writer.write_record(header).map_err(csv_error)?;
    for t in 1..=matrix.n() {
        let mut record = vec![matrix.time_label(t).map_or_else(|| t.to_string(), str::to_string)];
        record.extend(matrix.rows().iter().map(|r| r[t - 1].to_string()));
        writer.write_record(&record).map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never see a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("output path '{}' has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        with_path(path, e)
    })
}
