//! CSV batch reader.
//!
//! Columns are matched by header name, so any column order is accepted, but
//! the set of names must be exactly `Y, X, M1..Mp, Z1..Zq`. Every data line
//! must hold one finite decimal number per column.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{column_names, ColumnScaling, OutcomeModel, StreamConfig};
use crate::error::{Error, Result};
use crate::model::ModelDims;

/// Rows of one batch in canonical column order, not yet standardized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBatch {
    pub n: usize,
    /// `n` rows of `Y, X, M1..Mp, Z1..Zq`, back to back.
    pub values: Vec<f64>,
}

/// Reads a batch file.
pub fn read_batch(path: &Path, config: &StreamConfig) -> Result<RawBatch> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_batch(file, &path.display().to_string(), config)
}

/// Parses CSV from any reader; `source` names it in error messages.
pub fn parse_batch<R: Read>(reader: R, source: &str, config: &StreamConfig) -> Result<RawBatch> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let expected = column_names(&config.dims);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, format!("unreadable header: {e}")))?
        .clone();
    let mut slot_of = Vec::with_capacity(header.len());
    let mut seen = vec![false; expected.len()];
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        let name = if i == 0 { name.trim_start_matches('\u{feff}') } else { name };
        let Some(slot) = expected.iter().position(|e| e == name) else {
            return Err(parse_err(
                1,
                format!("unexpected column '{name}'; the header must name exactly {}", expected.join(",")),
            ));
        };
        if seen[slot] {
            return Err(parse_err(1, format!("column '{name}' appears twice")));
        }
        seen[slot] = true;
        slot_of.push(slot);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(parse_err(1, format!("missing column '{}'", expected[missing])));
    }

    let width = expected.len();
    let mut values = Vec::new();
    let mut row = vec![0.0; width];
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, format!("malformed CSV: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", record.len())));
        }
        for (field, &slot) in record.iter().zip(&slot_of) {
            let text = field.trim();
            let v: f64 = text.parse().map_err(|_| {
                parse_err(line, format!("column {}: '{text}' is not a number", expected[slot]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: '{text}' is not finite", expected[slot])));
            }
            row[slot] = v;
        }
        if config.model == OutcomeModel::Logistic && row[0] != 0.0 && row[0] != 1.0 {
            return Err(parse_err(line, format!("logistic outcome Y must be 0 or 1, found {}", row[0])));
        }
        values.extend_from_slice(&row);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Input(format!("{source}: batch has no data rows")));
    }
    Ok(RawBatch { n, values })
}

/// Reads fixed standardization parameters from CSV with header
/// `column,mean,scale`, one row per raw column. Unlisted columns are left as is.
pub fn read_scaling(path: &Path, dims: &ModelDims) -> Result<Vec<ColumnScaling>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scaling(file, &path.display().to_string(), dims)
}

pub fn parse_scaling<R: Read>(reader: R, source: &str, dims: &ModelDims) -> Result<Vec<ColumnScaling>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let names = column_names(dims);
    let mut cols = vec![ColumnScaling::IDENTITY; names.len()];
    let mut seen = vec![false; names.len()];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["column", "mean", "scale"] {
        return Err(parse_err(1, "header must be column,mean,scale".into()));
    }
    for record in rdr.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", record.len())));
        }
        let Some(slot) = names.iter().position(|n| n == &record[0]) else {
            return Err(parse_err(line, format!("unknown column '{}'", &record[0])));
        };
        if std::mem::replace(&mut seen[slot], true) {
            return Err(parse_err(line, format!("column '{}' listed twice", &record[0])));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("'{}' is not a number", &record[i])))
        };
        cols[slot] = ColumnScaling {
            mean: num(1)?,
            scale: num(2)?,
        };
    }
    Ok(cols)
}
