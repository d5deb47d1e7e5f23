//! Serialization of power reports and datasets.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{DepError, Result};
use crate::experiment::{PowerCell, PowerReport};
use crate::sample::{Matrix, PairedSample};

pub const REPORT_CSV_HEADER: &str = "test,theta,n,d,repetitions,accept_count,accept_rate,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn emit_cells_csv<W: Write>(cells: &[PowerCell], mut out: W) -> io::Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{}",
            c.test, c.theta, c.n, c.d, c.repetitions, c.accept_count, c.accept_rate, c.seed
        )?;
    }
    Ok(())
}

pub fn emit_report<W: Write>(report: &PowerReport, format: ReportFormat, mut out: W) -> io::Result<()> {
    match format {
        ReportFormat::Csv => emit_cells_csv(&report.cells, out),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)
        }
    }
}

pub fn parse_report_json<R: Read>(input: R) -> Result<PowerReport> {
    serde_json::from_reader(input).map_err(|e| DepError::invalid(format!("report json: {e}")))
}

/// Cells from report CSV. Rates are recomputed from the counts.
pub fn parse_report_csv<R: Read>(input: R) -> Result<Vec<PowerCell>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| DepError::invalid(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != REPORT_CSV_HEADER {
        return Err(DepError::invalid(format!("unexpected report header '{}'", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DepError::invalid(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| DepError::invalid(format!("line {line}: bad {what} '{}'", field(0)));
        let repetitions: usize = field(4).parse().map_err(|_| bad("repetitions"))?;
        let accept_count: usize = field(5).parse().map_err(|_| bad("accept_count"))?;
        cells.push(PowerCell {
            test: field(0).to_string(),
            theta: field(1).parse().map_err(|_| bad("theta"))?,
            n: field(2).parse().map_err(|_| bad("n"))?,
            d: field(3).parse().map_err(|_| bad("d"))?,
            repetitions,
            accept_count,
            accept_rate: accept_count as f64 / repetitions as f64,
            seed: field(7).parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(cells)
}

/// Failure while reading a dataset, with the 1-based line where it occurred.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct DatasetError {
    pub line: u64,
    pub message: String,
}

fn dataset_error(line: u64, message: impl Into<String>) -> DatasetError {
    DatasetError { line, message: message.into() }
}

/// Parses `x1..xp,y1..yq` headers, returning `(p, q)`.
fn parse_header(fields: &[&str]) -> std::result::Result<(usize, usize), DatasetError> {
    let mut p = 0;
    let mut q = 0;
    for (i, f) in fields.iter().enumerate() {
        let f = f.trim();
        let (side, idx) = f.split_at(f.len().min(1));
        let idx: usize = idx.parse().map_err(|_| dataset_error(1, format!("bad header column '{f}'")))?;
        match side {
            "x" if q == 0 && idx == p + 1 => p += 1,
            "y" if idx == q + 1 && p > 0 => q += 1,
            _ => {
                return Err(dataset_error(
                    1,
                    format!("header column {} is '{f}'; expected x1..xp followed by y1..yq", i + 1),
                ))
            }
        }
    }
    if p == 0 || q == 0 {
        return Err(dataset_error(1, "header needs at least one x and one y column"));
    }
    Ok((p, q))
}

/// Reads the dataset CSV format: header `x1..xp,y1..yq`, one observation per row.
pub fn read_dataset<R: BufRead>(input: R) -> std::result::Result<PairedSample, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(dataset_error(1, "empty dataset")),
        Some(r) => r.map_err(|e| dataset_error(1, e.to_string()))?,
    };
    let (p, q) = parse_header(&header.iter().collect::<Vec<_>>())?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            dataset_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != p + q {
            return Err(dataset_error(line, format!("expected {} fields, found {}", p + q, record.len())));
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| dataset_error(line, format!("field {} is not a number: '{field}'", i + 1)))?;
            if !v.is_finite() {
                return Err(dataset_error(line, format!("field {} is not finite", i + 1)));
            }
            if i < p {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = xs.len() / p;
    let x = Matrix::from_row_slice(n, p, &xs);
    let y = Matrix::from_row_slice(n, q, &ys);
    PairedSample::new(x, y).map_err(|e| dataset_error(1 + n as u64, e.to_string()))
}

/// Writes the dataset CSV format with shortest round-trip number formatting.
pub fn write_dataset<W: Write>(sample: &PairedSample, mut out: W) -> io::Result<()> {
    let header: Vec<String> = (1..=sample.p())
        .map(|i| format!("x{i}"))
        .chain((1..=sample.q()).map(|i| format!("y{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..sample.n() {
        let row: Vec<String> = sample
            .x()
            .row(i)
            .iter()
            .chain(sample.y().row(i).iter())
            .map(|v| format!("{v:?}"))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
