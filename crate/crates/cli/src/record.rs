//! Output records and their JSON-lines / CSV encodings.
//!
//! JSON lines are the canonical store. The CSV export has the fixed columns
//! [`CSV_COLUMNS`]: record metadata, one column per known grid parameter (empty
//! when the experiment does not use it), then the measurement.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub kind: String,
    /// Index of the grid point in grid order.
    pub point: usize,
    pub replicate: usize,
    pub params: BTreeMap<String, f64>,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub oracle: Option<f64>,
    pub pass: bool,
    /// Seed handed to the experiment; replica `i` inside it uses stream `i`.
    pub seed: u64,
    pub samples: Option<u64>,
    pub duration_s: f64,
    pub config: serde_json::Value,
}

/// One fitted slope of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLine {
    pub kind: String,
    pub target: String,
    pub axis: String,
    /// Values of the other grid parameters for this group.
    pub fixed: BTreeMap<String, f64>,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub expected: Option<f64>,
    pub pass: bool,
    pub config: serde_json::Value,
}

pub const PARAM_COLUMNS: [&str; 11] = [
    "n", "alpha", "b", "gamma", "t", "k", "l", "l0", "gap", "r", "lag",
];

pub const CSV_COLUMNS: [&str; 21] = [
    "kind",
    "point",
    "replicate",
    "seed",
    "n",
    "alpha",
    "b",
    "gamma",
    "t",
    "k",
    "l",
    "l0",
    "gap",
    "r",
    "lag",
    "estimate",
    "std_error",
    "oracle",
    "pass",
    "samples",
    "duration_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RecordLine {
    fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.kind.clone(),
            self.point.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
        ];
        row.extend(PARAM_COLUMNS.iter().map(|c| opt(self.params.get(*c))));
        row.extend([
            self.estimate.to_string(),
            opt(self.std_error),
            opt(self.oracle),
            self.pass.to_string(),
            opt(self.samples),
            self.duration_s.to_string(),
        ]);
        row
    }
}

/// Streams records to a sink in either format.
pub struct RecordWriter<W: Write> {
    format: Format,
    jsonl: Option<W>,
    csv: Option<csv::Writer<W>>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(sink: W, format: Format) -> Result<Self, LabError> {
        Ok(match format {
            Format::Jsonl => RecordWriter {
                format,
                jsonl: Some(sink),
                csv: None,
            },
            Format::Csv => {
                let mut w = csv::Writer::from_writer(sink);
                w.write_record(CSV_COLUMNS).map_err(csv_error)?;
                RecordWriter {
                    format,
                    jsonl: None,
                    csv: Some(w),
                }
            }
        })
    }

    pub fn write(&mut self, record: &RecordLine) -> Result<(), LabError> {
        match self.format {
            Format::Jsonl => {
                let w = self.jsonl.as_mut().expect("jsonl sink");
                serde_json::to_writer(&mut *w, record)
                    .map_err(|e| LabError::Record(e.to_string()))?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            Format::Csv => {
                let w = self.csv.as_mut().expect("csv sink");
                w.write_record(record.csv_row()).map_err(csv_error)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::Io(io),
        other => LabError::Record(format!("{other:?}")),
    }
}

/// Write sweep summaries as JSON lines, or as CSV with columns
/// `target,axis,fixed,xs,values,slope,expected,pass` (lists joined by `;`).
pub fn write_sweep<W: Write>(sink: W, lines: &[SweepLine], format: Format) -> Result<(), LabError> {
    match format {
        Format::Jsonl => {
            let mut sink = sink;
            for l in lines {
                serde_json::to_writer(&mut sink, l).map_err(|e| LabError::Record(e.to_string()))?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
        Format::Csv => {
            let join = |v: &[f64]| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            };
            let mut w = csv::Writer::from_writer(sink);
            w.write_record([
                "target", "axis", "fixed", "xs", "values", "slope", "expected", "pass",
            ])
            .map_err(csv_error)?;
            for l in lines {
                let fixed = l
                    .fixed
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([
                    l.target.clone(),
                    l.axis.clone(),
                    fixed,
                    join(&l.xs),
                    join(&l.values),
                    l.slope.to_string(),
                    opt(l.expected),
                    l.pass.to_string(),
                ])
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Read JSON-lines records, skipping blank lines.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<RecordLine>, LabError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| LabError::Record(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
