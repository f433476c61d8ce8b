//! Per-epoch metrics CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::train::EpochReport;

pub const COLUMNS: [&str; 12] = [
    "epoch",
    "steps",
    "ep_reward",
    "ep_cost",
    "success_rate",
    "feasible_rate",
    "lambda_l",
    "lambda_s",
    "loss_pi",
    "loss_v",
    "loss_vc",
    "loss_B",
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: u64,
    pub steps: u64,
    pub ep_reward: f64,
    pub ep_cost: f64,
    pub success_rate: f64,
    pub feasible_rate: f64,
    pub lambda_l: f64,
    pub lambda_s: f64,
    pub loss_pi: f64,
    pub loss_v: f64,
    pub loss_vc: f64,
    pub loss_b: f64,
}

impl From<&EpochReport> for MetricsRow {
    fn from(r: &EpochReport) -> Self {
        Self {
            epoch: r.epoch,
            steps: r.steps,
            ep_reward: r.ep_reward,
            ep_cost: r.ep_cost,
            success_rate: r.success_rate,
            feasible_rate: r.feasible_rate,
            lambda_l: r.lambda_long,
            lambda_s: r.lambda_short,
            loss_pi: r.loss_pi,
            loss_v: r.loss_v,
            loss_vc: r.loss_vc,
            loss_b: r.loss_b,
        }
    }
}

impl MetricsRow {
    /// Shortest round-trip formatting, so identical runs give identical bytes.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.steps,
            self.ep_reward,
            self.ep_cost,
            self.success_rate,
            self.feasible_rate,
            self.lambda_l,
            self.lambda_s,
            self.loss_pi,
            self.loss_v,
            self.loss_vc,
            self.loss_b
        )
    }

    fn parse(fields: &csv::StringRecord) -> Result<Self, String> {
        if fields.len() != COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", COLUMNS.len(), fields.len()));
        }
        let f = |i: usize| -> Result<f64, String> {
            fields[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("column {} is not a number: `{}`", COLUMNS[i], &fields[i]))
        };
        let u = |i: usize| -> Result<u64, String> {
            fields[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| format!("column {} is not an integer: `{}`", COLUMNS[i], &fields[i]))
        };
        Ok(Self {
            epoch: u(0)?,
            steps: u(1)?,
            ep_reward: f(2)?,
            ep_cost: f(3)?,
            success_rate: f(4)?,
            feasible_rate: f(5)?,
            lambda_l: f(6)?,
            lambda_s: f(7)?,
            loss_pi: f(8)?,
            loss_v: f(9)?,
            loss_vc: f(10)?,
            loss_b: f(11)?,
        })
    }
}

/// Appends rows to a metrics file, flushing after each.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    /// Starts a fresh file with a header.
    pub fn create(path: &Path) -> Result<Self, MetricsError> {
        let io_err = |source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(out, "{}", COLUMNS.join(",")).map_err(io_err)?;
        out.flush().map_err(io_err)?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    /// Continues an existing file after dropping every row past `epoch`.
    pub fn resume(path: &Path, epoch: u64) -> Result<Self, MetricsError> {
        let keep: Vec<MetricsRow> = match read_metrics(path) {
            Ok(rows) => rows.into_iter().filter(|r| r.epoch <= epoch).collect(),
            Err(MetricsError::Empty { .. }) => Vec::new(),
            Err(MetricsError::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut w = Self::create(path)?;
        for row in &keep {
            w.append(row)?;
        }
        Ok(w)
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<(), MetricsError> {
        let io_err = |source| MetricsError::Io {
            path: self.path.clone(),
            source,
        };
        writeln!(self.out, "{}", row.to_line()).map_err(io_err)?;
        self.out.flush().map_err(io_err)
    }
}

/// Reads a metrics CSV. Row numbers in errors count the header as row 1.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_metrics(&text, path)
}

pub fn parse_metrics(text: &str, path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    let row_err = |row, message| MetricsError::Row {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records().enumerate();
    match records.next() {
        None => return Err(MetricsError::Empty { path: path.to_path_buf() }),
        Some((_, header)) => {
            let header = header.map_err(|e| row_err(1, e.to_string()))?;
            let names: Vec<&str> = header.iter().map(str::trim).collect();
            if names != COLUMNS {
                return Err(row_err(1, format!("unexpected header `{}`", names.join(","))));
            }
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in records {
        let rec = rec.map_err(|e| row_err(i + 1, e.to_string()))?;
        rows.push(MetricsRow::parse(&rec).map_err(|m| row_err(i + 1, m))?);
    }
    if rows.is_empty() {
        return Err(MetricsError::Empty { path: path.to_path_buf() });
    }
    Ok(rows)
}
