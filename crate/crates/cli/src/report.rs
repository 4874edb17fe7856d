//! Versioned JSON and flat CSV renderings of detection results.

use std::io::Write;

use hecpd::pipeline::{ChangePointResult, Diagnostics};
use hecpd::ChangeType;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// Describes the analysed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: Option<String>,
    pub n: usize,
    pub bounds: (f64, f64),
    pub bounds_from_data: bool,
}

/// The detector outcome in report form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub tau_block: Option<usize>,
    pub tau_index: Option<usize>,
    pub confidence_ok: bool,
    pub change_type: ChangeType,
    pub block_size: usize,
    pub n_blocks: usize,
    pub last_block_len: usize,
    pub dropped: usize,
    pub diagnostics: Option<Diagnostics>,
}

impl From<&ChangePointResult> for Outcome {
    fn from(r: &ChangePointResult) -> Self {
        Outcome {
            tau_block: r.tau_block,
            tau_index: r.tau_index,
            confidence_ok: r.confidence_ok,
            change_type: r.change_type,
            block_size: r.layout.block_size,
            n_blocks: r.layout.n_blocks,
            last_block_len: r.layout.last_len,
            dropped: r.layout.dropped,
            diagnostics: r.diagnostics.clone(),
        }
    }
}

/// Top-level document written by the detection commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub input: InputInfo,
    pub result: Outcome,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(
        command: &str,
        seed: u64,
        config: impl Serialize,
        input: InputInfo,
        result: &ChangePointResult,
    ) -> Result<Self, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Output(e.to_string()))?;
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            seed,
            config,
            input,
            result: result.into(),
            warnings: Vec::new(),
        })
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut wtr = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| CliError::Output(e.to_string());
        wtr.write_record(CSV_HEADER).map_err(fail)?;
        wtr.write_record(self.csv_row()).map_err(fail)?;
        wtr.flush().map_err(|e| CliError::Output(e.to_string()))
    }

    fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let r = &self.result;
        let mut row = vec![
            self.schema_version.to_string(),
            self.command.clone(),
            self.seed.to_string(),
            self.input.n.to_string(),
            r.change_type.name().to_owned(),
            r.block_size.to_string(),
            r.n_blocks.to_string(),
            opt(r.tau_block),
            opt(r.tau_index),
            r.confidence_ok.to_string(),
        ];
        match &r.diagnostics {
            Some(d) => row.extend([
                d.counts.cipher_mults.to_string(),
                d.counts.plain_mults.to_string(),
                d.counts.rotations.to_string(),
                d.counts.additions.to_string(),
                d.counts.comparisons.to_string(),
                d.max_depth.to_string(),
                d.gamma.to_string(),
                d.score_gap.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        row
    }
}

/// Machine-readable failure written to stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

impl From<&CliError> for ErrorReport {
    fn from(e: &CliError) -> Self {
        ErrorReport {
            schema_version: SCHEMA_VERSION,
            error: ErrorBody { kind: e.kind().to_owned(), exit_code: e.exit_code(), message: e.to_string() },
        }
    }
}

pub const CSV_HEADER: [&str; 18] = [
    "schema_version",
    "command",
    "seed",
    "n",
    "change_type",
    "block_size",
    "n_blocks",
    "tau_block",
    "tau_index",
    "confidence_ok",
    "cipher_mults",
    "plain_mults",
    "rotations",
    "additions",
    "comparisons",
    "max_depth",
    "gamma",
    "score_gap",
];
