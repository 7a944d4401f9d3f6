//! Experiment reports with a fixed row schema, written as JSON or CSV.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// One metric record. Columns that do not apply to an experiment are left
/// empty so every report shares the same CSV header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub instance: String,
    pub seed: Option<u64>,
    pub u: Option<usize>,
    pub width: Option<usize>,
    pub achieved_return: Option<f64>,
    pub optimal_return: Option<f64>,
    pub gap: Option<f64>,
    pub gap_k_units: Option<f64>,
    pub rate: Option<f64>,
    pub g_max: Option<f64>,
    pub train_error: Option<f64>,
    pub nonzero: Option<usize>,
    pub lower_bound: Option<usize>,
    pub passed: Option<bool>,
    pub note: String,
}

impl ReportRow {
    pub fn new(method: impl Into<String>, instance: impl Into<String>) -> Self {
        ReportRow { method: method.into(), instance: instance.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub params: BTreeMap<String, String>,
    rows: Vec<ReportRow>,
    pub schema_version: u32,
}

impl ExperimentReport {
    pub fn new(experiment_id: impl Into<String>) -> Self {
        ExperimentReport {
            experiment_id: experiment_id.into(),
            params: BTreeMap::new(),
            rows: Vec::new(),
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) {
        self.rows.extend(rows);
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// Rows whose check failed.
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.passed == Some(false))
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "method",
    "instance",
    "seed",
    "u",
    "width",
    "achieved_return",
    "optimal_return",
    "gap",
    "gap_k_units",
    "rate",
    "g_max",
    "train_error",
    "nonzero",
    "lower_bound",
    "passed",
    "note",
];
