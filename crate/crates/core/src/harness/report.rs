//! CSV and JSON emission for risk reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::mc::{RiskReport, RiskRow};
use crate::error::{Error, Result};

/// The reproducible columns of a [`RiskRow`].
#[derive(Serialize)]
struct CsvRow<'a> {
    body: &'a str,
    estimator: &'a str,
    sigma: f64,
    samples: Option<usize>,
    epsilon: Option<f64>,
    adversary: Option<&'a str>,
    trials: usize,
    failed: usize,
    mse: f64,
    std_err: f64,
    pinsker: Option<f64>,
    pinsker_ratio: Option<f64>,
    identity_ratio: Option<f64>,
    trapped: Option<usize>,
    trap_checked: Option<usize>,
    max_gauge: f64,
}

impl<'a> From<&'a RiskRow> for CsvRow<'a> {
    fn from(r: &'a RiskRow) -> Self {
        Self {
            body: &r.body,
            estimator: &r.estimator,
            sigma: r.sigma,
            samples: r.samples,
            epsilon: r.epsilon,
            adversary: r.adversary.as_deref(),
            trials: r.trials,
            failed: r.failed,
            mse: r.mse,
            std_err: r.std_err,
            pinsker: r.pinsker,
            pinsker_ratio: r.pinsker_ratio,
            identity_ratio: r.identity_ratio,
            trapped: r.trapped,
            trap_checked: r.trap_checked,
            max_gauge: r.max_gauge,
        }
    }
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Numeric(format!("csv output: {e}"))
}

/// Serializes any rows as RFC 4180 CSV with a header line.
pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(csv_error)?;
    String::from_utf8(bytes).map_err(csv_error)
}

impl RiskReport {
    /// The table without wall-clock times.
    pub fn to_csv(&self) -> Result<String> {
        to_csv(self.rows.iter().map(CsvRow::from))
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar carrying the plan and timings.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::invalid(format!("cannot create {}: {e}", dir.display())))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("json output: {e}")))?;
        fs::write(&csv_path, self.to_csv()?)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", csv_path.display())))?;
        fs::write(&json_path, json)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", json_path.display())))?;
        Ok((csv_path, json_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct R {
        name: &'static str,
        value: Option<f64>,
    }

    #[test]
    fn quoting_and_empty_options() {
        let text = to_csv([
            R {
                name: "a,b",
                value: None,
            },
            R {
                name: "c\"d",
                value: Some(0.5),
            },
        ])
        .unwrap();
        assert_eq!(text, "name,value\r\n\"a,b\",\r\n\"c\"\"d\",0.5\r\n");
    }
}
