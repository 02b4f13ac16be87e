//! Reading a trial dataset from CSV (header row required, period decimal point).

use std::path::Path;

use crate::data::TrialDataset;
use crate::error::{Error, Result};

/// Column roles for [`read_trial_csv`].
#[derive(Debug, Clone)]
pub struct CsvColumns {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
}

impl CsvColumns {
    fn validate(&self) -> Result<()> {
        if self.outcome == self.treatment {
            return Err(Error::InvalidData(
                "outcome and treatment must be different columns".into(),
            ));
        }
        for c in &self.covariates {
            if c == &self.outcome || c == &self.treatment {
                return Err(Error::InvalidData(format!(
                    "column `{c}` cannot be both a covariate and the outcome/treatment"
                )));
            }
        }
        let mut seen = self.covariates.clone();
        seen.sort();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidData(format!(
                "covariate `{}` listed twice",
                w[0]
            )));
        }
        Ok(())
    }
}

pub fn read_trial_csv(
    path: impl AsRef<Path>,
    columns: &CsvColumns,
    pi0: f64,
) -> Result<TrialDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    read_trial(file, columns, pi0)
}

/// Parses CSV from any reader. Error rows are 1-based file line numbers
/// (the header is line 1). Missing values are rejected, never imputed.
pub fn read_trial<R: std::io::Read>(
    reader: R,
    columns: &CsvColumns,
    pi0: f64,
) -> Result<TrialDataset> {
    columns.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                column: name.to_string(),
                message: "column not found in header".into(),
            })
    };
    let y_idx = find(&columns.outcome)?;
    let a_idx = find(&columns.treatment)?;
    let x_idx: Vec<usize> = columns
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;

    let mut covariates = Vec::new();
    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::Parse {
                    row: line,
                    column: name.to_string(),
                    message: "missing value".into(),
                });
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    column: name.to_string(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        let binary = |idx: usize, name: &str| -> Result<u8> {
            let v = cell(idx, name)?;
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NonBinaryColumn {
                    column: name.to_string(),
                    row: line,
                    value: record.get(idx).unwrap_or("").trim().to_string(),
                })
            }
        };
        outcome.push(binary(y_idx, &columns.outcome)?);
        treatment.push(binary(a_idx, &columns.treatment)?);
        for (&idx, name) in x_idx.iter().zip(&columns.covariates) {
            covariates.push(cell(idx, name)?);
        }
    }
    TrialDataset::new(covariates, x_idx.len(), treatment, outcome, pi0)
}
