use std::io::Write;

use super::{ReplicateResult, SummaryRow};
use crate::error::{Error, Result};
use crate::variance::Method;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One CSV row per (scenario, method).
pub fn write_summary_csv<W: Write>(out: W, scenario: &str, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "method",
        "true_ate",
        "n_included",
        "n_excluded",
        "mean_estimate",
        "se_empirical",
        "est_sd",
        "rms_est_sd",
        "coverage_pct",
        "type1_pct",
        "rejection_pct",
    ])
    .map_err(csv_err)?;
    for row in rows {
        w.write_record([
            scenario.to_string(),
            row.method.to_string(),
            row.true_ate.to_string(),
            row.n_included.to_string(),
            row.n_excluded.to_string(),
            row.mean_estimate.to_string(),
            row.se_empirical.to_string(),
            row.est_sd.to_string(),
            row.rms_est_sd.to_string(),
            row.coverage_pct.to_string(),
            row.type1_pct.map(|v| v.to_string()).unwrap_or_default(),
            row.rejection_pct.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-replicate audit trail: one row per (replicate, method), or a single
/// row naming the exclusion reason.
pub fn write_replicates_csv<W: Write>(out: W, results: &[ReplicateResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "replicate",
        "method",
        "excluded",
        "reason",
        "point",
        "se",
        "ci_lower",
        "ci_upper",
        "p_value",
        "separation",
    ])
    .map_err(csv_err)?;
    for r in results {
        if let Some(ex) = &r.exclusion {
            w.write_record([
                r.replicate_index.to_string(),
                ex.stage.clone(),
                "true".into(),
                ex.kind.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .map_err(csv_err)?;
            continue;
        }
        for m in Method::ALL {
            if let Some(e) = r.estimate(m) {
                w.write_record([
                    r.replicate_index.to_string(),
                    m.to_string(),
                    "false".into(),
                    String::new(),
                    e.point.to_string(),
                    e.se.to_string(),
                    e.ci_lower.to_string(),
                    e.ci_upper.to_string(),
                    e.p_value.to_string(),
                    r.separation_detected.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
