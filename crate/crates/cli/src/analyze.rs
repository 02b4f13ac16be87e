use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ifloo_core::{
    bootstrap_from, fit_leave_one_out_from, if_loo_variance, if_plugin_variance, read_trial_csv,
    standardize, unadjusted_diff_means, AteEstimate, CsvColumns, Error, FitConfig, Method,
    ModelSpec,
};
use serde::Serialize;

use crate::{AnalyzeArgs, Format};

/// Exit status when at least one requested method failed to produce an estimate.
const ESTIMATION_FAILED: u8 = 3;

#[derive(Debug, Serialize)]
pub struct Record {
    pub method: String,
    pub status: &'static str,
    pub reason: Option<String>,
    pub point: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub p_value: Option<f64>,
    pub level: f64,
    pub separation: Option<bool>,
    pub loo_separated: Option<usize>,
    pub bootstrap_failures: Option<usize>,
}

impl Record {
    fn ok(e: &AteEstimate) -> Self {
        Self {
            method: e.method.to_string(),
            status: "ok",
            reason: None,
            point: Some(e.point),
            se: Some(e.se),
            ci_lower: Some(e.ci_lower),
            ci_upper: Some(e.ci_upper),
            p_value: Some(e.p_value),
            level: e.level,
            separation: Some(e.diagnostics.separation_detected),
            loo_separated: e.diagnostics.loo_separated,
            bootstrap_failures: e.diagnostics.bootstrap_failures,
        }
    }

    fn failed(method: Method, level: f64, err: &Error) -> Self {
        Self {
            method: method.to_string(),
            status: "error",
            reason: Some(err.kind().to_string()),
            point: None,
            se: None,
            ci_lower: None,
            ci_upper: None,
            p_value: None,
            level,
            separation: None,
            loo_separated: None,
            bootstrap_failures: None,
        }
    }
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for m in raw {
        let m: Method = m.trim().parse().map_err(anyhow::Error::msg)?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        bail!("no methods requested");
    }
    Ok(methods)
}

pub fn estimate(args: &AnalyzeArgs) -> Result<Vec<Record>> {
    if !(args.level > 0.0 && args.level < 1.0) {
        bail!("--level must lie in (0, 1)");
    }
    let methods = parse_methods(&args.methods)?;
    let columns = CsvColumns {
        outcome: args.outcome.clone(),
        treatment: args.treatment.clone(),
        covariates: args
            .covariates
            .iter()
            .filter(|c| !c.is_empty())
            .cloned()
            .collect(),
    };
    let data = read_trial_csv(&args.input, &columns, args.pi0)?;
    let spec = ModelSpec::new((0..columns.covariates.len()).collect(), args.interactions)?;
    let cfg = FitConfig::default();
    let level = args.level;

    let needs_model = methods.iter().any(|m| *m != Method::Unadjusted);
    let fitted = if needs_model {
        Some(standardize(&data, &spec, &cfg).and_then(|r| {
            if args.fail_on_separation && r.fit.separation_detected {
                Err(Error::InvalidModel(
                    "separation in the full-data working model".into(),
                ))
            } else {
                Ok(r)
            }
        }))
    } else {
        None
    };

    let mut records = Vec::new();
    for method in methods {
        let est = match (method, &fitted) {
            (Method::Unadjusted, _) => unadjusted_diff_means(&data, level),
            (_, Some(Err(e))) => Err(e.clone()),
            (Method::IfPlugin, Some(Ok(r))) => Ok(if_plugin_variance(&data, r, level)),
            (Method::IfLoo, Some(Ok(r))) => {
                fit_leave_one_out_from(&data, &spec, &cfg, r.fit.warm_start())
                    .and_then(|loo| if_loo_variance(&data, r, &loo, level))
            }
            (Method::Bootstrap, Some(Ok(r))) => {
                bootstrap_from(&data, r, &cfg, args.boot, args.seed, level)
            }
            (_, None) => unreachable!("model fitted whenever an adjusted method is requested"),
        };
        records.push(match est {
            Ok(e) => Record::ok(&e),
            Err(e) => Record::failed(method, level, &e),
        });
    }
    Ok(records)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

pub fn render<W: Write>(out: &mut W, records: &[Record], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            for r in records {
                serde_json::to_writer(&mut *out, r)?;
                writeln!(out)?;
            }
        }
        Format::Table => {
            writeln!(
                out,
                "{:<11} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}  notes",
                "method", "status", "estimate", "se", "ci_lower", "ci_upper", "p_value"
            )?;
            for r in records {
                let mut notes = Vec::new();
                if let Some(reason) = &r.reason {
                    notes.push(reason.clone());
                }
                if r.separation == Some(true) {
                    notes.push("separation".into());
                }
                if let Some(k) = r.loo_separated.filter(|&k| k > 0) {
                    notes.push(format!("loo_separated={k}"));
                }
                if let Some(k) = r.bootstrap_failures {
                    notes.push(format!("bootstrap_failures={k}"));
                }
                writeln!(
                    out,
                    "{:<11} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}  {}",
                    r.method,
                    r.status,
                    fmt_opt(r.point),
                    fmt_opt(r.se),
                    fmt_opt(r.ci_lower),
                    fmt_opt(r.ci_upper),
                    fmt_opt(r.p_value),
                    notes.join(" ")
                )?;
            }
        }
    }
    Ok(())
}

pub fn run(args: &AnalyzeArgs) -> Result<ExitCode> {
    let records = estimate(args).with_context(|| format!("analyzing {}", args.input.display()))?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    render(&mut lock, &records, args.format)?;
    if let Some(bad) = records.iter().find(|r| r.status != "ok") {
        eprintln!(
            "error[{}]: method {} failed",
            bad.reason.as_deref().unwrap_or("unknown"),
            bad.method
        );
        return Ok(ExitCode::from(ESTIMATION_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}
