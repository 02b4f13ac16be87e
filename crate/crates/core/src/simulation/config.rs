//! Scenario files: TOML with `[dgp]`, `[run]` and optional `[expected]` tables.
//!
//! ```toml
//! label = "n50_placebo25_ate0"
//!
//! [dgp]
//! n = 50
//! beta0 = -1.4828
//! beta_a = 0.0
//! beta_x = [2.5, 1.8, -2.8, -2.1, 2.0, -2.0]
//! pi0 = 0.5
//!
//! [run]
//! n_replicates = 2000
//! n_boot = 500
//! base_seed = 50025000
//!
//! [expected]
//! placebo_rate = 0.25
//! ate = 0.0
//! ```

use std::path::Path;

use serde::Deserialize;

use super::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    label: String,
    dgp: RawDgp,
    run: RawRun,
    expected: Option<RawExpected>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDgp {
    n: usize,
    beta0: f64,
    beta_a: f64,
    beta_x: Vec<f64>,
    #[serde(default = "default_pi0")]
    pi0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n_replicates: usize,
    n_boot: usize,
    base_seed: u64,
    #[serde(default = "default_nodes")]
    quadrature_nodes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpected {
    placebo_rate: Option<f64>,
    ate: Option<f64>,
}

fn default_pi0() -> f64 {
    0.5
}

fn default_nodes() -> usize {
    16
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        // toml reports the offending key inside the message; surface it as the field.
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".to_string());
        Error::config(field, msg)
    })?;
    let beta_x: [f64; 6] = raw.dgp.beta_x.as_slice().try_into().map_err(|_| {
        Error::config(
            "dgp.beta_x",
            format!("expected 6 coefficients, found {}", raw.dgp.beta_x.len()),
        )
    })?;
    let expected = raw.expected.unwrap_or(RawExpected {
        placebo_rate: None,
        ate: None,
    });
    let scenario = Scenario {
        label: raw.label,
        n: raw.dgp.n,
        beta0: raw.dgp.beta0,
        beta_a: raw.dgp.beta_a,
        beta_x,
        pi0: raw.dgp.pi0,
        n_replicates: raw.run.n_replicates,
        n_boot: raw.run.n_boot,
        base_seed: raw.run.base_seed,
        quadrature_nodes: raw.run.quadrature_nodes,
        expected_placebo_rate: expected.placebo_rate,
        expected_ate: expected.ate,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    parse_scenario(&text)
}
