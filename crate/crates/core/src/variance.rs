//! Variance estimators for the standardized ATE and the Wald interval/test
//! built from a (point, variance) pair.
//!
//! All influence-function formulas use the known randomization probability
//! `pi0`, never the empirical arm fraction.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Design, ModelSpec, TrialDataset};
use crate::error::{Error, Result};
use crate::estimators::{standardize, CounterfactualDesigns, LooFits, StandardizedResult};
use crate::glm::{check_rank, fit_design, FitConfig, RowWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    IfLoo,
    IfPlugin,
    Bootstrap,
    Unadjusted,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::IfLoo,
        Method::IfPlugin,
        Method::Bootstrap,
        Method::Unadjusted,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::IfLoo => "if-loo",
            Method::IfPlugin => "if-plugin",
            Method::Bootstrap => "bootstrap",
            Method::Unadjusted => "unadjusted",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown method `{s}` (expected if-loo, if-plugin, bootstrap or unadjusted)"
                )
            })
    }
}

/// Method-specific side information attached to an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Variance is exactly zero; the interval collapses to the point.
    pub degenerate_variance: bool,
    /// The full-data working model shows separation.
    pub separation_detected: bool,
    /// Number of leave-one-out refits that show separation.
    pub loo_separated: Option<usize>,
    /// Bootstrap resamples whose refit failed and were dropped.
    pub bootstrap_failures: Option<usize>,
    pub bootstrap_resamples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteEstimate {
    pub method: Method,
    pub point: f64,
    pub variance: f64,
    pub se: f64,
    pub level: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Two-sided p-value for `theta = 0`, from the same standard error as the interval.
    pub p_value: f64,
    pub diagnostics: Diagnostics,
}

impl AteEstimate {
    pub fn new(
        method: Method,
        point: f64,
        variance: f64,
        level: f64,
        mut diagnostics: Diagnostics,
    ) -> Self {
        let variance = variance.max(0.0);
        let w = wald_interval(point, variance, level);
        diagnostics.degenerate_variance = variance == 0.0;
        Self {
            method,
            point,
            variance,
            se: variance.sqrt(),
            level,
            ci_lower: w.lower,
            ci_upper: w.upper,
            p_value: w.p_value,
            diagnostics,
        }
    }

    /// Same estimate with the interval recomputed at another confidence level.
    pub fn at_level(&self, level: f64) -> Self {
        Self::new(
            self.method,
            self.point,
            self.variance,
            level,
            self.diagnostics.clone(),
        )
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }

    pub fn rejects_null(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldInterval {
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Normal-based interval `point -/+ z * sqrt(variance)` and two-sided p-value.
///
/// Zero variance gives the interval `[point, point]` with p-value 0, or 1 when
/// the point itself is 0.
pub fn wald_interval(point: f64, variance: f64, level: f64) -> WaldInterval {
    assert!(
        level > 0.0 && level < 1.0,
        "confidence level must lie in (0, 1)"
    );
    let variance = variance.max(0.0);
    if variance == 0.0 {
        return WaldInterval {
            lower: point,
            upper: point,
            p_value: if point == 0.0 { 1.0 } else { 0.0 },
        };
    }
    let se = variance.sqrt();
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let normal = Normal::standard();
    WaldInterval {
        lower: point - z * se,
        upper: point + z * se,
        p_value: (2.0 * normal.cdf(-(point / se).abs())).min(1.0),
    }
}

/// Evaluated influence-function contributions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceValues(pub Vec<f64>);

impl InfluenceValues {
    /// `(1 / n^2) * sum(phi_i^2)`.
    pub fn variance(&self) -> f64 {
        let n = self.0.len() as f64;
        self.0.iter().map(|p| p * p).sum::<f64>() / (n * n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
fn ipw_weight(a: u8, pi0: f64) -> f64 {
    if a == 1 {
        1.0 / pi0
    } else {
        -1.0 / (1.0 - pi0)
    }
}

#[inline]
fn influence_term(a: u8, y: u8, pi0: f64, mu1: f64, mu0: f64, theta: f64) -> f64 {
    let fitted = if a == 1 { mu1 } else { mu0 };
    ipw_weight(a, pi0) * (f64::from(y) - fitted) + mu1 - mu0 - theta
}

/// Influence values evaluated with the full-data working model.
pub fn plugin_influence(data: &TrialDataset, result: &StandardizedResult) -> InfluenceValues {
    let pi0 = data.pi0();
    InfluenceValues(
        (0..data.len())
            .map(|i| {
                influence_term(
                    data.treatment()[i],
                    data.outcome()[i],
                    pi0,
                    result.predictions_1[i],
                    result.predictions_0[i],
                    result.theta_hat,
                )
            })
            .collect(),
    )
}

/// Influence values where row `i` is evaluated with the model fit without row `i`,
/// centred on the full-data standardized estimate.
pub fn loo_influence(
    data: &TrialDataset,
    result: &StandardizedResult,
    loo: &LooFits,
) -> Result<InfluenceValues> {
    let n = data.len();
    if loo.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: loo.len(),
        });
    }
    let failed = loo.failed_indices();
    if let Some(&first) = failed.first() {
        return Err(Error::LooFailure {
            failed: failed.len(),
            total: n,
            first,
        });
    }
    let cf = CounterfactualDesigns::build(data, loo.spec());
    let pi0 = data.pi0();
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let fit = loo.get(i).expect("failures checked above");
        if fit.beta.len() != cf.treated.k {
            return Err(Error::DimensionMismatch {
                expected: cf.treated.k,
                found: fit.beta.len(),
            });
        }
        let (mu1, mu0) = cf.predict(fit, i);
        phi.push(influence_term(
            data.treatment()[i],
            data.outcome()[i],
            pi0,
            mu1,
            mu0,
            result.theta_hat,
        ));
    }
    Ok(InfluenceValues(phi))
}

fn adjusted_diagnostics(result: &StandardizedResult) -> Diagnostics {
    Diagnostics {
        separation_detected: result.fit.separation_detected,
        ..Diagnostics::default()
    }
}

/// `sigma^2 = V_hat / n` with `V_hat` the mean squared plug-in influence value.
pub fn if_plugin_variance(
    data: &TrialDataset,
    result: &StandardizedResult,
    level: f64,
) -> AteEstimate {
    let variance = plugin_influence(data, result).variance();
    AteEstimate::new(
        Method::IfPlugin,
        result.theta_hat,
        variance,
        level,
        adjusted_diagnostics(result),
    )
}

/// `sigma^2 = (1 / n^2) * sum(phi_{-i}^2)` using the leave-one-out fits.
pub fn if_loo_variance(
    data: &TrialDataset,
    result: &StandardizedResult,
    loo: &LooFits,
    level: f64,
) -> Result<AteEstimate> {
    let variance = loo_influence(data, result, loo)?.variance();
    let diagnostics = Diagnostics {
        loo_separated: Some(loo.separated_indices().len()),
        ..adjusted_diagnostics(result)
    };
    Ok(AteEstimate::new(
        Method::IfLoo,
        result.theta_hat,
        variance,
        level,
        diagnostics,
    ))
}

/// Row indices for each bootstrap resample, drawn sequentially from `seed`.
pub fn bootstrap_indices(n: usize, n_boot: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_boot)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Nonparametric bootstrap variance of the standardized estimate.
///
/// Resamples whose refit errors or fails to converge are dropped and counted.
/// The point estimate stays the full-data estimate; the interval is Wald with
/// the bootstrap standard deviation.
pub fn bootstrap_variance(
    data: &TrialDataset,
    spec: &ModelSpec,
    cfg: &FitConfig,
    n_boot: usize,
    seed: u64,
    level: f64,
) -> Result<AteEstimate> {
    let result = standardize(data, spec, cfg)?;
    bootstrap_from(data, &result, cfg, n_boot, seed, level)
}

/// Bootstrap around an existing full-data result (avoids refitting it).
pub fn bootstrap_from(
    data: &TrialDataset,
    result: &StandardizedResult,
    cfg: &FitConfig,
    n_boot: usize,
    seed: u64,
    level: f64,
) -> Result<AteEstimate> {
    if n_boot < 2 {
        return Err(Error::config(
            "n_boot",
            "need at least 2 bootstrap resamples",
        ));
    }
    let spec = &result.spec;
    let n = data.len();
    let design = Design::build(data, spec)?;
    let cf = CounterfactualDesigns::build(data, spec);

    let resamples = bootstrap_indices(n, n_boot, seed);
    let thetas: Vec<Option<f64>> = resamples
        .par_iter()
        .map(|rows| {
            let mut counts = vec![0u32; n];
            for &r in rows {
                counts[r] += 1;
            }
            let weights = RowWeights::Counts(&counts);
            check_rank(&design, weights).ok()?;
            let fit = fit_design(
                &design,
                data.outcome(),
                weights,
                result.fit.warm_start(),
                cfg,
            )
            .ok()?;
            if !fit.converged {
                return None;
            }
            let mut sum = 0.0;
            for &r in rows {
                let (p1, p0) = cf.predict(&fit, r);
                sum += p1 - p0;
            }
            Some(sum / n as f64)
        })
        .collect();

    let ok: Vec<f64> = thetas.iter().flatten().copied().collect();
    let failed = n_boot - ok.len();
    if 2 * failed > n_boot || ok.len() < 2 {
        return Err(Error::BootstrapDegenerate {
            failed,
            total: n_boot,
        });
    }
    let m = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / m;
    let variance = ok.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let diagnostics = Diagnostics {
        bootstrap_failures: Some(failed),
        bootstrap_resamples: Some(n_boot),
        ..adjusted_diagnostics(result)
    };
    Ok(AteEstimate::new(
        Method::Bootstrap,
        result.theta_hat,
        variance,
        level,
        diagnostics,
    ))
}
