//! Replicated simulation experiments on the six-covariate logistic DGP.
//!
//! Every replicate draws its own data from a ChaCha stream keyed by
//! `(base_seed, replicate_index)`, so a replicate can be rerun in isolation and
//! the output does not depend on how replicates are scheduled across threads.

mod config;
mod quadrature;
mod report;

pub use config::{load_scenario, parse_scenario};
pub use quadrature::{gauss_legendre, monte_carlo_ate, true_ate_quadrature, McCheck, TrueAte};
pub use report::{write_replicates_csv, write_summary_csv};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{ModelSpec, TrialDataset};
use crate::error::{Error, Result};
use crate::estimators::{fit_leave_one_out_from, standardize, unadjusted_diff_means};
use crate::glm::{expit, FitConfig};
use crate::variance::{bootstrap_from, if_loo_variance, if_plugin_variance, AteEstimate, Method};

/// Covariate coefficients shared by every simulation DGP.
pub const REFERENCE_BETA_X: [f64; 6] = [2.5, 1.8, -2.8, -2.1, 2.0, -2.0];

/// One data-generating process plus how many times to sample it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub label: String,
    pub n: usize,
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_x: [f64; 6],
    pub pi0: f64,
    pub n_replicates: usize,
    /// Bootstrap resamples per replicate; 0 skips the bootstrap.
    pub n_boot: usize,
    pub base_seed: u64,
    pub quadrature_nodes: usize,
    /// Nominal control outcome rate, checked against quadrature when present.
    pub expected_placebo_rate: Option<f64>,
    /// Nominal ATE, checked against quadrature when present.
    pub expected_ate: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::config("dgp.n", "need at least 3 rows"));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(Error::config("dgp.pi0", "must lie in (0, 1)"));
        }
        if !self.beta0.is_finite()
            || !self.beta_a.is_finite()
            || self.beta_x.iter().any(|b| !b.is_finite())
        {
            return Err(Error::config("dgp", "coefficients must be finite"));
        }
        if self.n_replicates == 0 {
            return Err(Error::config("run.n_replicates", "must be at least 1"));
        }
        if self.n_boot == 1 {
            return Err(Error::config(
                "run.n_boot",
                "must be 0 (disabled) or at least 2",
            ));
        }
        if self.quadrature_nodes < 8 {
            return Err(Error::config("run.quadrature_nodes", "must be at least 8"));
        }
        for (field, v) in [
            ("expected.placebo_rate", self.expected_placebo_rate),
            ("expected.ate", self.expected_ate),
        ] {
            if matches!(v, Some(x) if !(-1.0..=1.0).contains(&x)) {
                return Err(Error::config(field, "must lie in [-1, 1]"));
            }
        }
        Ok(())
    }

    /// Correctly specified main-terms working model on all six covariates.
    pub fn working_model(&self) -> ModelSpec {
        ModelSpec::main_terms(6)
    }

    pub fn true_ate(&self) -> Result<TrueAte> {
        true_ate_quadrature(self.beta0, self.beta_a, &self.beta_x, self.quadrature_nodes)
    }
}

/// Settings shared by every replicate of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            level: 0.95,
        }
    }
}

/// RNG for one replicate: the ChaCha stream number is the replicate index.
pub fn replicate_rng(base_seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replicate_index);
    rng
}

fn draw_dataset(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<TrialDataset> {
    let n = scenario.n;
    let mut covariates = Vec::with_capacity(n * 6);
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    for _ in 0..n {
        let mut lin = scenario.beta0;
        for j in 0..6 {
            let x = if j < 4 {
                rng.random::<f64>()
            } else {
                f64::from(u8::from(rng.random_bool(0.5)))
            };
            lin += scenario.beta_x[j] * x;
            covariates.push(x);
        }
        let a = u8::from(rng.random_bool(scenario.pi0));
        lin += scenario.beta_a * f64::from(a);
        treatment.push(a);
        outcome.push(u8::from(rng.random::<f64>() < expit(lin)));
    }
    TrialDataset::new(covariates, 6, treatment, outcome, scenario.pi0)
}

/// Draws replicate `replicate_index` of a scenario.
///
/// X1..X4 ~ U(0,1), X5, X6 ~ Bernoulli(1/2), A ~ Bernoulli(pi0),
/// Y | A, X ~ Bernoulli(expit(b0 + bA A + bX'X)). Fails only when a draw
/// leaves a treatment arm empty.
pub fn generate_dataset(scenario: &Scenario, replicate_index: u64) -> Result<TrialDataset> {
    draw_dataset(
        scenario,
        &mut replicate_rng(scenario.base_seed, replicate_index),
    )
}

/// Why a replicate was dropped from every method's summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    /// Which step failed: `data`, `standardize`, or a method name.
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl Exclusion {
    fn new(stage: &str, err: &Error) -> Self {
        Self {
            stage: stage.to_string(),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate_index: u64,
    /// One estimate per method that ran, in `Method::ALL` order. Empty when excluded.
    pub estimates: Vec<AteEstimate>,
    pub exclusion: Option<Exclusion>,
    /// Full-data working model shows separation (kept, not excluded).
    pub separation_detected: bool,
}

impl ReplicateResult {
    pub fn excluded(&self) -> bool {
        self.exclusion.is_some()
    }

    pub fn estimate(&self, method: Method) -> Option<&AteEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }

    fn exclude(replicate_index: u64, stage: &str, err: &Error) -> Self {
        Self {
            replicate_index,
            estimates: Vec::new(),
            exclusion: Some(Exclusion::new(stage, err)),
            separation_detected: false,
        }
    }
}

pub fn run_replicate(scenario: &Scenario, replicate_index: u64) -> ReplicateResult {
    run_replicate_with(scenario, replicate_index, &RunConfig::default())
}

/// Runs every estimator on one replicate. Any estimator error excludes the
/// whole replicate.
pub fn run_replicate_with(
    scenario: &Scenario,
    replicate_index: u64,
    cfg: &RunConfig,
) -> ReplicateResult {
    let mut rng = replicate_rng(scenario.base_seed, replicate_index);
    let data = match draw_dataset(scenario, &mut rng) {
        Ok(d) => d,
        Err(e) => return ReplicateResult::exclude(replicate_index, "data", &e),
    };
    let boot_seed = rng.next_u64();
    let spec = scenario.working_model();

    let unadjusted = match unadjusted_diff_means(&data, cfg.level) {
        Ok(e) => e,
        Err(e) => {
            return ReplicateResult::exclude(replicate_index, Method::Unadjusted.as_str(), &e)
        }
    };
    let std_result = match standardize(&data, &spec, &cfg.fit) {
        Ok(r) => r,
        Err(e) => return ReplicateResult::exclude(replicate_index, "standardize", &e),
    };
    let plugin = if_plugin_variance(&data, &std_result, cfg.level);
    let loo = fit_leave_one_out_from(&data, &spec, &cfg.fit, std_result.fit.warm_start())
        .and_then(|loo| if_loo_variance(&data, &std_result, &loo, cfg.level));
    let loo = match loo {
        Ok(e) => e,
        Err(e) => return ReplicateResult::exclude(replicate_index, Method::IfLoo.as_str(), &e),
    };
    let mut estimates = vec![loo, plugin];
    if scenario.n_boot > 0 {
        match bootstrap_from(
            &data,
            &std_result,
            &cfg.fit,
            scenario.n_boot,
            boot_seed,
            cfg.level,
        ) {
            Ok(e) => estimates.push(e),
            Err(e) => {
                return ReplicateResult::exclude(replicate_index, Method::Bootstrap.as_str(), &e)
            }
        }
    }
    estimates.push(unadjusted);
    ReplicateResult {
        replicate_index,
        estimates,
        exclusion: None,
        separation_detected: std_result.fit.separation_detected,
    }
}

/// Runs replicates `0..n_replicates` on a pool of `threads` workers
/// (`None` uses rayon's default). Results come back in index order.
pub fn run_scenario(
    scenario: &Scenario,
    cfg: &RunConfig,
    threads: Option<usize>,
) -> Result<Vec<ReplicateResult>> {
    scenario.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    Ok(pool.install(|| {
        (0..scenario.n_replicates as u64)
            .into_par_iter()
            .map(|i| run_replicate_with(scenario, i, cfg))
            .collect()
    }))
}

/// Per-method metrics over the included replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub true_ate: f64,
    pub n_included: usize,
    pub n_excluded: usize,
    pub mean_estimate: f64,
    /// Standard deviation of the point estimates.
    pub se_empirical: f64,
    /// Mean of the estimated standard errors.
    pub est_sd: f64,
    /// Square root of the mean estimated variance.
    pub rms_est_sd: f64,
    /// Percentage of intervals containing the true ATE.
    pub coverage_pct: f64,
    /// Percentage rejecting `theta = 0`; only reported when the true ATE is 0.
    pub type1_pct: Option<f64>,
    /// Percentage rejecting `theta = 0`, whatever the truth.
    pub rejection_pct: f64,
}

/// Aggregates replicate results per method. Replicates are folded in index
/// order, so the output does not depend on the order of `results`.
pub fn summarize(
    results: &[ReplicateResult],
    true_ate: &TrueAte,
    alpha: f64,
) -> Result<Vec<SummaryRow>> {
    let mut ordered: Vec<&ReplicateResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.replicate_index);
    let included: Vec<&ReplicateResult> =
        ordered.iter().copied().filter(|r| !r.excluded()).collect();
    if included.is_empty() {
        return Err(Error::NoIncludedReplicates);
    }
    let n_excluded = ordered.len() - included.len();
    let truth = true_ate.value;
    let null = truth == 0.0;

    let mut rows = Vec::new();
    for method in Method::ALL {
        let ests: Vec<&AteEstimate> = included.iter().filter_map(|r| r.estimate(method)).collect();
        if ests.is_empty() {
            continue;
        }
        let m = ests.len() as f64;
        let mean = ests.iter().map(|e| e.point).sum::<f64>() / m;
        let sd = if ests.len() > 1 {
            (ests.iter().map(|e| (e.point - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let est_sd = ests.iter().map(|e| e.se).sum::<f64>() / m;
        let rms = (ests.iter().map(|e| e.variance).sum::<f64>() / m).sqrt();
        let covered = ests.iter().filter(|e| e.covers(truth)).count() as f64;
        let rejected = ests.iter().filter(|e| e.rejects_null(alpha)).count() as f64;
        let rejection_pct = 100.0 * rejected / m;
        rows.push(SummaryRow {
            method,
            true_ate: truth,
            n_included: ests.len(),
            n_excluded,
            mean_estimate: mean,
            se_empirical: sd,
            est_sd,
            rms_est_sd: rms,
            coverage_pct: 100.0 * covered / m,
            type1_pct: null.then_some(rejection_pct),
            rejection_pct,
        });
    }
    Ok(rows)
}
