//! Point estimators: standardization (g-computation), the unadjusted
//! difference in means, and the leave-one-out working-model refits.

use rayon::prelude::*;

use crate::data::{Design, ModelSpec, TrialDataset};
use crate::error::{Error, Result};
use crate::glm::{
    self, check_rank, expit, fit_design, leverages, loo_newton_starts, FitConfig, GlmFit,
    RowWeights,
};
use crate::variance::{AteEstimate, Diagnostics, Method};

/// Rows whose deletion leaves `1 - h_ii` below this are treated as rank-dropping.
const LEVERAGE_TOLERANCE: f64 = 1e-10;

/// Full-data standardized estimate and the predictions it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedResult {
    pub theta_hat: f64,
    pub fit: GlmFit,
    /// `mu_hat(1, X_i)`.
    pub predictions_1: Vec<f64>,
    /// `mu_hat(0, X_i)`.
    pub predictions_0: Vec<f64>,
    pub spec: ModelSpec,
}

impl StandardizedResult {
    /// `mu_hat(A_i, X_i)`, the fitted value at the observed treatment.
    pub fn fitted(&self, data: &TrialDataset) -> Vec<f64> {
        data.treatment()
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if a == 1 {
                    self.predictions_1[i]
                } else {
                    self.predictions_0[i]
                }
            })
            .collect()
    }
}

/// Design rows with treatment forced to 1 and to 0.
pub(crate) struct CounterfactualDesigns {
    pub(crate) treated: Design,
    pub(crate) control: Design,
}

impl CounterfactualDesigns {
    pub(crate) fn build(data: &TrialDataset, spec: &ModelSpec) -> Self {
        let n = data.len();
        let k = spec.n_coefficients();
        let mut treated = vec![0.0; n * k];
        let mut control = vec![0.0; n * k];
        for i in 0..n {
            let x = data.covariate_row(i);
            spec.fill_design_row(1.0, x, &mut treated[i * k..(i + 1) * k]);
            spec.fill_design_row(0.0, x, &mut control[i * k..(i + 1) * k]);
        }
        Self {
            treated: Design::from_values(treated, n, k),
            control: Design::from_values(control, n, k),
        }
    }

    pub(crate) fn predict(&self, fit: &GlmFit, i: usize) -> (f64, f64) {
        (
            expit(fit.linear_predictor(self.treated.row(i))),
            expit(fit.linear_predictor(self.control.row(i))),
        )
    }
}

/// Fits the working model on all rows and averages `mu_hat(1, X_i) - mu_hat(0, X_i)`.
pub fn standardize(
    data: &TrialDataset,
    spec: &ModelSpec,
    cfg: &FitConfig,
) -> Result<StandardizedResult> {
    let fit = glm::fit_logistic(data, spec, cfg)?;
    if !fit.converged {
        return Err(Error::NonConverged {
            iterations: fit.iterations,
        });
    }
    Ok(standardize_with_fit(data, spec, fit))
}

pub(crate) fn standardize_with_fit(
    data: &TrialDataset,
    spec: &ModelSpec,
    fit: GlmFit,
) -> StandardizedResult {
    let cf = CounterfactualDesigns::build(data, spec);
    let (predictions_1, predictions_0): (Vec<f64>, Vec<f64>) =
        (0..data.len()).map(|i| cf.predict(&fit, i)).unzip();
    let theta_hat = predictions_1
        .iter()
        .zip(&predictions_0)
        .map(|(p1, p0)| p1 - p0)
        .sum::<f64>()
        / data.len() as f64;
    StandardizedResult {
        theta_hat,
        fit,
        predictions_1,
        predictions_0,
        spec: spec.clone(),
    }
}

/// Difference of arm means with the Bernoulli plug-in variance
/// `p1 (1 - p1) / n1 + p0 (1 - p0) / n0`.
pub fn unadjusted_diff_means(data: &TrialDataset, level: f64) -> Result<AteEstimate> {
    let (mut n1, mut s1, mut n0, mut s0) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &y) in data.treatment().iter().zip(data.outcome()) {
        if a == 1 {
            n1 += 1;
            s1 += usize::from(y);
        } else {
            n0 += 1;
            s0 += usize::from(y);
        }
    }
    if n1 == 0 {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if n0 == 0 {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let p1 = s1 as f64 / n1 as f64;
    let p0 = s0 as f64 / n0 as f64;
    let variance = p1 * (1.0 - p1) / n1 as f64 + p0 * (1.0 - p0) / n0 as f64;
    Ok(AteEstimate::new(
        Method::Unadjusted,
        p1 - p0,
        variance,
        level,
        Diagnostics::default(),
    ))
}

/// The `n` working models fit with one row held out each.
#[derive(Debug, Clone)]
pub struct LooFits {
    spec: ModelSpec,
    entries: Vec<std::result::Result<GlmFit, Error>>,
}

impl LooFits {
    /// Wraps already-computed per-row fits, e.g. to inject a fixed model.
    pub fn from_fits(spec: ModelSpec, fits: Vec<GlmFit>) -> Self {
        Self {
            spec,
            entries: fits.into_iter().map(Ok).collect(),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Model fit without row `i`, or the reason that refit failed.
    pub fn get(&self, i: usize) -> std::result::Result<&GlmFit, &Error> {
        self.entries[i].as_ref()
    }

    /// Indices whose refit errored or did not converge.
    pub fn failed_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !matches!(e, Ok(f) if f.converged))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices whose refit converged but shows separation.
    pub fn separated_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, Ok(f) if f.separation_detected))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Refits the working model `n` times, each time without one row.
///
/// Each refit starts from the full-data estimate when that fit has a finite optimum.
pub fn fit_leave_one_out(
    data: &TrialDataset,
    spec: &ModelSpec,
    cfg: &FitConfig,
) -> Result<LooFits> {
    let full = glm::fit_logistic(data, spec, cfg).ok();
    fit_leave_one_out_from(data, spec, cfg, full.as_ref().and_then(GlmFit::warm_start))
}

/// Leave-one-out refits from an explicit start value (`None` starts at zero).
pub fn fit_leave_one_out_from(
    data: &TrialDataset,
    spec: &ModelSpec,
    cfg: &FitConfig,
    start: Option<&[f64]>,
) -> Result<LooFits> {
    cfg.validate()?;
    let n = data.len();
    if n < 3 {
        return Err(Error::InvalidData(format!(
            "leave-one-out needs at least 3 rows, got {n}"
        )));
    }
    let design = Design::build(data, spec)?;
    let k = design.k;
    let full_rank = check_rank(&design, RowWeights::All);
    let lev = match full_rank {
        Ok(()) => leverages(&design),
        Err(_) => None,
    };

    let starts = match (start, &full_rank) {
        (Some(s), Ok(())) if s.len() == k => Some(loo_newton_starts(&design, data.outcome(), s)),
        _ => None,
    };

    let entries = (0..n)
        .into_par_iter()
        .map(|i| {
            match (&full_rank, &lev) {
                (Err(e), _) => return Err(e.clone()),
                (Ok(()), Some(h)) if 1.0 - h[i] <= LEVERAGE_TOLERANCE => {
                    return Err(Error::RankDeficient {
                        rank: k - 1,
                        columns: k,
                    })
                }
                (Ok(()), None) => check_rank(&design, RowWeights::Exclude(i))?,
                _ => {}
            }
            let start = starts.as_ref().map(|s| s[i].as_slice()).or(start);
            fit_design(&design, data.outcome(), RowWeights::Exclude(i), start, cfg)
        })
        .collect();
    Ok(LooFits {
        spec: spec.clone(),
        entries,
    })
}
