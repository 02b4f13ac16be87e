//! Covariate-adjusted estimation of the marginal risk difference in
//! randomized trials with binary outcomes.
//!
//! The standardized (g-computation) estimator fits a logistic working model,
//! predicts every subject's outcome under treatment and under control, and
//! averages the difference. Its variance can be estimated four ways:
//!
//! * [`if_loo_variance`]: influence function evaluated with leave-one-out
//!   working-model fits, so no subject's residual comes from a model trained
//!   on that subject;
//! * [`if_plugin_variance`]: the same influence function evaluated with the
//!   full-data fit;
//! * [`bootstrap_variance`]: nonparametric bootstrap of the whole procedure;
//! * [`unadjusted_diff_means`]: the difference in arm means with a Bernoulli
//!   plug-in variance, for reference.
//!
//! The [`simulation`] module reproduces coverage and type-I error studies on a
//! six-covariate logistic data-generating process.

pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod io;
pub mod simulation;
pub mod variance;

pub use data::{ModelSpec, TrialDataset};
pub use error::{Error, Result};
pub use estimators::{
    fit_leave_one_out, fit_leave_one_out_from, standardize, unadjusted_diff_means, LooFits,
    StandardizedResult,
};
pub use glm::{expit, fit_logistic, logit, predict_prob, FitConfig, GlmFit};
pub use io::{read_trial, read_trial_csv, CsvColumns};
pub use simulation::{Scenario, SummaryRow, TrueAte};
pub use variance::{
    bootstrap_from, bootstrap_indices, bootstrap_variance, if_loo_variance, if_plugin_variance,
    loo_influence, plugin_influence, wald_interval, AteEstimate, Diagnostics, InfluenceValues,
    Method, WaldInterval,
};
