//! Logistic working model: maximum likelihood by iteratively reweighted
//! least squares with step-halving, plus counterfactual prediction.

use nalgebra::{DMatrix, DVector};

use crate::data::{Design, ModelSpec, TrialDataset};
use crate::error::{Error, Result};

/// Coefficient magnitude beyond which a fit is flagged as separated.
pub const SEPARATION_COEF_CAP: f64 = 15.0;

/// Largest |y - mu| on every row at which a separated fit stops iterating.
pub const COMPLETE_SEPARATION_RESIDUAL: f64 = 1e-4;

/// Lower bound on the IRLS weight `mu (1 - mu)`.
pub const WEIGHT_FLOOR: f64 = 1e-10;

const RANK_TOLERANCE: f64 = 1e-10;

/// Numerically stable logistic function `1 / (1 + exp(-z))`.
#[inline]
pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(p / (1 - p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the largest absolute coefficient update.
    pub coef_tolerance: f64,
    /// Relative deviance change `|dev - dev_old| / (|dev| + 0.1)` accepted as
    /// convergence once a fit is already flagged as separated. Separated fits
    /// diverge, so the coefficient criterion alone would never fire.
    pub deviance_tolerance: f64,
    /// Fitted probabilities outside `[eps, 1 - eps]` at every row flag complete separation.
    pub separation_probability_threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            coef_tolerance: 1e-8,
            deviance_tolerance: 1e-8,
            separation_probability_threshold: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if !(self.coef_tolerance > 0.0) {
            return Err(Error::config("coef_tolerance", "must be positive"));
        }
        if !(self.deviance_tolerance > 0.0) {
            return Err(Error::config("deviance_tolerance", "must be positive"));
        }
        let eps = self.separation_probability_threshold;
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::config(
                "separation_probability_threshold",
                "must lie in (0, 0.5)",
            ));
        }
        Ok(())
    }
}

/// A fitted logistic working model.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    /// Ordered (intercept, treatment, covariates[, interactions]).
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub separation_detected: bool,
    /// Log-likelihood at the start value followed by one entry per iteration.
    pub log_likelihood_history: Vec<f64>,
}

impl GlmFit {
    /// Start value for refits on perturbed data. A separated fit has no
    /// finite optimum to start near, so refits of it start from zero.
    pub fn warm_start(&self) -> Option<&[f64]> {
        (self.converged && !self.separation_detected).then_some(self.beta.as_slice())
    }

    /// `m_beta(row)` for a prepared design row.
    #[inline]
    pub(crate) fn linear_predictor(&self, row: &[f64]) -> f64 {
        dot(&self.beta, row)
    }
}

/// Which rows of a design enter a fit, and with what multiplicity.
#[derive(Debug, Clone, Copy)]
pub(crate) enum RowWeights<'a> {
    All,
    Exclude(usize),
    Counts(&'a [u32]),
}

impl RowWeights<'_> {
    #[inline]
    fn weight(&self, i: usize) -> f64 {
        match *self {
            RowWeights::All => 1.0,
            RowWeights::Exclude(j) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            RowWeights::Counts(c) => f64::from(c[i]),
        }
    }
}

/// Fits the logistic working model by maximum likelihood.
///
/// Returns `Ok` with `converged == false` when the iteration cap is hit;
/// rank deficiency and a constant outcome are errors.
pub fn fit_logistic(data: &TrialDataset, spec: &ModelSpec, cfg: &FitConfig) -> Result<GlmFit> {
    cfg.validate()?;
    let design = Design::build(data, spec)?;
    check_rank(&design, RowWeights::All)?;
    fit_design(&design, data.outcome(), RowWeights::All, None, cfg)
}

/// Predicted probability `expit(m_beta(a, x))` for the full covariate row `x`.
pub fn predict_prob(fit: &GlmFit, spec: &ModelSpec, a: u8, x: &[f64]) -> Result<f64> {
    let k = spec.n_coefficients();
    if fit.beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: fit.beta.len(),
        });
    }
    if a > 1 {
        return Err(Error::InvalidData(format!(
            "treatment value {a} is not 0/1"
        )));
    }
    if let Some(&c) = spec.covariate_columns().iter().max() {
        if c >= x.len() {
            return Err(Error::DimensionMismatch {
                expected: c + 1,
                found: x.len(),
            });
        }
    }
    let mut row = vec![0.0; k];
    spec.fill_design_row(f64::from(a), x, &mut row);
    Ok(expit(fit.linear_predictor(&row)))
}

/// Errors with `RankDeficient` unless the rows with positive weight span all columns.
pub(crate) fn check_rank(design: &Design, weights: RowWeights<'_>) -> Result<()> {
    let rows: Vec<usize> = (0..design.n).filter(|&i| weights.weight(i) > 0.0).collect();
    let k = design.k;
    if rows.len() < k {
        return Err(Error::RankDeficient {
            rank: rows.len(),
            columns: k,
        });
    }
    let m = DMatrix::from_fn(rows.len(), k, |r, c| design.row(rows[r])[c]);
    let qr = m.col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|j| r[(j, j)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let rank = diag
        .iter()
        .filter(|&&d| d > RANK_TOLERANCE * largest)
        .count();
    if largest == 0.0 || rank < k {
        return Err(Error::RankDeficient { rank, columns: k });
    }
    Ok(())
}

/// Leverages `h_ii = d_i' (D'D)^-1 d_i` of a full-rank design. Deleting row `i`
/// drops the rank exactly when `h_ii == 1`.
pub(crate) fn leverages(design: &Design) -> Option<Vec<f64>> {
    let k = design.k;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for i in 0..design.n {
        let d = design.row(i);
        for a in 0..k {
            for b in 0..=a {
                gram[(a, b)] += d[a] * d[b];
            }
        }
    }
    symmetrize(&mut gram);
    let chol = gram.cholesky()?;
    Some(
        (0..design.n)
            .map(|i| {
                let d = DVector::from_column_slice(design.row(i));
                d.dot(&chol.solve(&d))
            })
            .collect(),
    )
}

struct Evaluation {
    log_likelihood: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
    min_prob: f64,
    max_prob: f64,
    /// Largest `|y - mu|` over rows with positive weight.
    max_residual: f64,
}

fn evaluate(design: &Design, y: &[u8], weights: RowWeights<'_>, beta: &[f64]) -> Evaluation {
    let n = design.n;
    let eta = &design.matrix * DVector::from_column_slice(beta);
    let mut ll = 0.0;
    let mut resid = DVector::<f64>::zeros(n);
    let mut w = vec![0.0; n];
    let (mut min_prob, mut max_prob, mut max_residual) = (1.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let c = weights.weight(i);
        if c == 0.0 {
            continue;
        }
        let eta = eta[i];
        // One exponential serves both mu and log(1 + exp(-|eta|)).
        let e = (-eta.abs()).exp();
        let mu = if eta >= 0.0 {
            1.0 / (1.0 + e)
        } else {
            e / (1.0 + e)
        };
        let log1p_e = e.ln_1p();
        let yi = f64::from(y[i]);
        ll -= c * if y[i] == 1 {
            log1p_e + (-eta).max(0.0)
        } else {
            log1p_e + eta.max(0.0)
        };
        min_prob = min_prob.min(mu);
        max_prob = max_prob.max(mu);
        max_residual = max_residual.max((yi - mu).abs());
        resid[i] = c * (yi - mu);
        w[i] = c * (mu * (1.0 - mu)).max(WEIGHT_FLOOR);
    }
    let gradient = design.matrix.tr_mul(&resid);
    let mut weighted = design.matrix.clone();
    for mut col in weighted.column_iter_mut() {
        for (v, wi) in col.iter_mut().zip(&w) {
            *v *= wi;
        }
    }
    let hessian = design.matrix.tr_mul(&weighted);
    Evaluation {
        log_likelihood: ll,
        gradient,
        hessian,
        min_prob,
        max_prob,
        max_residual,
    }
}

/// Start values for the leave-one-out refits: one Newton step from `start`
/// on the data without row `i`, using the full-data gradient and Hessian
/// with row `i`'s contribution removed.
pub(crate) fn loo_newton_starts(design: &Design, y: &[u8], start: &[f64]) -> Vec<Vec<f64>> {
    let full = evaluate(design, y, RowWeights::All, start);
    (0..design.n)
        .map(|i| {
            let d = DVector::from_column_slice(design.row(i));
            let mu = expit(dot(start, design.row(i)));
            let w = (mu * (1.0 - mu)).max(WEIGHT_FLOOR);
            let gradient = &full.gradient - &d * (f64::from(y[i]) - mu);
            let hessian = &full.hessian - &d * d.transpose() * w;
            match hessian.cholesky().map(|c| c.solve(&gradient)) {
                Some(step) if step.iter().all(|s| s.is_finite()) => {
                    start.iter().zip(step.iter()).map(|(b, s)| b + s).collect()
                }
                _ => start.to_vec(),
            }
        })
        .collect()
}

/// IRLS on a prepared design. Rank is the caller's responsibility.
pub(crate) fn fit_design(
    design: &Design,
    y: &[u8],
    weights: RowWeights<'_>,
    start: Option<&[f64]>,
    cfg: &FitConfig,
) -> Result<GlmFit> {
    let k = design.k;
    let (mut any0, mut any1) = (false, false);
    for i in 0..design.n {
        if weights.weight(i) > 0.0 {
            if y[i] == 1 {
                any1 = true;
            } else {
                any0 = true;
            }
        }
    }
    if !(any0 && any1) {
        return Err(Error::DegenerateOutcome);
    }

    let mut beta = match start {
        Some(s) if s.len() == k && s.iter().all(|b| b.is_finite()) => s.to_vec(),
        _ => vec![0.0; k],
    };
    let mut state = evaluate(design, y, weights, &beta);
    let mut history = vec![state.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;
    let mut candidate = vec![0.0; k];

    while iterations < cfg.max_iterations {
        iterations += 1;
        let Some(chol) = state.hessian.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&state.gradient);
        if step.iter().any(|s| !s.is_finite()) {
            break;
        }

        // Step-halving keeps the log-likelihood non-decreasing.
        let slack = 1e-12 * (state.log_likelihood.abs() + 1.0);
        let mut scale = 1.0;
        let accepted = loop {
            for j in 0..k {
                candidate[j] = beta[j] + scale * step[j];
            }
            let next = evaluate(design, y, weights, &candidate);
            if next.log_likelihood >= state.log_likelihood - slack {
                break Some(next);
            }
            scale *= 0.5;
            if scale < 1e-10 {
                break None;
            }
        };
        let Some(next) = accepted else {
            // No ascent along the Newton direction: numerically at the optimum.
            converged = true;
            break;
        };

        let change = step.iter().fold(0.0f64, |m, s| m.max((scale * s).abs()));
        let dev_old = -2.0 * state.log_likelihood;
        let dev_new = -2.0 * next.log_likelihood;
        beta.copy_from_slice(&candidate);
        state = next;
        history.push(state.log_likelihood);

        if change < cfg.coef_tolerance {
            converged = true;
            break;
        }
        let separated = beta.iter().any(|b| b.abs() > SEPARATION_COEF_CAP);
        if separated && (dev_new - dev_old).abs() / (dev_new.abs() + 0.1) < cfg.deviance_tolerance {
            converged = true;
            break;
        }
        // Complete separation: further steps only rescale beta.
        if separated && state.max_residual < COMPLETE_SEPARATION_RESIDUAL {
            converged = true;
            break;
        }
    }

    let eps = cfg.separation_probability_threshold;
    let complete = state.max_prob < eps || state.min_prob > 1.0 - eps || state.max_residual < eps;
    let separation_detected =
        !converged || complete || beta.iter().any(|b| b.abs() > SEPARATION_COEF_CAP);

    Ok(GlmFit {
        beta,
        converged,
        iterations,
        log_likelihood: state.log_likelihood,
        separation_detected,
        log_likelihood_history: history,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for a in 0..k {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}
