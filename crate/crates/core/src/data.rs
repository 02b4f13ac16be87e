//! Trial data and working-model specification.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Observed trial data `(X_i, A_i, Y_i)` together with the known
/// randomization probability `pi0 = P(A = 1)`.
///
/// Covariates are stored row-major. Binary covariates are encoded 0/1;
/// continuous covariates are used on their raw scale (callers may pre-scale).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    covariates: Vec<f64>,
    n_covariates: usize,
    treatment: Vec<u8>,
    outcome: Vec<u8>,
    pi0: f64,
}

impl TrialDataset {
    /// Builds a dataset from row-major covariates.
    pub fn new(
        covariates: Vec<f64>,
        n_covariates: usize,
        treatment: Vec<u8>,
        outcome: Vec<u8>,
        pi0: f64,
    ) -> Result<Self> {
        let n = treatment.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if outcome.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: outcome.len(),
            });
        }
        if covariates.len() != n * n_covariates {
            return Err(Error::DimensionMismatch {
                expected: n * n_covariates,
                found: covariates.len(),
            });
        }
        if let Some(v) = treatment.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidData(format!(
                "treatment value {v} is not 0/1"
            )));
        }
        if let Some(v) = outcome.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidData(format!("outcome value {v} is not 0/1")));
        }
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::InvalidData(format!(
                "pi0 must lie in (0, 1), got {pi0}"
            )));
        }
        if covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("covariates must be finite".into()));
        }
        let treated = treatment.iter().filter(|&&a| a == 1).count();
        if treated == 0 {
            return Err(Error::EmptyArm { arm: 1 });
        }
        if treated == n {
            return Err(Error::EmptyArm { arm: 0 });
        }
        Ok(Self {
            covariates,
            n_covariates,
            treatment,
            outcome,
            pi0,
        })
    }

    /// Builds a dataset from one covariate vector per row.
    pub fn from_rows(
        rows: &[Vec<f64>],
        treatment: Vec<u8>,
        outcome: Vec<u8>,
        pi0: f64,
    ) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        let flat = rows.iter().flatten().copied().collect();
        Self::new(flat, p, treatment, outcome, pi0)
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_covariates..(i + 1) * self.n_covariates]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[u8] {
        &self.outcome
    }

    /// New dataset made of the given rows, in the given order (repeats allowed).
    ///
    /// Fails if the selection leaves an arm empty.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut cov = Vec::with_capacity(rows.len() * self.n_covariates);
        for &r in rows {
            cov.extend_from_slice(self.covariate_row(r));
        }
        Self::new(
            cov,
            self.n_covariates,
            rows.iter().map(|&r| self.treatment[r]).collect(),
            rows.iter().map(|&r| self.outcome[r]).collect(),
            self.pi0,
        )
    }

    /// Dataset with row `i` removed.
    pub fn without_row(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&r| r != i).collect();
        self.select_rows(&keep)
    }
}

/// Which terms enter the logistic working model.
///
/// The linear predictor always holds an intercept and a treatment main term,
/// then one main term per covariate column, then (optionally) one
/// treatment-by-covariate interaction per covariate column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    covariate_columns: Vec<usize>,
    include_treatment_interactions: bool,
}

impl ModelSpec {
    pub fn new(
        covariate_columns: Vec<usize>,
        include_treatment_interactions: bool,
    ) -> Result<Self> {
        let mut seen = covariate_columns.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("duplicate covariate column".into()));
        }
        Ok(Self {
            covariate_columns,
            include_treatment_interactions,
        })
    }

    /// Intercept and treatment only.
    pub fn treatment_only() -> Self {
        Self {
            covariate_columns: Vec::new(),
            include_treatment_interactions: false,
        }
    }

    /// Main terms for the first `p` covariate columns.
    pub fn main_terms(p: usize) -> Self {
        Self {
            covariate_columns: (0..p).collect(),
            include_treatment_interactions: false,
        }
    }

    pub fn covariate_columns(&self) -> &[usize] {
        &self.covariate_columns
    }

    pub fn include_treatment_interactions(&self) -> bool {
        self.include_treatment_interactions
    }

    /// Number of coefficients in the linear predictor.
    pub fn n_coefficients(&self) -> usize {
        let q = self.covariate_columns.len();
        2 + q * (1 + usize::from(self.include_treatment_interactions))
    }

    pub(crate) fn validate_for(&self, n_covariates: usize) -> Result<()> {
        match self.covariate_columns.iter().find(|&&c| c >= n_covariates) {
            Some(&c) => Err(Error::InvalidModel(format!(
                "covariate column {c} out of range for {n_covariates} columns"
            ))),
            None => Ok(()),
        }
    }

    /// Writes the design row for treatment `a` and full covariate row `x` into `out`.
    pub(crate) fn fill_design_row(&self, a: f64, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = a;
        let q = self.covariate_columns.len();
        for (j, &c) in self.covariate_columns.iter().enumerate() {
            out[2 + j] = x[c];
        }
        if self.include_treatment_interactions {
            for (j, &c) in self.covariate_columns.iter().enumerate() {
                out[2 + q + j] = a * x[c];
            }
        }
    }
}

/// Design matrix for a dataset under a model spec, kept both row-major (for
/// per-row access) and as an `n x k` matrix (for products).
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub(crate) values: Vec<f64>,
    pub(crate) matrix: DMatrix<f64>,
    pub(crate) n: usize,
    pub(crate) k: usize,
}

impl Design {
    pub(crate) fn build(data: &TrialDataset, spec: &ModelSpec) -> Result<Self> {
        spec.validate_for(data.n_covariates())?;
        let n = data.len();
        let k = spec.n_coefficients();
        let mut values = vec![0.0; n * k];
        for (i, row) in values.chunks_exact_mut(k).enumerate() {
            spec.fill_design_row(f64::from(data.treatment()[i]), data.covariate_row(i), row);
        }
        Ok(Self::from_values(values, n, k))
    }

    pub(crate) fn from_values(values: Vec<f64>, n: usize, k: usize) -> Self {
        let matrix = DMatrix::from_row_slice(n, k, &values);
        Self {
            values,
            matrix,
            n,
            k,
        }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }
}
