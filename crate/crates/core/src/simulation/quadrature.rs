//! True marginal risk difference of the simulation DGP: tensor-product
//! Gauss-Legendre over the four uniform covariates, exact enumeration of the
//! two Bernoulli(1/2) covariates, with a plain Monte Carlo cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::expit;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on `P_n` via the three-term recurrence, started from the
/// usual cosine approximation of the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCheck {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// True average treatment effect of a DGP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueAte {
    /// `E_X[expit(b0 + bA + bX'X) - expit(b0 + bX'X)]`.
    pub value: f64,
    /// Marginal outcome rate under control.
    pub control_rate: f64,
    /// Marginal outcome rate under treatment.
    pub treated_rate: f64,
    pub quadrature_nodes_per_dim: usize,
    pub mc_check: Option<McCheck>,
}

impl TrueAte {
    /// Attaches a Monte Carlo estimate of the same integral.
    pub fn with_mc_check(
        mut self,
        beta0: f64,
        beta_a: f64,
        beta_x: &[f64; 6],
        draws: usize,
        seed: u64,
    ) -> Self {
        self.mc_check = Some(monte_carlo_ate(beta0, beta_a, beta_x, draws, seed));
        self
    }

    /// Whether quadrature and the Monte Carlo check agree within `k` standard errors.
    pub fn mc_agrees(&self, k: f64) -> Option<bool> {
        self.mc_check
            .map(|mc| (mc.value - self.value).abs() <= k * mc.std_error)
    }
}

/// Quadrature over `[0, 1]^4` crossed with the four binary covariate cells.
pub fn true_ate_quadrature(
    beta0: f64,
    beta_a: f64,
    beta_x: &[f64; 6],
    nodes_per_dim: usize,
) -> Result<TrueAte> {
    if nodes_per_dim < 8 {
        return Err(Error::config(
            "quadrature_nodes",
            format!("need at least 8 nodes per dimension, got {nodes_per_dim}"),
        ));
    }
    let (x, w) = gauss_legendre(nodes_per_dim);
    // Map [-1, 1] to [0, 1].
    let u: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let v: Vec<f64> = w.iter().map(|t| 0.5 * t).collect();

    let cells: Vec<(f64, f64)> = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        .iter()
        .map(|&(x5, x6)| (beta_x[4] * x5 + beta_x[5] * x6, 0.25))
        .collect();

    let (mut treated, mut control) = (0.0, 0.0);
    for (i1, &a1) in u.iter().enumerate() {
        let l1 = beta_x[0] * a1;
        for (i2, &a2) in u.iter().enumerate() {
            let l2 = l1 + beta_x[1] * a2;
            let w12 = v[i1] * v[i2];
            for (i3, &a3) in u.iter().enumerate() {
                let l3 = l2 + beta_x[2] * a3;
                let w123 = w12 * v[i3];
                for (i4, &a4) in u.iter().enumerate() {
                    let lin = beta0 + l3 + beta_x[3] * a4;
                    let weight = w123 * v[i4];
                    for &(shift, cell_w) in &cells {
                        control += weight * cell_w * expit(lin + shift);
                        treated += weight * cell_w * expit(lin + shift + beta_a);
                    }
                }
            }
        }
    }
    Ok(TrueAte {
        value: treated - control,
        control_rate: control,
        treated_rate: treated,
        quadrature_nodes_per_dim: nodes_per_dim,
        mc_check: None,
    })
}

/// Plain Monte Carlo over the covariate distribution (no outcome sampling).
pub fn monte_carlo_ate(
    beta0: f64,
    beta_a: f64,
    beta_x: &[f64; 6],
    draws: usize,
    seed: u64,
) -> McCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let mut lin = beta0;
        for b in &beta_x[..4] {
            lin += b * rng.random::<f64>();
        }
        for b in &beta_x[4..] {
            if rng.random_bool(0.5) {
                lin += b;
            }
        }
        let d = expit(lin + beta_a) - expit(lin);
        sum += d;
        sum_sq += d * d;
    }
    let m = draws as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    McCheck {
        value: mean,
        std_error: (var / m).sqrt(),
        draws,
    }
}
