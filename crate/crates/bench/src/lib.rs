//! Fixtures shared by the benchmarks.

use ifloo_core::simulation::{generate_dataset, Scenario, REFERENCE_BETA_X};
use ifloo_core::TrialDataset;

/// One draw from the 25% placebo-rate design at sample size `n`.
pub fn trial(n: usize, seed: u64) -> TrialDataset {
    let sc = Scenario {
        label: "bench".into(),
        n,
        beta0: -1.4828,
        beta_a: 0.3967,
        beta_x: REFERENCE_BETA_X,
        pi0: 0.5,
        n_replicates: 1,
        n_boot: 0,
        base_seed: seed,
        quadrature_nodes: 16,
        expected_placebo_rate: None,
        expected_ate: None,
    };
    generate_dataset(&sc, 0).expect("valid bench scenario")
}
