use ifloo_core::simulation::{
    generate_dataset, parse_scenario, run_scenario, summarize, true_ate_quadrature,
    write_summary_csv, RunConfig, Scenario, REFERENCE_BETA_X,
};
use ifloo_core::{Error, Method};

fn low_rate(n: usize, n_replicates: usize) -> Scenario {
    Scenario {
        label: "low".into(),
        n,
        beta0: -4.9171,
        beta_a: 1.4065,
        beta_x: REFERENCE_BETA_X,
        pi0: 0.5,
        n_replicates,
        n_boot: 20,
        base_seed: 31,
        quadrature_nodes: 16,
        expected_placebo_rate: Some(0.025),
        expected_ate: Some(0.05),
    }
}

#[test]
fn dgp_marginals() {
    let sc = Scenario {
        n: 20_000,
        ..low_rate(0, 1)
    };
    let d = generate_dataset(&sc, 0).unwrap();
    let n = d.len() as f64;
    for j in 0..6 {
        let mean = (0..d.len()).map(|i| d.covariate_row(i)[j]).sum::<f64>() / n;
        assert!((mean - 0.5).abs() < 0.015, "x{} mean {mean}", j + 1);
    }
    for i in 0..d.len() {
        let x = d.covariate_row(i);
        assert!(x[..4].iter().all(|v| (0.0..1.0).contains(v)));
        assert!(x[4..].iter().all(|&v| v == 0.0 || v == 1.0));
    }
    let treated = d.treatment().iter().filter(|&&a| a == 1).count() as f64 / n;
    assert!((treated - 0.5).abs() < 0.015);

    let truth = true_ate_quadrature(sc.beta0, sc.beta_a, &sc.beta_x, 16).unwrap();
    let rate = |arm: u8| {
        let rows: Vec<usize> = (0..d.len()).filter(|&i| d.treatment()[i] == arm).collect();
        rows.iter().filter(|&&i| d.outcome()[i] == 1).count() as f64 / rows.len() as f64
    };
    assert!((rate(0) - truth.control_rate).abs() < 0.006);
    assert!((rate(1) - truth.treated_rate).abs() < 0.008);
}

#[test]
fn replicate_draws_are_independent_of_each_other() {
    let sc = low_rate(100, 1);
    assert_eq!(
        generate_dataset(&sc, 4).unwrap(),
        generate_dataset(&sc, 4).unwrap()
    );
    assert_ne!(
        generate_dataset(&sc, 4).unwrap(),
        generate_dataset(&sc, 5).unwrap()
    );
}

#[test]
fn summary_csv_is_thread_invariant() {
    let sc = Scenario {
        beta0: -1.4828,
        beta_a: 0.3967,
        ..low_rate(50, 24)
    };
    let truth = sc.true_ate().unwrap();
    let csv_for = |threads| {
        let results = run_scenario(&sc, &RunConfig::default(), Some(threads)).unwrap();
        let rows = summarize(&results, &truth, 0.05).unwrap();
        let mut out = Vec::new();
        write_summary_csv(&mut out, &sc.label, &rows).unwrap();
        out
    };
    let one = csv_for(1);
    assert_eq!(one, csv_for(3));
    assert_eq!(one, csv_for(8));
}

#[test]
fn exclusions_are_joint() {
    let sc = low_rate(250, 30);
    let results = run_scenario(&sc, &RunConfig::default(), None).unwrap();
    for r in &results {
        if r.excluded() {
            assert!(r.estimates.is_empty());
        } else {
            assert_eq!(r.estimates.len(), Method::ALL.len());
        }
    }
    let rows = summarize(&results, &sc.true_ate().unwrap(), 0.05).unwrap();
    for row in &rows {
        assert_eq!(row.n_included + row.n_excluded, 30);
        assert!((0.0..=100.0).contains(&row.coverage_pct));
        assert!(row.type1_pct.is_none());
    }
    // All adjusted methods share the standardized point estimate.
    let mean = |m: Method| rows.iter().find(|r| r.method == m).unwrap().mean_estimate;
    assert_eq!(mean(Method::IfLoo), mean(Method::IfPlugin));
    assert_eq!(mean(Method::IfLoo), mean(Method::Bootstrap));
}

#[test]
fn config_errors_name_the_field() {
    let text = r#"
label = "bad"
[dgp]
n = 50
beta0 = -1.0
beta_a = 0.0
beta_x = [2.5, 1.8, -2.8, -2.1, 2.0, -2.0]
[run]
n_replicates = 0
n_boot = 10
base_seed = 1
"#;
    match parse_scenario(text) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "run.n_replicates"),
        other => panic!("expected a config error, got {other:?}"),
    }
    let five = text
        .replace("n_replicates = 0", "n_replicates = 5")
        .replace("-2.0]", "]");
    assert!(
        matches!(parse_scenario(&five), Err(Error::Config { field, .. }) if field == "dgp.beta_x")
    );
}
