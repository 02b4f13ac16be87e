use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ifloo_core::simulation::{
    load_scenario, run_scenario, summarize, write_replicates_csv, write_summary_csv, RunConfig,
};

use crate::SimulateArgs;

pub fn run(args: &SimulateArgs) -> Result<ExitCode> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1)");
    }
    let mut scenario = load_scenario(&args.scenario)?;
    if args.full_scale {
        scenario.n_replicates = 10_000;
        scenario.n_boot = 1_000;
    }
    if let Some(r) = args.replicates {
        scenario.n_replicates = r;
    }
    if let Some(b) = args.boot {
        scenario.n_boot = b;
    }
    scenario.validate()?;

    let mut truth = scenario.true_ate()?;
    if args.mc_draws > 0 {
        truth = truth.with_mc_check(
            scenario.beta0,
            scenario.beta_a,
            &scenario.beta_x,
            args.mc_draws,
            scenario.base_seed ^ 0x9e37_79b9_7f4a_7c15,
        );
    }
    eprintln!(
        "{}: true ATE {:.6}, control rate {:.6}, treated rate {:.6}",
        scenario.label, truth.value, truth.control_rate, truth.treated_rate
    );
    if let Some(mc) = &truth.mc_check {
        eprintln!(
            "  monte carlo check: {:.6} (se {:.2e}, {} draws){}",
            mc.value,
            mc.std_error,
            mc.draws,
            if truth.mc_agrees(4.0) == Some(false) {
                "  DISAGREES"
            } else {
                ""
            }
        );
    }
    for (name, nominal, got) in [
        (
            "control rate",
            scenario.expected_placebo_rate,
            truth.control_rate,
        ),
        ("ATE", scenario.expected_ate, truth.value),
    ] {
        if let Some(nominal) = nominal {
            if (nominal - got).abs() > 5e-4 {
                eprintln!("  warning: {name} {got:.6} differs from the nominal {nominal}");
            }
        }
    }

    let started = Instant::now();
    let results = run_scenario(&scenario, &RunConfig::default(), args.threads)?;
    let excluded = results.iter().filter(|r| r.excluded()).count();
    let separated = results.iter().filter(|r| r.separation_detected).count();
    eprintln!(
        "  {} replicates in {:.1}s ({} excluded, {} with separation)",
        results.len(),
        started.elapsed().as_secs_f64(),
        excluded,
        separated
    );

    let rows = summarize(&results, &truth, args.alpha)?;
    match &args.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_summary_csv(BufWriter::new(file), &scenario.label, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_summary_csv(&mut lock, &scenario.label, &rows)?;
            lock.flush()?;
        }
    }
    if let Some(path) = &args.replicates_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_replicates_csv(BufWriter::new(file), &results)?;
    }
    Ok(ExitCode::SUCCESS)
}
