//! Running a registered suite from code at smoke scale and reading its report.

use regnoise::harness::{run_experiment, suites, ExperimentConfig, RunOptions};

fn main() -> regnoise::Result<()> {
    for s in suites() {
        println!("{:<26} keys: {}", s.id, s.keys.join(", "));
    }
    let cfg = ExperimentConfig::from_toml("experiment = \"occupation-time-scaling\"\nscale = \"smoke\"\npaths = 200\n")?;
    let rep = run_experiment(&cfg, &RunOptions { seed: Some(3), workers: 1, out: None })?;
    for c in &rep.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    for (k, fit) in &rep.fits {
        println!("fit {k}: slope {:.4}", fit.slope);
    }
    Ok(())
}
