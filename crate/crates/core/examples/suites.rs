//! Runs every verification suite on the default configuration.

use central_lyapunov::experiment::{run_suite, ExperimentConfig, SUITES};

fn main() -> central_lyapunov::Result<()> {
    let cfg = ExperimentConfig { horizon: 1e5, ..ExperimentConfig::default() };
    for name in SUITES {
        let rep = run_suite(name, &cfg)?;
        println!("{name}: {}", if rep.passed { "pass" } else { "FAIL" });
        for c in &rep.checks {
            println!("  {:<24} {:>12.3e} (threshold {:.1e}) {}", c.name, c.value, c.threshold, c.passed);
        }
    }
    Ok(())
}
