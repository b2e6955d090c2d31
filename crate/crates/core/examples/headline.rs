//! The headline experiment at reduced size: confirm the central exponent
//! vanishes, perturb, and compare the shift with the quadrature prediction.
//!
//! Usage: `headline [horizon] [orbits] [out_dir]`.

use central_lyapunov::experiment::{run_headline, ExperimentConfig};

fn main() -> central_lyapunov::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = ExperimentConfig {
        horizon: args.get(1).map_or(2e5, |s| s.parse().unwrap()),
        orbits: args.get(2).map_or(16, |s| s.parse().unwrap()),
        output: args.get(3).map(Into::into),
        r: vec![0.1, 0.05],
        ..ExperimentConfig::default()
    };
    let res = run_headline(&cfg)?;
    for row in &res.rows {
        println!(
            "{:>9} r = {:<5} xi = {:<4} gap {:+.3e} +- {:.1e}  predicted {:.3e}  passed {}",
            row.label, row.r, row.xi, row.gap, row.gap_se, row.predicted_shift, row.passed
        );
    }
    if let Some(s) = &res.scaling {
        println!("normalized gaps {:?}, spread {:.3}", s.normalized_gaps, s.spread);
    }
    Ok(())
}
