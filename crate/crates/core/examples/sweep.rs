//! A small (r, xi) sweep with per-cell files merged into one CSV.

use central_lyapunov::experiment::{run_sweep, ExperimentConfig, SweepAxes};

fn main() -> central_lyapunov::Result<()> {
    let out = std::env::temp_dir().join("central_lyapunov_sweep");
    let cfg = ExperimentConfig {
        r: vec![0.1, 0.05],
        horizon: 5e4,
        orbits: 8,
        sweep: SweepAxes { xi: vec![0.15, 0.3], horizons: vec![] },
        output: Some(out.clone()),
        ..ExperimentConfig::default()
    };
    for c in run_sweep(&cfg)?.cells {
        println!("r = {:<5} xi = {:<5} gap {:+.3e} +- {:.1e}  ratio {:?}", c.r, c.xi, c.gap, c.gap_se, c.gap_ratio);
    }
    println!("results in {}", out.display());
    Ok(())
}
