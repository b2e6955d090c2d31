//! Headline experiment, parameter sweeps and verification suites, with
//! CSV/JSON output.

mod config;
mod headline;
pub mod output;
mod suites;
mod sweep;
mod tools;

pub use config::{ExperimentConfig, SweepAxes, XiPolicy};
pub use headline::{
    build_field, condition_options, run_headline, ExperimentResult, HeadlineRow, ScalingCheck, PASS_CRITERION,
    ROUNDOFF_FLOOR, STDERR_MULTIPLIER,
};
pub use suites::{cocycle_composition_error, rotation_group_error, run_suite, SuiteCheck, SuiteReport, SUITES};
pub use sweep::{run_sweep, sweep_grid, SweepCell, SweepResult};
pub use tools::{run_spectrum, verify_flowbox, FlowboxReport, SpectrumReport};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CENTRAL_LYAPUNOV_WORKERS";

/// Sizes the global thread pool from `workers` or the environment; later
/// calls are ignored once the pool exists.
pub fn init_workers(workers: Option<usize>) -> crate::Result<usize> {
    let n = match workers {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| crate::error::invalid(format!("{WORKERS_ENV} must be a positive integer")))?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(crate::error::invalid("worker count must be positive"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    let _ = builder.build_global();
    Ok(rayon::current_num_threads())
}
