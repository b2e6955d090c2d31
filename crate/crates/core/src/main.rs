use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use central_lyapunov::experiment::{
    build_field, condition_options, init_workers, run_headline, run_spectrum, run_suite, run_sweep, verify_flowbox,
    ExperimentConfig, XiPolicy, WORKERS_ENV,
};
use central_lyapunov::perturbation::check_conditions;
use central_lyapunov::Result;

#[derive(Parser)]
#[command(name = "central-lyapunov", about = "Central Lyapunov exponent experiments")]
struct Cli {
    /// JSON experiment config; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON results.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Orbit length override.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Ensemble size override.
    #[arg(long, global = true)]
    orbits: Option<usize>,
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov spectrum of the configured system.
    Spectrum,
    /// Build the perturbation at each radius and verify its conditions.
    Perturb {
        /// Radius override (repeatable).
        #[arg(long)]
        r: Vec<f64>,
        /// A fixed angle, or `auto` for the bound implied by --epsilon.
        #[arg(long)]
        xi: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Confirm the central exponent vanishes, perturb, and re-measure.
    Headline,
    /// Grid over radius, angle and horizon.
    Sweep,
    /// Run a verification suite: flowbox, perturbation, domination or comparison.
    Suite { name: String },
    /// Check the flowbox chart and write a fixture.
    FlowboxVerify {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    // A closed pipe downstream is not an error of the run.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if let Some(t) = cli.horizon {
        cfg.horizon = t;
    }
    if let Some(n) = cli.orbits {
        cfg.orbits = n;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    init_workers(cli.workers)?;
    let mut cfg = load(cli)?;
    match &cli.command {
        Command::Spectrum => {
            let rep = run_spectrum(&cfg)?;
            emit(&rep)?;
            Ok(true)
        }
        Command::Perturb { r, xi, epsilon } => {
            if !r.is_empty() {
                cfg.r = r.clone();
            }
            if let Some(e) = epsilon {
                cfg.epsilon = Some(*e);
            }
            match xi.as_deref() {
                Some("auto") => cfg.xi = XiPolicy::Auto,
                Some(v) => {
                    let value = v.parse().map_err(|_| central_lyapunov::Error::InvalidParameter(format!("bad xi `{v}`")))?;
                    cfg.xi = XiPolicy::Fixed { value };
                }
                None => {}
            }
            cfg.validate()?;
            let sys = cfg.suspension()?;
            let mut reports = vec![];
            for &r in &cfg.r {
                let field = build_field(&cfg, &sys, r, cfg.xi_for(r)?)?;
                reports.push(check_conditions(&field, &condition_options(&cfg))?);
            }
            if let Some(dir) = &cfg.output {
                central_lyapunov::experiment::output::write_json(&dir.join("perturb.json"), &reports)?;
            }
            emit(&reports)?;
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Headline => {
            let res = run_headline(&cfg)?;
            emit(&res.rows)?;
            Ok(res.passed)
        }
        Command::Sweep => {
            let res = run_sweep(&cfg)?;
            emit(&res.cells)?;
            Ok(res.cells.iter().all(|c| c.significant && c.conditions_ok))
        }
        Command::Suite { name } => {
            let rep = run_suite(name, &cfg)?;
            if let Some(dir) = &cfg.output {
                central_lyapunov::experiment::output::write_json(&dir.join(format!("suite_{name}.json")), &rep)?;
            }
            emit(&rep)?;
            Ok(rep.passed)
        }
        Command::FlowboxVerify { samples } => {
            let rep = verify_flowbox(&cfg, *samples)?;
            emit(&rep)?;
            Ok(rep.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let report = serde_json::json!({ "error": e.to_string(), "kind": format!("{e:?}") });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
