use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::write_json;
use crate::error::Result;
use crate::flowbox::{sample_chart_domain, verify_chart, write_chart_fixture, ChartFixture, ChartReport, SuspensionChart};
use crate::model::SystemSpec;
use crate::spectrum::{qr_spectrum, ExponentSums, SpectrumEstimate};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub system: SystemSpec,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub spectrum: SpectrumEstimate,
    pub sums: ExponentSums,
    /// `|Σ raw exponents − (1/T)·log|det||`.
    pub volume_identity_error: f64,
}

/// Spectrum of the configured system along the orbit of `p`.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumReport> {
    cfg.validate()?;
    let spectrum = match &cfg.system {
        SystemSpec::CatSuspension { .. } => qr_spectrum(&cfg.suspension()?, &cfg.p, cfg.horizon, cfg.dt, cfg.seed)?,
        spec @ SystemSpec::AbcFlow { .. } => {
            let p = DVector::from_column_slice(&cfg.p.base);
            qr_spectrum(&spec.abc_flow()?, &p, cfg.horizon, cfg.dt, cfg.seed)?
        }
    };
    let sums = spectrum.sums(None)?;
    let volume_identity_error = (spectrum.raw.iter().sum::<f64>() - spectrum.log_det_rate).abs();
    let report = SpectrumReport { system: cfg.system.clone(), horizon: cfg.horizon, dt: cfg.dt, seed: cfg.seed, spectrum, sums, volume_identity_error };
    if let Some(dir) = &cfg.output {
        write_json(&dir.join("spectrum.json"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowboxReport {
    pub radius: f64,
    pub chart: ChartReport,
    pub fixture: Option<ChartFixture>,
    pub passed: bool,
}

/// Checks the suspension chart at `samples` points with heights in `[-1, 1]`
/// and, with an output directory, writes a fixture of the sampled chart.
pub fn verify_flowbox(cfg: &ExperimentConfig, samples: usize) -> Result<FlowboxReport> {
    cfg.validate()?;
    let sys = cfg.suspension()?;
    let r = cfg.r[0];
    let chart = SuspensionChart::aligned(&sys, cfg.p, r)?;
    let rep = verify_chart(&chart, &sys, &sample_chart_domain(4, r, samples, (-1.0, 1.0), cfg.seed))?;
    let fixture = match &cfg.output {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let coords = |q: &crate::model::PhasePoint| vec![q.base[0], q.base[1], q.base[2], q.height];
            Some(write_chart_fixture(&chart, coords, samples, cfg.seed, &dir.join("chart_fixture.json"))?)
        }
        None => None,
    };
    let passed = rep.max_det_error <= 1e-6 && rep.max_round_trip_error <= 1e-9 && rep.max_rectification_error <= 1e-9;
    Ok(FlowboxReport { radius: r, chart: rep, fixture, passed })
}
