use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::headline::{build_field, condition_options, STDERR_MULTIPLIER};
use super::output::{write_csv, write_json};
use crate::comparison::{ball_volume, i_integral, merge_runs, run_ensemble};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub r: f64,
    pub xi: f64,
    pub horizon: f64,
    pub seed: u64,
    pub sigma_c_x: f64,
    pub sigma_c_x_se: f64,
    pub sigma_c_y: f64,
    pub sigma_c_y_se: f64,
    pub gap: f64,
    pub gap_se: f64,
    pub predicted_shift: f64,
    pub gap_ratio: Option<f64>,
    pub significant: bool,
    pub conditions_ok: bool,
}

const CELL_COLUMNS: &[(&str, &str)] = &[
    ("index", "cell number; cells are ordered by r, then xi, then horizon"),
    ("r, xi, horizon", "flowbox radius, rotation angle and orbit length"),
    ("seed", "ensemble seed of the cell"),
    ("sigma_c_{x,y}, *_se", "central exponent of X and Y with ensemble stderr"),
    ("gap, gap_se", "sigma_c_y - sigma_c_x and combined stderr"),
    ("predicted_shift", "-vol_ratio * I(1) from quadrature"),
    ("gap_ratio", "gap / predicted_shift"),
    ("significant", "gap > 3 * gap_se"),
    ("conditions_ok", "all perturbation conditions verified"),
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub pass_criterion: String,
    pub stderr_multiplier: f64,
    pub cells: Vec<SweepCell>,
}

/// `(r, ξ, T)` for every cell.
pub fn sweep_grid(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64, f64)>> {
    let horizons = if cfg.sweep.horizons.is_empty() { vec![cfg.horizon] } else { cfg.sweep.horizons.clone() };
    let mut out = vec![];
    for &r in &cfg.r {
        let xis = if cfg.sweep.xi.is_empty() { vec![cfg.xi_for(r)?] } else { cfg.sweep.xi.clone() };
        for &xi in &xis {
            for &t in &horizons {
                out.push((r, xi, t));
            }
        }
    }
    Ok(out)
}

fn run_cell(cfg: &ExperimentConfig, index: usize, (r, xi, horizon): (f64, f64, f64)) -> Result<SweepCell> {
    let sys = cfg.suspension()?;
    let seed = cfg.seed.wrapping_add(index as u64);
    let settings = cfg.run_settings(horizon, false);
    let field = build_field(cfg, &sys, r, xi)?;
    let report = crate::perturbation::check_conditions(&field, &condition_options(cfg))?;
    let x = merge_runs(&run_ensemble(&sys, None, cfg.orbits, &settings, seed)?)?;
    let y = merge_runs(&run_ensemble(&sys, Some(&field), cfg.orbits, &settings, seed)?)?;
    let predicted = -ball_volume(3, r) * i_integral(&field.chart_field().profiles, xi, 3)?;
    let (cx, cy) = (x.exponents[1], y.exponents[1]);
    let gap = cy.mean - cx.mean;
    let gap_se = cy.combined(&cx);
    let cell = SweepCell {
        index,
        r,
        xi,
        horizon,
        seed,
        sigma_c_x: cx.mean,
        sigma_c_x_se: cx.stderr,
        sigma_c_y: cy.mean,
        sigma_c_y_se: cy.stderr,
        gap,
        gap_se,
        predicted_shift: predicted,
        gap_ratio: (predicted != 0.0).then(|| gap / predicted),
        significant: gap > STDERR_MULTIPLIER * gap_se,
        conditions_ok: report.passed,
    };
    if let Some(dir) = &cfg.output {
        write_json(&dir.join("cells").join(format!("cell_{index:04}.json")), &cell)?;
    }
    Ok(cell)
}

/// Runs every cell in parallel, each with its own seed. Cell files are
/// written as they finish; the merged table is written afterwards.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = sweep_grid(cfg)?;
    let cells = grid
        .par_iter()
        .enumerate()
        .map(|(i, &c)| run_cell(cfg, i, c))
        .collect::<Result<Vec<_>>>()?;
    let cells = match &cfg.output {
        Some(dir) => (0..cells.len())
            .map(|i| {
                let text = std::fs::read_to_string(dir.join("cells").join(format!("cell_{i:04}.json")))?;
                Ok(serde_json::from_str(&text)?)
            })
            .collect::<Result<Vec<SweepCell>>>()?,
        None => cells,
    };
    let result = SweepResult {
        pass_criterion: "gap > 3 * combined stderr of the two central exponents".into(),
        stderr_multiplier: STDERR_MULTIPLIER,
        cells,
    };
    if let Some(dir) = &cfg.output {
        write_csv(&dir.join("sweep.csv"), CELL_COLUMNS, &result.cells)?;
        write_json(&dir.join("sweep.json"), &result)?;
    }
    Ok(result)
}
