use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{write_csv, write_json};
use crate::comparison::{audit_from, merge_runs, run_ensemble, EnsembleSummary, Estimate, ExponentAudit, OrbitRun};
use crate::error::{Error, Result};
use crate::model::CatSuspension;
use crate::perturbation::{check_conditions, implied_epsilon, ConditionOptions, ConditionReport, PerturbedField};

/// Acceptance is statistical: differences must exceed this many standard errors.
pub const STDERR_MULTIPLIER: f64 = 3.0;
/// Absolute allowance for round-off in sums that vanish identically.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

pub const PASS_CRITERION: &str = "sigma_c(Y) - sigma_c(X) > 3 * combined stderr, \
and the rotation, identity, support, C1 and divergence conditions hold";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadlineRow {
    pub label: String,
    pub r: f64,
    pub xi: f64,
    pub sigma_u_x: f64,
    pub sigma_u_x_se: f64,
    pub sigma_c_x: f64,
    pub sigma_c_x_se: f64,
    pub sigma_s_x: f64,
    pub sigma_s_x_se: f64,
    pub sigma_u_y: f64,
    pub sigma_u_y_se: f64,
    pub sigma_c_y: f64,
    pub sigma_c_y_se: f64,
    pub sigma_s_y: f64,
    pub sigma_s_y_se: f64,
    /// `Σ^c(Y) − Σ^c(X)` and its combined stderr.
    pub gap: f64,
    pub gap_se: f64,
    /// `−vol_ratio·I(1)`.
    pub predicted_shift: f64,
    pub gap_ratio: Option<f64>,
    pub conditions_ok: bool,
    pub consistent: bool,
    pub passed: bool,
}

pub(crate) const ROW_COLUMNS: &[(&str, &str)] = &[
    ("label", "control (xi = 0, must equal X bitwise) or perturbed"),
    ("r, xi", "flowbox radius and rotation angle"),
    ("sigma_{u,c,s}_{x,y}", "unstable/central/stable exponent sums of X and Y per unit time"),
    ("*_se", "ensemble standard errors"),
    ("gap, gap_se", "sigma_c_y - sigma_c_x and combined stderr"),
    ("predicted_shift", "-vol_ratio * I(1) from quadrature"),
    ("gap_ratio", "gap / predicted_shift"),
    ("conditions_ok", "all perturbation conditions verified"),
    ("consistent", "sum of the three exponent sums within 3 stderr of 0 for X and Y"),
    ("passed", "gap > 3 * gap_se and conditions_ok (control: bitwise equality)"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub radii: Vec<f64>,
    /// Measured gap divided by `vol_ratio·|I(1)|`; constant under `r³` scaling.
    pub normalized_gaps: Vec<f64>,
    pub spread: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub pass_criterion: String,
    pub stderr_multiplier: f64,
    pub config: ExperimentConfig,
    pub unperturbed: EnsembleSummary,
    pub perturbed: Vec<EnsembleSummary>,
    pub rows: Vec<HeadlineRow>,
    pub conditions: Vec<ConditionReport>,
    pub audits: Vec<ExponentAudit>,
    pub control_equal: bool,
    pub scaling: Option<ScalingCheck>,
    pub passed: bool,
}

fn within(value: f64, stderr: f64) -> bool {
    value.abs() <= (STDERR_MULTIPLIER * stderr).max(ROUNDOFF_FLOOR)
}

fn total(e: &[Estimate; 3]) -> Estimate {
    Estimate {
        mean: e.iter().map(|x| x.mean).sum(),
        stderr: e.iter().map(|x| x.stderr * x.stderr).sum::<f64>().sqrt(),
    }
}

fn make_row(label: &str, r: f64, xi: f64, x: &EnsembleSummary, y: &EnsembleSummary, predicted: f64, conditions_ok: bool) -> HeadlineRow {
    let (ex, ey) = (&x.exponents, &y.exponents);
    let gap = ey[1].mean - ex[1].mean;
    let gap_se = ey[1].combined(&ex[1]);
    let (tx, ty) = (total(ex), total(ey));
    HeadlineRow {
        label: label.into(),
        r,
        xi,
        sigma_u_x: ex[0].mean,
        sigma_u_x_se: ex[0].stderr,
        sigma_c_x: ex[1].mean,
        sigma_c_x_se: ex[1].stderr,
        sigma_s_x: ex[2].mean,
        sigma_s_x_se: ex[2].stderr,
        sigma_u_y: ey[0].mean,
        sigma_u_y_se: ey[0].stderr,
        sigma_c_y: ey[1].mean,
        sigma_c_y_se: ey[1].stderr,
        sigma_s_y: ey[2].mean,
        sigma_s_y_se: ey[2].stderr,
        gap,
        gap_se,
        predicted_shift: predicted,
        gap_ratio: (predicted != 0.0).then(|| gap / predicted),
        conditions_ok,
        consistent: within(tx.mean, tx.stderr) && within(ty.mean, ty.stderr),
        passed: conditions_ok && gap > STDERR_MULTIPLIER * gap_se,
    }
}

fn spectra_equal(a: &[OrbitRun], b: &[OrbitRun]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.spectrum.raw.iter().zip(&y.spectrum.raw).all(|(u, v)| u.to_bits() == v.to_bits())
                && x.spectrum.raw.len() == y.spectrum.raw.len()
        })
}

/// Builds a perturbed field for `(r, ξ)`; conditions use the configured `ε`
/// or, failing that, the `ε` for which `ξ` sits at the bound.
pub fn build_field(cfg: &ExperimentConfig, sys: &CatSuspension, r: f64, xi: f64) -> Result<PerturbedField> {
    let mut spec = cfg.spec_for(sys, r, xi);
    if spec.epsilon.is_none() && xi > 0.0 {
        spec.epsilon = Some(implied_epsilon(&spec.profiles(), r, xi)?);
    }
    PerturbedField::new(sys, spec)
}

pub fn condition_options(cfg: &ExperimentConfig) -> ConditionOptions {
    ConditionOptions { seed: cfg.seed, ..ConditionOptions::default() }
}

/// Confirms `Σ^c(X) = 0`, then perturbs at each radius and re-measures.
/// A failed condition aborts with the name of the failed check.
pub fn run_headline(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sys = cfg.suspension()?;
    let keep = cfg.records && cfg.output.is_some();
    let settings = cfg.run_settings(cfg.horizon, keep);
    let x_runs = run_ensemble(&sys, None, cfg.orbits, &settings, cfg.seed)?;
    let x = merge_runs(&x_runs)?;
    let c = x.exponents[1];
    if !within(c.mean, c.stderr) {
        return Err(Error::ConditionFailed {
            name: "unperturbed_central".into(),
            detail: format!("central sum {:.3e} is not within 3 stderr ({:.3e}) of 0", c.mean, c.stderr),
        });
    }

    let mut rows = vec![];
    let mut perturbed = vec![];
    let mut conditions = vec![];
    let mut audits = vec![];

    let control_field = build_field(cfg, &sys, cfg.r[0], 0.0)?;
    let control_runs = run_ensemble(&sys, Some(&control_field), cfg.orbits, &settings, cfg.seed)?;
    let control_equal = spectra_equal(&x_runs, &control_runs);
    let control = merge_runs(&control_runs)?;
    let mut row = make_row("control", cfg.r[0], 0.0, &x, &control, 0.0, true);
    row.passed = control_equal;
    rows.push(row);

    for &r in &cfg.r {
        let xi = cfg.xi_for(r)?;
        let field = build_field(cfg, &sys, r, xi)?;
        let report = check_conditions(&field, &condition_options(cfg))?.into_result()?;
        let y_runs = run_ensemble(&sys, Some(&field), cfg.orbits, &settings, cfg.seed)?;
        let y = merge_runs(&y_runs)?;
        let audit = audit_from(&field, &x, &y)?;
        rows.push(make_row("perturbed", r, xi, &x, &y, audit.predicted_gap, report.passed));
        if keep {
            write_records(cfg.output.as_deref().unwrap(), r, xi, &y_runs)?;
        }
        perturbed.push(y);
        conditions.push(report);
        audits.push(audit);
    }

    let scaling = (cfg.r.len() > 1).then(|| {
        let norm: Vec<f64> = rows.iter().filter_map(|r| r.gap_ratio).collect();
        let hi = norm.iter().cloned().fold(f64::MIN, f64::max);
        let lo = norm.iter().cloned().fold(f64::MAX, f64::min);
        let spread = hi / lo;
        ScalingCheck { radii: cfg.r.clone(), normalized_gaps: norm, spread, passed: lo > 0.0 && spread <= 2.0 }
    });
    let passed = rows.iter().all(|r| r.passed);
    let result = ExperimentResult {
        pass_criterion: PASS_CRITERION.into(),
        stderr_multiplier: STDERR_MULTIPLIER,
        config: cfg.clone(),
        unperturbed: x,
        perturbed,
        rows,
        conditions,
        audits,
        control_equal,
        scaling,
        passed,
    };
    if let Some(dir) = &cfg.output {
        write_csv(&dir.join("headline.csv"), ROW_COLUMNS, &result.rows)?;
        write_json(&dir.join("headline.json"), &result)?;
    }
    Ok(result)
}

pub(crate) const RECORD_COLUMNS: &[(&str, &str)] = &[
    ("run_id", "orbit index in the ensemble"),
    ("t_enter", "section step at which the orbit met the flowbox"),
    ("regime", "inside_forward (box transit) or inside_backward (return to the box base)"),
    ("gamma", "scalar comparison multiplier for the step"),
    ("tau", "steps since the matching box transit"),
    ("A", "correction factor booked at the return"),
];

fn write_records(dir: &Path, r: f64, xi: f64, runs: &[OrbitRun]) -> Result<()> {
    let records: Vec<_> = runs.iter().flat_map(|o| o.records.iter()).collect();
    write_csv(&dir.join(format!("records_r{r}_xi{xi}.csv")), RECORD_COLUMNS, &records)
}
