use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::headline::{build_field, condition_options};
use crate::comparison::{audit_exponent_gap, return_time, RunSettings};
use crate::domination::{check_domination, check_hyperbolic_bundle, BundleMode};
use crate::error::{Error, Result};
use crate::flowbox::{moser_grid_fixed, moser_solve_1d, sample_chart_domain, verify_chart, SuspensionChart};
use crate::model::{CatSuspension, PhasePoint};
use crate::perturbation::{check_conditions, rotation};
use crate::poincare::{compose, poincare_map};

pub const SUITES: &[&str] = &["flowbox", "perturbation", "domination", "comparison"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl SuiteCheck {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        SuiteCheck { name: name.into(), value, threshold, passed: value <= threshold }
    }

    fn flag(name: &str, ok: bool) -> Self {
        SuiteCheck { name: name.into(), value: ok as u8 as f64, threshold: 1.0, passed: ok }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<SuiteCheck>,
    pub passed: bool,
}

pub fn run_suite(name: &str, cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let sys = cfg.suspension()?;
    let checks = match name {
        "flowbox" => flowbox_suite(cfg, &sys)?,
        "perturbation" => perturbation_suite(cfg, &sys)?,
        "domination" => domination_suite(cfg, &sys)?,
        "comparison" => comparison_suite(cfg, &sys)?,
        other => return Err(Error::UnknownSuite(other.into())),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { name: name.into(), checks, passed })
}

fn flowbox_suite(cfg: &ExperimentConfig, sys: &CatSuspension) -> Result<Vec<SuiteCheck>> {
    let chart = SuspensionChart::aligned(sys, cfg.p, cfg.r[0])?;
    let samples = sample_chart_domain(4, cfg.r[0], 1000, (-1.0, 1.0), cfg.seed);
    let rep = verify_chart(&chart, sys, &samples)?;
    let one_d = moser_solve_1d(Arc::new(|x: &[f64]| 1.0 + x[0]), 1.0, None)?;
    let phi = one_d.apply(&[1.0 / 3.0])[0];
    let g: crate::flowbox::Density = Arc::new(|x: &[f64]| 1.0 + 0.2 * x[0]);
    let coarse = moser_grid_fixed(g.clone(), 2, 1.0, 64)?;
    let fine = moser_grid_fixed(g, 2, 1.0, 128)?;
    Ok(vec![
        SuiteCheck::at_most("chart_det", rep.max_det_error, 1e-6),
        SuiteCheck::at_most("chart_round_trip", rep.max_round_trip_error, 1e-9),
        SuiteCheck::at_most("chart_rectification", rep.max_rectification_error, 1e-9),
        SuiteCheck::at_most("moser_1d", (phi - (2f64.sqrt() - 1.0)).abs(), 1e-10),
        SuiteCheck::at_most("moser_grid_residual", fine.residual, 1e-3),
        SuiteCheck::at_most("moser_grid_refinement", fine.residual, coarse.residual),
    ])
}

fn perturbation_suite(cfg: &ExperimentConfig, sys: &CatSuspension) -> Result<Vec<SuiteCheck>> {
    let r = cfg.r[0];
    let field = build_field(cfg, sys, r, cfg.xi_for(r)?)?;
    let rep = check_conditions(&field, &condition_options(cfg))?;
    let mut out: Vec<SuiteCheck> = rep
        .checks
        .iter()
        .map(|c| SuiteCheck { name: c.name.clone(), value: c.value, threshold: c.threshold, passed: c.passed })
        .collect();
    out.push(SuiteCheck::at_most("rotation_group", rotation_group_error(cfg.seed, 10_000), 1e-12));
    Ok(out)
}

/// Largest `|R_a R_b v − R_{a+b} v|` over random angles and unit vectors.
pub fn rotation_group_error(seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let (a, b) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let v = [phi.cos(), phi.sin()];
            let two = rotation(a, rotation(b, v));
            let one = rotation(a + b, v);
            (two[0] - one[0]).abs().max((two[1] - one[1]).abs())
        })
        .fold(0.0, f64::max)
}

fn domination_suite(cfg: &ExperimentConfig, sys: &CatSuspension) -> Result<Vec<SuiteCheck>> {
    let rep = check_domination(sys, |p| sys.exact_splitting_at(p), &cfg.p, 1, 1000, cfg.seed)?;
    let sigma = sys.lambda_s();
    let mut out = vec![SuiteCheck::flag("dominated", rep.passed)];
    for pair in &rep.pairs {
        out.push(SuiteCheck::at_most(&format!("ratio_{}_{}", pair.i, pair.j), (pair.worst_ratio - sigma).abs(), 1e-6));
    }
    let bundle = |i: usize| move |p: &PhasePoint| Ok(sys.exact_splitting_at(p)?.bundles[i].clone());
    let up = check_hyperbolic_bundle(sys, bundle(0), &cfg.p, 1, BundleMode::Expanding, 200, cfg.seed)?;
    let down = check_hyperbolic_bundle(sys, bundle(2), &cfg.p, 1, BundleMode::Contracting, 200, cfg.seed)?;
    out.push(SuiteCheck::flag("unstable_expanding", up.holds));
    out.push(SuiteCheck::flag("stable_contracting", down.holds));
    Ok(out)
}

fn comparison_suite(cfg: &ExperimentConfig, sys: &CatSuspension) -> Result<Vec<SuiteCheck>> {
    let r = cfg.r[0];
    let field = build_field(cfg, sys, r, cfg.xi_for(r)?)?;
    let mut out = vec![SuiteCheck::at_most("cocycle_composition", cocycle_composition_error(sys, &cfg.p)?, 1e-8)];

    // Return times from the first few box visits of one orbit.
    let mut b = cfg.p.base;
    let mut found = 0;
    for _ in 0..200_000 {
        let next = field.section_step(&b).base;
        if field.chart().transverse(&next).norm() < r {
            let q = PhasePoint::new(b, cfg.p.height);
            if return_time(&field, &q, 1_000_000)?.is_some() {
                found += 1;
            }
            if found == 3 {
                break;
            }
        }
        b = next;
    }
    out.push(SuiteCheck::flag("return_times", found == 3));

    let settings = RunSettings { steps: (cfg.horizon as usize).min(100_000), burn_in: cfg.burn_in, keep_records: false };
    let audit = audit_exponent_gap(&field, cfg.orbits.min(8), &settings, cfg.seed)?;
    out.push(SuiteCheck::flag("le", audit.le_holds));
    out.push(SuiteCheck::flag("forward_accumulation", audit.forward_holds));
    out.push(SuiteCheck::flag("sign", audit.sign_holds));
    Ok(out)
}

/// `|P^{s+t} − P^s ∘ P^t|` for the unperturbed flow.
pub fn cocycle_composition_error(sys: &CatSuspension, p: &PhasePoint) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(s, t) in &[(0.3, 0.9), (1.7, 2.2), (0.05, 3.4)] {
        let first = poincare_map(sys, p, t)?;
        let second = poincare_map(sys, &first.to.at, s)?;
        let whole = poincare_map(sys, p, s + t)?;
        let both = compose(&second, &first);
        let scale = whole.matrix.amax().max(1.0);
        worst = worst.max((&whole.matrix - &both.matrix).amax() / scale);
    }
    Ok(worst)
}
