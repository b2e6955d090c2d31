//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test --test acceptance`.

use std::sync::Arc;
use std::time::Instant;

use central_lyapunov::experiment::{
    cocycle_composition_error, rotation_group_error, run_headline, ExperimentConfig, ExperimentResult,
};
use central_lyapunov::flowbox::{moser_grid_fixed, moser_solve_1d, sample_chart_domain, verify_chart, SuspensionChart};
use central_lyapunov::model::{make_cat_suspension, CatSuspension, PhasePoint};
use central_lyapunov::perturbation::{check_conditions, ConditionOptions, PerturbationSpec, PerturbedField};
use central_lyapunov::poincare::{compose, poincare_map};
use central_lyapunov::spectrum::qr_spectrum;
use central_lyapunov::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn golden() -> CatSuspension {
    make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap()
}

fn p0() -> PhasePoint {
    PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0)
}

fn unperturbed_spectrum() -> Result<Outcome> {
    let sys = golden();
    let t = Instant::now();
    let est = qr_spectrum(&sys, &p0(), 1e5, 1.0, 1)?;
    let secs = t.elapsed().as_secs_f64();
    let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let err = est.raw.iter().zip([l, 0.0, -l]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        err < 1e-3 && secs < 60.0,
        format!("exponents {:?} stderr {:?}, max error {err:.2e}, {secs:.1} s", est.raw, est.raw_stderr),
    )
}

fn volume_identity() -> Result<Outcome> {
    let sys = golden();
    let x = qr_spectrum(&sys, &p0(), 1e4, 1.0, 2)?;
    let ex = (x.raw.iter().sum::<f64>() - x.log_det_rate).abs();
    let field = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, 0.3))?;
    let q = field.chart().section_point(&[0.01, -0.02, 0.0]);
    let y = qr_spectrum(&field, &q, 200.0, 0.5, 2)?;
    let ey = (y.raw.iter().sum::<f64>() - y.log_det_rate).abs();
    outcome(ex.max(ey) <= 1e-6, format!("|sum - log det rate| = {ex:.2e} (X), {ey:.2e} (Y)"))
}

fn domination() -> Result<Outcome> {
    let sys = golden();
    let rep = central_lyapunov::domination::check_domination(&sys, |q| sys.exact_splitting_at(q), &p0(), 1, 1000, 3)?;
    let worst = rep.pairs.iter().map(|p| p.worst_ratio).fold(0.0, f64::max);
    outcome(rep.passed && (worst - 0.381966).abs() <= 1e-6, format!("m = 1, worst ratio {worst:.9}"))
}

fn flowbox() -> Result<Outcome> {
    let sys = golden();
    let chart = SuspensionChart::aligned(&sys, p0(), 0.05)?;
    let rep = verify_chart(&chart, &sys, &sample_chart_domain(4, 0.05, 1000, (-1.0, 1.0), 4))?;
    let m = moser_solve_1d(Arc::new(|x: &[f64]| 1.0 + x[0]), 1.0, None)?;
    let e1 = (m.apply(&[1.0 / 3.0])[0] - (2f64.sqrt() - 1.0)).abs();
    let g: central_lyapunov::flowbox::Density = Arc::new(|x: &[f64]| 1.0 + 0.2 * x[0]);
    let coarse = moser_grid_fixed(g.clone(), 2, 1.0, 64)?.residual;
    let fine = moser_grid_fixed(g, 2, 1.0, 128)?.residual;
    outcome(
        rep.max_det_error <= 1e-6 && e1 <= 1e-10 && fine <= 1e-3 && fine < coarse,
        format!("det error {:.1e} at 1000 points, phi(1/3) error {e1:.1e}, grid residual {coarse:.2e} -> {fine:.2e}", rep.max_det_error),
    )
}

fn perturbation_conditions() -> Result<Outcome> {
    let sys = golden();
    let opts = ConditionOptions::default();
    let rep = check_conditions(&PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, 0.3))?, &opts)?;
    let eps = 0.01;
    let mut spec = PerturbationSpec::aligned(&sys, p0(), 0.05, 0.0).with_epsilon(eps);
    spec.xi = spec.bound()?.unwrap();
    let at_bound = check_conditions(&PerturbedField::new(&sys, spec)?, &opts)?;
    let rot = rep.rotation_error[0].max(rep.rotation_error[1]);
    let ok = rot <= 1e-6
        && rep.w_error == 0.0
        && rep.support_violations == 0
        && rep.max_divergence <= 1e-8
        && at_bound.c1_distance < eps
        && at_bound.passed;
    outcome(
        ok,
        format!(
            "rotation {rot:.1e}, identity on W {:.1e}, support violations {}, div {:.1e} at {} points, C1 {:.2e} < {eps} at xi bound",
            rep.w_error, rep.support_violations, rep.max_divergence, opts.divergence_samples, at_bound.c1_distance
        ),
    )
}

fn headline(res: &ExperimentResult) -> Result<Outcome> {
    let c = res.unperturbed.exponents[1];
    let central_zero = c.mean.abs() <= 3.0 * c.stderr.max(1e-12 / 3.0);
    let row = res.rows.iter().find(|r| r.label == "perturbed" && r.r == 0.05).expect("r = 0.05 row");
    let ratio = row.gap_ratio.unwrap_or(0.0);
    let scaling = res.scaling.as_ref().is_some_and(|s| s.passed);
    let ok = central_zero && row.passed && (0.5..=2.0).contains(&ratio) && scaling && res.passed;
    outcome(
        ok,
        format!(
            "sigma_c(X) {:.1e} +- {:.1e}; r = 0.05: gap {:.3e} +- {:.1e}, ratio to vol*|I(1)| {ratio:.3}; normalized gaps {:?}",
            c.mean,
            c.stderr,
            row.gap,
            row.gap_se,
            res.scaling.as_ref().map(|s| s.normalized_gaps.clone()).unwrap_or_default()
        ),
    )
}

fn comparison(res: &ExperimentResult) -> Result<Outcome> {
    let le = res.audits.iter().all(|a| a.le_holds);
    let fwd = res.audits.iter().all(|a| a.forward_holds);
    let a: Vec<f64> = res.audits.iter().map(|a| a.max_log_a_closed).collect();
    let inversions = a.windows(2).filter(|w| w[1] > w[0]).count();
    outcome(
        le && fwd && inversions <= 1,
        format!("le {le}, forward {fwd}, max log A (closed) over r = {:?}: {a:?}", res.config.r),
    )
}

fn properties(res: &ExperimentResult) -> Result<Outcome> {
    let sys = golden();
    let cx = cocycle_composition_error(&sys, &p0())?;
    let field = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, 0.3))?;
    let q = field.chart().section_point(&[0.01, 0.02, -0.01]);
    let first = poincare_map(&field, &q, 0.4)?;
    let second = poincare_map(&field, &first.to.at, 0.9)?;
    let whole = poincare_map(&field, &q, 1.3)?;
    let cy = (&whole.matrix - &compose(&second, &first).matrix).amax();
    let rot = rotation_group_error(8, 100_000);

    let small = |dir: &std::path::Path| ExperimentConfig {
        r: vec![0.05],
        horizon: 1e4,
        orbits: 4,
        output: Some(dir.to_path_buf()),
        ..ExperimentConfig::default()
    };
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    run_headline(&small(a.path()))?;
    run_headline(&small(b.path()))?;
    let mut same = true;
    for name in ["headline.csv", "records_r0.05_xi0.3.csv"] {
        same &= std::fs::read(a.path().join(name))? == std::fs::read(b.path().join(name))?;
    }
    let control = res.control_equal && res.rows[0].label == "control" && res.rows[0].gap == 0.0;
    outcome(
        cx.max(cy) <= 1e-8 && rot <= 1e-12 && control && same,
        format!("composition {cx:.1e} (X), {cy:.1e} (Y); rotation group {rot:.1e}; control equal {control}; CSV re-run identical {same}"),
    )
}

fn report(n: usize, name: &str, r: Result<Outcome>) -> bool {
    match r {
        Ok(o) => {
            println!("criterion {n} {}: {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
            o.passed
        }
        Err(e) => {
            println!("criterion {n} FAIL: {name}: error {e}");
            false
        }
    }
}

fn main() {
    let started = Instant::now();
    let mut all = true;
    all &= report(1, "unperturbed spectrum", unperturbed_spectrum());
    all &= report(2, "volume identity", volume_identity());
    all &= report(3, "domination", domination());
    all &= report(4, "flowbox", flowbox());
    all &= report(5, "perturbation conditions", perturbation_conditions());
    let cfg = ExperimentConfig { r: vec![0.1, 0.05, 0.025], ..ExperimentConfig::default() };
    match run_headline(&cfg) {
        Ok(res) => {
            all &= report(6, "headline", headline(&res));
            all &= report(7, "comparison cocycle", comparison(&res));
            all &= report(8, "properties", properties(&res));
        }
        Err(e) => {
            for (n, name) in [(6, "headline"), (7, "comparison cocycle"), (8, "properties")] {
                println!("criterion {n} FAIL: {name}: headline run failed: {e}");
            }
            all = false;
        }
    }
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
