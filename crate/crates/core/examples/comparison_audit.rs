//! Matched runs of the unperturbed and perturbed flows and the audit of the
//! unstable exponent shift against the comparison cocycle.

use std::time::Instant;

use central_lyapunov::comparison::{audit_from, merge_runs, run_ensemble, RunSettings};
use central_lyapunov::model::{make_cat_suspension, PhasePoint};
use central_lyapunov::perturbation::{PerturbationSpec, PerturbedField};

fn main() -> central_lyapunov::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let r: f64 = args.get(1).map_or(0.05, |s| s.parse().unwrap());
    let orbits: usize = args.get(2).map_or(16, |s| s.parse().unwrap());
    let steps: usize = args.get(3).map_or(200_000, |s| s.parse().unwrap());
    let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0)?;
    let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
    let field = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p, r, 0.3))?;
    let settings = RunSettings { steps, burn_in: 1000, keep_records: false };
    let t0 = Instant::now();
    let x = merge_runs(&run_ensemble(&sys, None, orbits, &settings, 1)?)?;
    let y = merge_runs(&run_ensemble(&sys, Some(&field), orbits, &settings, 1)?)?;
    let audit = audit_from(&field, &x, &y)?;
    println!("r = {r}, {orbits} orbits x {steps} steps in {:.1?}", t0.elapsed());
    println!("central X: {:.3e} +- {:.1e}", x.exponents[1].mean, x.exponents[1].stderr);
    println!("central Y: {:.3e} +- {:.1e}", y.exponents[1].mean, y.exponents[1].stderr);
    let gap = y.exponents[1].mean - x.exponents[1].mean;
    println!("gap / (vol |I(1)|) = {:.3}", gap / audit.predicted_gap);
    println!("{}", serde_json::to_string_pretty(&audit)?);
    Ok(())
}
