//! Builds the local rotation perturbation and verifies its conditions, at
//! the angle bound for a target C1 distance and far beyond it.

use central_lyapunov::model::{make_cat_suspension, PhasePoint};
use central_lyapunov::perturbation::{check_conditions, ConditionOptions, PerturbationSpec, PerturbedField};

fn main() -> central_lyapunov::Result<()> {
    let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0)?;
    let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
    let (r, eps) = (0.05, 0.01);
    let spec = PerturbationSpec::aligned(&sys, p, r, 0.0).with_epsilon(eps);
    let bound = spec.bound()?.expect("epsilon is set");
    println!("xi bound for r = {r}, eps = {eps}: {bound:.3e}");
    let opts = ConditionOptions::default();
    for factor in [1.0, 1000.0] {
        let mut s = spec.clone();
        s.xi = factor * bound;
        let rep = check_conditions(&PerturbedField::new(&sys, s)?, &opts)?;
        println!("xi = {factor} x bound: C1 distance {:.3e}, passed {}", rep.c1_distance, rep.passed);
        for c in rep.checks.iter().filter(|c| !c.passed) {
            println!("  failed {}: {:.3e} > {:.3e}", c.name, c.value, c.threshold);
        }
    }
    let rep = check_conditions(&PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p, r, 0.3))?, &opts)?;
    println!("xi = 0.3: rotation errors {:?}, divergence {:.2e}", rep.rotation_error, rep.max_divergence);
    Ok(())
}
