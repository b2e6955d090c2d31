//! Dominated splitting of the suspension: worst ratios and hyperbolic bundles.

use central_lyapunov::domination::{check_domination, check_hyperbolic_bundle, BundleMode};
use central_lyapunov::model::{make_cat_suspension, PhasePoint};

fn main() -> central_lyapunov::Result<()> {
    let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0)?;
    let p = PhasePoint::new([0.1, 0.7, 0.3], 0.25);
    let rep = check_domination(&sys, |q| sys.exact_splitting_at(q), &p, 1, 500, 7)?;
    for pair in &rep.pairs {
        println!("bundles {} / {}: worst ratio {:.9}", pair.i, pair.j, pair.worst_ratio);
    }
    println!("dominated with m = 1: {}", rep.passed);
    for (i, mode) in [(0, BundleMode::Expanding), (2, BundleMode::Contracting)] {
        let b = check_hyperbolic_bundle(&sys, |q| Ok(sys.exact_splitting_at(q)?.bundles[i].clone()), &p, 1, mode, 100, 7)?;
        println!("bundle {i} {:?}: extremal growth {:.6}, holds {}", mode, b.extremal_growth, b.holds);
    }
    Ok(())
}
