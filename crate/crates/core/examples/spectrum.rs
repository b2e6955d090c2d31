//! Lyapunov spectrum of the golden suspension and of an ABC flow.

use nalgebra::DVector;

use central_lyapunov::model::{make_cat_suspension, AbcField, AnalyticFlow, PhasePoint};
use central_lyapunov::spectrum::{central_sum, qr_spectrum};

fn main() -> central_lyapunov::Result<()> {
    let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0)?;
    let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
    let est = qr_spectrum(&sys, &p, 1e5, 1.0, 1)?;
    println!("suspension exponents {:?}", est.exponents);
    println!("stderr               {:?}", est.stderr);
    println!("log det rate         {:.3e}", est.log_det_rate);
    println!("expected +-{:.6}", ((3.0 + 5f64.sqrt()) / 2.0).ln());

    let abc = AnalyticFlow::new(AbcField::new(1.0, (2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()), 1e-2)?;
    let q = DVector::from_vec(vec![0.3, 0.2, 0.1]);
    let c = central_sum(&abc, &q, 2e3, 0.5, 1, 1)?;
    println!("ABC normal exponents {:?}, central {:.3e} +- {:.1e}", c.spectrum.raw, c.direct, c.stderr);
    Ok(())
}
