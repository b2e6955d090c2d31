//! Volume-preserving flowbox charts: the suspension chart with a written
//! fixture, and a generic chart of an ABC flow built with the grid Moser map.

use nalgebra::DVector;

use central_lyapunov::flowbox::{
    build_chart, read_chart_fixture, sample_chart_domain, suspension_max_radius, verify_chart, write_chart_fixture,
    SuspensionChart,
};
use central_lyapunov::model::{make_cat_suspension, AbcField, AnalyticFlow, PhasePoint};

fn main() -> central_lyapunov::Result<()> {
    let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0)?;
    let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
    println!("injectivity radius {:.4}", suspension_max_radius(&sys, &p));
    let chart = SuspensionChart::aligned(&sys, p, 0.05)?;
    let rep = verify_chart(&chart, &sys, &sample_chart_domain(4, 0.05, 1000, (-1.0, 1.0), 3))?;
    println!("suspension chart: {rep:?}");

    let dir = std::env::temp_dir().join("central_lyapunov_fixture");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("chart.json");
    let coords = |q: &PhasePoint| vec![q.base[0], q.base[1], q.base[2], q.height];
    write_chart_fixture(&chart, coords, 256, 3, &path)?;
    let (fx, rows) = read_chart_fixture(&path)?;
    println!("fixture {} with {} records of {} columns", path.display(), rows.len(), fx.columns.len());

    let abc = AnalyticFlow::new(AbcField::new(1.0, (2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()), 1e-2)?;
    let center = DVector::from_vec(vec![0.3, 0.2, 0.1]);
    let generic = build_chart(&abc, &center, 0.1, 64, 1e-2)?;
    let rep = verify_chart(&generic, &abc, &sample_chart_domain(3, 0.1, 100, (-0.5, 0.5), 3))?;
    println!("ABC chart (Moser residual {:.2e}): {rep:?}", generic.moser.residual);
    Ok(())
}
