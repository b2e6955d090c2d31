//! Refinement study of the grid Moser solver for a tilted density on the
//! unit disk and ball.

use std::sync::Arc;
use std::time::Instant;

use central_lyapunov::flowbox::moser_grid_fixed;

fn main() -> central_lyapunov::Result<()> {
    let g = Arc::new(|x: &[f64]| 1.0 + 0.2 * x[0]);
    println!("{:>3} {:>5} {:>12} {:>12} {:>8}", "d", "n", "residual", "boundary", "secs");
    for (d, sizes) in [(2usize, vec![32usize, 64, 128, 256]), (3, vec![16, 32, 64])] {
        for n in sizes {
            let t = Instant::now();
            let m = moser_grid_fixed(g.clone(), d, 1.0, n)?;
            println!("{d:>3} {n:>5} {:>12.3e} {:>12.3e} {:>8.2}", m.residual, m.boundary_displacement, t.elapsed().as_secs_f64());
        }
    }
    Ok(())
}
