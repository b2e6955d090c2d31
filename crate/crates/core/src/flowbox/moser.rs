//! Maps `φ: B_r → B_r` with prescribed Jacobian `g(φ(w))·det Dφ(w) = λ`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::poisson::BallGrid;
use super::spline::TensorSpline;
use crate::error::{invalid, Error, Result};

pub type Density = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Ghost layers around the logical grid for the interpolant.
const GHOSTS: usize = 8;
/// Time steps of the Moser flow.
const FLOW_STEPS: usize = 16;
const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

#[derive(Clone)]
pub struct MoserMap {
    pub dim: usize,
    pub radius: f64,
    pub lambda: f64,
    /// Largest `|g(φ)·det Dφ − λ|` over the check nodes.
    pub residual: f64,
    /// Largest `| |φ(w)| − r |` over sampled boundary points.
    pub boundary_displacement: f64,
    pub grid_n: Option<usize>,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Identity,
    OneD(OneD),
    Grid(Box<GridFlow>),
}

impl std::fmt::Debug for MoserMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MoserMap")
            .field("dim", &self.dim)
            .field("radius", &self.radius)
            .field("lambda", &self.lambda)
            .field("residual", &self.residual)
            .field("boundary_displacement", &self.boundary_displacement)
            .field("grid_n", &self.grid_n)
            .finish()
    }
}

impl MoserMap {
    pub fn identity(dim: usize, radius: f64) -> Self {
        MoserMap { dim, radius, lambda: 1.0, residual: 0.0, boundary_displacement: 0.0, grid_n: None, kind: Kind::Identity }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Identity => w.to_vec(),
            Kind::OneD(m) => vec![m.phi(w[0])],
            Kind::Grid(m) => m.apply(w),
        }
    }

    pub fn jacobian(&self, w: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            Kind::Identity => DMatrix::identity(self.dim, self.dim),
            Kind::OneD(m) => DMatrix::from_element(1, 1, self.lambda / (m.g)(&[m.phi(w[0])])),
            Kind::Grid(_) => fd_jacobian(|x| self.apply(x), w, 1e-5 * self.radius),
        }
    }

    /// Solves `φ(w) = y` by Newton iteration.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.is_identity() {
            return Ok(y.to_vec());
        }
        let mut w = DVector::from_column_slice(y);
        let target = DVector::from_column_slice(y);
        for _ in 0..50 {
            let f = DVector::from_vec(self.apply(w.as_slice())) - &target;
            if f.norm() < 1e-13 * self.radius.max(1.0) {
                return Ok(w.iter().copied().collect());
            }
            let j = self.jacobian(w.as_slice());
            let step = j.lu().solve(&f).ok_or_else(|| Error::ChartInversion("singular Moser Jacobian".into()))?;
            w -= step;
        }
        Err(Error::ChartInversion("Moser inverse did not converge".into()))
    }
}

fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, w: &[f64], h: f64) -> DMatrix<f64> {
    let d = w.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut x = w.to_vec();
    for j in 0..d {
        x[j] = w[j] + h;
        let p = f(&x);
        x[j] = w[j] - h;
        let m = f(&x);
        x[j] = w[j];
        for i in 0..d {
            jac[(i, j)] = (p[i] - m[i]) / (2.0 * h);
        }
    }
    jac
}

/// Closed-form solution on an interval through the antiderivative of `g`.
#[derive(Clone)]
struct OneD {
    g: Density,
    radius: f64,
    lambda: f64,
    panel: f64,
    cumulative: Vec<f64>,
}

impl OneD {
    fn antiderivative(&self, x: f64) -> f64 {
        let k = ((x / self.panel).floor() as usize).min(self.cumulative.len() - 2);
        let a = k as f64 * self.panel;
        self.cumulative[k] + gauss(&*self.g, a, x)
    }

    fn phi(&self, x: f64) -> f64 {
        let target = self.lambda * x;
        let (mut lo, mut hi) = (0.0, self.radius);
        let mut y = x.clamp(0.0, self.radius);
        for _ in 0..100 {
            let f = self.antiderivative(y) - target;
            if f > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = y - f / (self.g)(&[y]);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-16 * self.radius.max(1.0) {
                return next;
            }
            y = next;
        }
        y
    }
}

fn gauss(g: &(dyn Fn(&[f64]) -> f64 + Send + Sync), a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS8.iter().map(|(x, w)| w * g(&[c + h * x])).sum::<f64>() * h
}

/// Solves the interval problem on `[0, r]`; `φ(0) = 0` and `φ(r) = r`
/// unless `lambda_override` is given.
pub fn moser_solve_1d(g: Density, radius: f64, lambda_override: Option<f64>) -> Result<MoserMap> {
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    let panels = 256;
    let panel = radius / panels as f64;
    let mut cumulative = vec![0.0];
    for k in 0..panels {
        let (a, b) = (k as f64 * panel, (k + 1) as f64 * panel);
        for (x, _) in GAUSS8 {
            let v = g(&[0.5 * (a + b) + 0.5 * (b - a) * x]);
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("density must be positive"));
            }
        }
        cumulative.push(cumulative[k] + gauss(&*g, a, b));
    }
    let total = *cumulative.last().unwrap();
    let lambda = match lambda_override {
        Some(l) if !(l > 0.0 && l * radius <= total * (1.0 + 1e-12)) => {
            return Err(invalid("lambda override must satisfy 0 < λ·r <= ∫g"));
        }
        Some(l) => l,
        None => total / radius,
    };
    let m = OneD { g, radius, lambda, panel, cumulative };
    let mut residual: f64 = 0.0;
    let h = 1e-6 * radius;
    for k in 1..200 {
        let x = radius * k as f64 / 200.0;
        let d = (m.phi(x + h) - m.phi(x - h)) / (2.0 * h);
        residual = residual.max(((m.g)(&[m.phi(x)]) * d - lambda).abs());
    }
    let boundary_displacement = (m.phi(0.0)).abs().max((m.phi(radius) - radius).abs());
    Ok(MoserMap { dim: 1, radius, lambda, residual, boundary_displacement, grid_n: None, kind: Kind::OneD(m) })
}

/// Moser flow `w' = ∇u_t(w)/ρ_t(w)` with `ρ_t = (1−t)λ + t·g` and
/// `Δu = λ − g` under Neumann data.
#[derive(Clone)]
struct GridFlow {
    grid: BallGrid,
    spline: TensorSpline,
    g: Density,
    lambda: f64,
}

impl GridFlow {
    fn new(g: Density, d: usize, radius: f64, grid_n: usize) -> Result<Self> {
        let grid = BallGrid::new(d, radius, grid_n);
        let (gint, vol) = grid.integrate(|x| g(x));
        if gint.iter().zip(&vol).any(|(a, v)| !(a / v > 0.0) || !a.is_finite()) {
            return Err(invalid("density must be positive and finite"));
        }
        let lambda = gint.iter().sum::<f64>() / vol.iter().sum::<f64>();
        let rhs: Vec<f64> = gint.iter().zip(&vol).map(|(a, v)| lambda * v - a).collect();
        let u = grid.solve_neumann(&rhs)?;
        let spline = extend(&grid, &u);
        Ok(GridFlow { grid, spline, g, lambda })
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.grid.d;
        let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho < 1e-14 * self.grid.radius {
            // The gradient is smooth through the origin; sample just off it.
            let mut y = x.to_vec();
            y[0] += 1e-9 * self.grid.radius;
            return self.gradient(&y);
        }
        let phi = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        let (cp, sp) = (phi.cos(), phi.sin());
        if d == 2 {
            let (_, gr) = self.spline.eval_grad(&[rho, phi]);
            let (ur, uf) = (gr[0], gr[1] / rho);
            return vec![cp * ur - sp * uf, sp * ur + cp * uf];
        }
        let rxy = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let theta = rxy.atan2(x[2]);
        let (ct, st) = (theta.cos(), theta.sin());
        let (_, gr) = self.spline.eval_grad(&[rho, theta, phi]);
        let ur = gr[0];
        let ut = gr[1] / rho;
        let uf = if rxy > 1e-12 * self.grid.radius { gr[2] / rxy } else { 0.0 };
        vec![st * cp * ur + ct * cp * ut - sp * uf, st * sp * ur + ct * sp * ut + cp * uf, ct * ur - st * ut]
    }

    fn velocity(&self, x: &[f64], t: f64) -> Vec<f64> {
        let rho_t = (1.0 - t) * self.lambda + t * (self.g)(x);
        self.gradient(x).into_iter().map(|v| v / rho_t).collect()
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        let dt = 1.0 / FLOW_STEPS as f64;
        let mut x = w.to_vec();
        let d = x.len();
        let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { (0..d).map(|i| x[i] + s * k[i]).collect() };
        for step in 0..FLOW_STEPS {
            let t = step as f64 * dt;
            let k1 = self.velocity(&x, t);
            let k2 = self.velocity(&axpy(&x, &k1, dt / 2.0), t + dt / 2.0);
            let k3 = self.velocity(&axpy(&x, &k2, dt / 2.0), t + dt / 2.0);
            let k4 = self.velocity(&axpy(&x, &k3, dt), t + dt);
            for i in 0..d {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        x
    }
}

/// Extends cell values across the axis, the poles and the outer sphere by
/// symmetry and fits the interpolant on the enlarged logical grid.
fn extend(grid: &BallGrid, u: &[f64]) -> TensorSpline {
    let g = GHOSTS as isize;
    let (nr, nt, np) = (grid.n_rho as isize, grid.n_theta as isize, grid.n_phi as isize);
    let lookup = |mut i: isize, mut j: isize, mut k: isize| -> f64 {
        if i < 0 {
            i = -i - 1;
            j = nt - 1 - j;
            k += np / 2;
        } else if i >= nr {
            i = 2 * nr - 1 - i;
        }
        if j < 0 {
            j = -j - 1;
            k += np / 2;
        } else if j >= nt {
            j = 2 * nt - 1 - j;
            k += np / 2;
        }
        u[grid.index(i as usize, j as usize, k.rem_euclid(np) as usize)]
    };
    let (hr, ht, hp) = (grid.h_rho(), grid.h_theta(), grid.h_phi());
    let er = (nr + 2 * g) as usize;
    let ep = (np + 2 * g) as usize;
    if grid.d == 2 {
        let mut vals = Vec::with_capacity(er * ep);
        for i in -g..nr + g {
            for k in -g..np + g {
                vals.push(lookup(i, 0, k));
            }
        }
        TensorSpline::new(vec![er, ep], vec![(0.5 - g as f64) * hr, (0.5 - g as f64) * hp], vec![hr, hp], vals)
    } else {
        let et = (nt + 2 * g) as usize;
        let mut vals = Vec::with_capacity(er * et * ep);
        for i in -g..nr + g {
            for j in -g..nt + g {
                for k in -g..np + g {
                    vals.push(lookup(i, j, k));
                }
            }
        }
        TensorSpline::new(
            vec![er, et, ep],
            vec![(0.5 - g as f64) * hr, (0.5 - g as f64) * ht, (0.5 - g as f64) * hp],
            vec![hr, ht, hp],
            vals,
        )
    }
}

/// Builds the grid Moser map at a fixed resolution and measures its residual.
pub fn moser_grid_fixed(g: Density, d: usize, radius: f64, grid_n: usize) -> Result<MoserMap> {
    if !(d == 2 || d == 3) {
        return Err(invalid("grid Moser solver supports d = 2 or 3"));
    }
    if grid_n < 8 || !grid_n.is_multiple_of(4) {
        return Err(invalid("grid_n must be a multiple of 4"));
    }
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    let flow = GridFlow::new(g, d, radius, grid_n)?;
    let grid = flow.grid.clone();
    let nodes: Vec<(usize, usize, usize)> = (0..grid.n_rho)
        .flat_map(|i| (0..grid.n_theta).flat_map(move |j| (0..grid.n_phi).map(move |k| (i, j, k))))
        .collect();
    let h = 1e-5 * radius;
    let residual = nodes
        .par_iter()
        .map(|&(i, j, k)| {
            let (r, t, p) = grid.center(i, j, k);
            let w = grid.to_cartesian(r, t, p);
            let det = fd_jacobian(|x| flow.apply(x), &w, h).determinant();
            ((flow.g)(&flow.apply(&w)) * det - flow.lambda).abs()
        })
        .reduce(|| 0.0, f64::max);
    let boundary_displacement = (0..grid.n_theta)
        .into_par_iter()
        .flat_map(|j| (0..grid.n_phi).into_par_iter().map(move |k| (j, k)))
        .map(|(j, k)| {
            let (_, t, p) = grid.center(0, j, k);
            let w = grid.to_cartesian(radius, t, p);
            let y = flow.apply(&w);
            (y.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(MoserMap {
        dim: d,
        radius,
        lambda: flow.lambda,
        residual,
        boundary_displacement,
        grid_n: Some(grid_n),
        kind: Kind::Grid(Box::new(flow)),
    })
}

/// Grid Moser map meeting `tol` on residual and boundary displacement,
/// doubling the resolution while affordable.
pub fn moser_solve_grid(g: Density, d: usize, radius: f64, grid_n: usize, tol: f64) -> Result<MoserMap> {
    if grid_n < 32 {
        return Err(invalid("grid_n must be at least 32"));
    }
    let cap = if d == 2 { 512 } else { 64 };
    let mut n = grid_n;
    loop {
        let m = moser_grid_fixed(g.clone(), d, radius, n)?;
        let worst = m.residual.max(m.boundary_displacement);
        if worst <= tol {
            return Ok(m);
        }
        if 2 * n > cap {
            return Err(Error::MoserResidual { residual: worst, tol });
        }
        n *= 2;
    }
}
