use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::moser::{moser_solve_grid, MoserMap};
use crate::error::{invalid, Error, Result};
use crate::linalg::{conorm, op_norm};
use crate::model::suspension::wrap_signed;
use crate::model::{AnalyticFlow, CatSuspension, FlowSystem, PhasePoint, VectorField};
use crate::poincare::normal_frame;

/// Volume-preserving chart `Φ: [-1, 1] × B_r → M` with `Φ_* ∂/∂x₁ = X`.
pub trait RectifyingChart {
    type Point;

    /// Ambient dimension.
    fn dim(&self) -> usize;
    fn radius(&self) -> f64;
    /// Flux constant of the transverse Moser map; `Ψ_* X = λ·∂/∂x₁`.
    fn lambda(&self) -> f64 {
        1.0
    }
    fn phi(&self, u: &[f64]) -> Result<Self::Point>;
    /// `DΦ(u)` in ambient coordinates.
    fn phi_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>>;
    /// Chart coordinates of `q`, or `None` outside `X^{[-1,1]}(B_r)`.
    fn psi(&self, q: &Self::Point) -> Result<Option<Vec<f64>>>;
}

/// Chart of the suspension around a point: `Φ(x₁, w) = X^{x₁}(p + E·w)`.
///
/// The transverse speed is constant, so the Moser step is the identity.
#[derive(Clone, Debug)]
pub struct SuspensionChart {
    pub sys: CatSuspension,
    pub center: PhasePoint,
    pub radius: f64,
    /// Orthonormal transverse frame in `(x, y, z)`, one column per chart axis.
    pub frame: Matrix3<f64>,
    pub moser: MoserMap,
}

impl SuspensionChart {
    /// Chart aligned with the splitting: columns `(e_u, e_z, ±e_s)` with the
    /// sign fixed so that `det DΦ = +1`.
    pub fn aligned(sys: &CatSuspension, center: PhasePoint, radius: f64) -> Result<Self> {
        let u = sys.unstable_vector();
        let s = sys.stable_vector();
        let frame = Matrix3::new(u[0], 0.0, s[0], u[1], 0.0, s[1], 0.0, 1.0, 0.0);
        Self::with_frame(sys, center, radius, frame)
    }

    pub fn with_frame(sys: &CatSuspension, center: PhasePoint, radius: f64, mut frame: Matrix3<f64>) -> Result<Self> {
        if (frame.transpose() * frame - Matrix3::identity()).norm() > 1e-12 {
            return Err(invalid("chart frame must be orthonormal"));
        }
        if !(radius > 0.0) {
            return Err(invalid("chart radius must be positive"));
        }
        let r0 = suspension_max_radius(sys, &center);
        if radius > r0 {
            return Err(Error::NotInjective(radius));
        }
        // The field column comes first in chart order, so an odd permutation
        // of the ambient (x, y, z, h) order must be compensated.
        if frame.determinant() > 0.0 {
            frame.set_column(2, &(-frame.column(2)));
        }
        Ok(SuspensionChart { sys: sys.clone(), center, radius, frame, moser: MoserMap::identity(3, radius) })
    }

    /// Section point `p + E·w` at the height of the centre.
    pub fn section_point(&self, w: &[f64]) -> PhasePoint {
        let d = self.frame * nalgebra::Vector3::new(w[0], w[1], w[2]);
        PhasePoint::new([self.center.base[0] + d[0], self.center.base[1] + d[1], self.center.base[2] + d[2]], self.center.height)
    }

    /// Transverse coordinates `Eᵀ(b − p)` of a base point at the section height.
    pub fn transverse(&self, base: &[f64; 3]) -> nalgebra::Vector3<f64> {
        let d = nalgebra::Vector3::new(
            wrap_signed(base[0] - self.center.base[0]),
            wrap_signed(base[1] - self.center.base[1]),
            wrap_signed(base[2] - self.center.base[2]),
        );
        self.frame.transpose() * d
    }
}

/// Largest radius for which `B_r(p)` misses its images under `F^{±1}`
/// (sufficient for injectivity of `X^{[-1,1]}(B_r)`), found by bisection.
pub fn suspension_max_radius(sys: &CatSuspension, p: &PhasePoint) -> f64 {
    let growth = sys.lambda_u().abs().max(1.0 / sys.lambda_s().abs()) + 1.0;
    let dist = |b: [f64; 3]| -> f64 {
        (0..3).map(|i| wrap_signed(b[i] - p.base[i]).powi(2)).sum::<f64>().sqrt()
    };
    let gap = dist(sys.map(p.base)).min(dist(sys.inverse_map(p.base)));
    let ok = |r: f64| gap > growth * r;
    let (mut lo, mut hi) = (0.0, 0.5);
    if ok(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl RectifyingChart for SuspensionChart {
    type Point = PhasePoint;

    fn dim(&self) -> usize {
        4
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn phi(&self, u: &[f64]) -> Result<PhasePoint> {
        self.sys.flow(&self.section_point(&u[1..4]), u[0])
    }

    fn phi_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let (_, k) = self.sys.flow_with_crossings(&self.section_point(&u[1..4]), u[0]);
        let a = self.sys.base_derivative_power(k)?;
        let mut lift = Matrix3::identity();
        lift.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
        let cols = lift * self.frame;
        let mut j = DMatrix::zeros(4, 4);
        j[(3, 0)] = 1.0;
        j.view_mut((0, 1), (3, 3)).copy_from(&cols);
        Ok(j)
    }

    fn psi(&self, q: &PhasePoint) -> Result<Option<Vec<f64>>> {
        let dh = q.height - self.center.height;
        let mut found: Option<Vec<f64>> = None;
        for j in [-1i64, 0, 1] {
            let x1 = dh + j as f64;
            if !(-1.0..=1.0).contains(&x1) {
                continue;
            }
            // Flowing back by x1 from q crosses the roof exactly j times.
            let base = self.sys.map_power(q.base, -j);
            let w = self.transverse(&base);
            if w.norm() <= self.radius {
                if found.is_some() {
                    return Err(Error::NotInjective(self.radius));
                }
                found = Some(vec![x1, w[0], w[1], w[2]]);
            }
        }
        Ok(found)
    }
}

/// Flowbox chart of a generic analytic field on R^n with `n − 1 ∈ {2, 3}`:
/// `Φ(x₁, w) = X^{x₁/λ}(p + E·φ(w))` with `φ` from the grid Moser solver.
#[derive(Clone)]
pub struct FlowboxChart<F: VectorField + Clone> {
    pub sys: AnalyticFlow<F>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub normal: DVector<f64>,
    pub frame: DMatrix<f64>,
    pub moser: MoserMap,
}

pub fn build_chart<F: VectorField + Clone + 'static>(
    sys: &AnalyticFlow<F>,
    center: &DVector<f64>,
    radius: f64,
    grid_n: usize,
    tol: f64,
) -> Result<FlowboxChart<F>> {
    let n = sys.dim();
    if !(n == 3 || n == 4) {
        return Err(invalid("generic flowbox charts need a 2- or 3-dimensional section"));
    }
    let nf = normal_frame(sys, center)?;
    let normal = DVector::from_vec(nf.direction.clone());
    let mut frame = nf.basis.clone();
    let mut full = DMatrix::zeros(n, n);
    full.set_column(0, &normal);
    full.view_mut((0, 1), (n, n - 1)).copy_from(&frame);
    if full.determinant() < 0.0 {
        let last = frame.ncols() - 1;
        let c = -frame.column(last);
        frame.set_column(last, &c);
    }
    let field = sys.clone();
    let (p, e, nn) = (center.clone(), frame.clone(), normal.clone());
    let g = Arc::new(move |w: &[f64]| {
        let x = &p + &e * DVector::from_column_slice(w);
        field.field(&x).dot(&nn)
    });
    let moser = moser_solve_grid(g, n - 1, radius, grid_n, tol)?;
    Ok(FlowboxChart { sys: sys.clone(), center: center.clone(), radius, normal, frame, moser })
}

impl<F: VectorField + Clone> FlowboxChart<F> {
    fn section(&self, w: &[f64]) -> DVector<f64> {
        &self.center + &self.frame * DVector::from_vec(self.moser.apply(w))
    }
}

impl<F: VectorField + Clone> RectifyingChart for FlowboxChart<F> {
    type Point = DVector<f64>;

    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn lambda(&self) -> f64 {
        self.moser.lambda
    }

    fn phi(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.sys.flow(&self.section(&u[1..]), u[0] / self.moser.lambda)
    }

    fn phi_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let lam = self.moser.lambda;
        let (q, d) = self.sys.tangent_flow(&self.section(&u[1..]), u[0] / lam)?;
        let mut j = DMatrix::zeros(n, n);
        j.set_column(0, &(self.sys.field(&q) / lam));
        let cols = d * &self.frame * self.moser.jacobian(&u[1..]);
        j.view_mut((0, 1), (n, n - 1)).copy_from(&cols);
        Ok(j)
    }

    fn psi(&self, q: &DVector<f64>) -> Result<Option<Vec<f64>>> {
        let height = |y: &DVector<f64>| (y - &self.center).dot(&self.normal);
        let mut s = height(q) / self.sys.field(q).dot(&self.normal);
        let mut converged = false;
        for _ in 0..50 {
            let y = self.sys.flow(q, -s)?;
            let f = height(&y);
            let speed = self.sys.field(&y).dot(&self.normal);
            if !(speed.abs() > 1e-12) {
                return Err(Error::ChartInversion("field tangent to the section".into()));
            }
            let ds = f / speed;
            s += ds;
            if ds.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ChartInversion("section time did not converge".into()));
        }
        let x1 = s * self.moser.lambda;
        let y = self.sys.flow(q, -s)?;
        let wp = self.frame.transpose() * (&y - &self.center);
        if wp.norm() > self.radius * (1.0 + 1e-9) || x1.abs() > 1.0 {
            return Ok(None);
        }
        let w = self.moser.invert(wp.as_slice())?;
        let mut out = vec![x1];
        out.extend(w);
        Ok(Some(out))
    }
}

/// Sampled chart diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartReport {
    pub samples: usize,
    pub max_det_error: f64,
    pub max_round_trip_error: f64,
    pub max_rectification_error: f64,
    /// Extremes of the singular values of `DΦ`.
    pub min_stretch: f64,
    pub max_stretch: f64,
}

/// Uniform sample of `[-1, 1] × B_r` (or heights from `heights`).
pub fn sample_chart_domain(dim: usize, radius: f64, count: usize, heights: (f64, f64), seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut u = vec![rng.gen_range(heights.0..=heights.1)];
            loop {
                let w: Vec<f64> = (1..dim).map(|_| rng.gen_range(-radius..radius)).collect();
                if w.iter().map(|v| v * v).sum::<f64>() < radius * radius {
                    u.extend(w);
                    break;
                }
            }
            u
        })
        .collect()
}

/// Checks `det DΦ = 1`, `Ψ∘Φ = id` and `DΨ·X = λ·e₁` at sampled chart points.
pub fn verify_chart<C, S>(chart: &C, sys: &S, samples: &[Vec<f64>]) -> Result<ChartReport>
where
    C: RectifyingChart<Point = S::Point>,
    S: FlowSystem,
{
    let mut rep = ChartReport {
        samples: samples.len(),
        max_det_error: 0.0,
        max_round_trip_error: 0.0,
        max_rectification_error: 0.0,
        min_stretch: f64::INFINITY,
        max_stretch: 0.0,
    };
    for u in samples {
        let j = chart.phi_jacobian(u)?;
        rep.max_det_error = rep.max_det_error.max((j.determinant() - 1.0).abs());
        rep.min_stretch = rep.min_stretch.min(conorm(&j));
        rep.max_stretch = rep.max_stretch.max(op_norm(&j));
        let q = chart.phi(u)?;
        let back = chart.psi(&q)?.ok_or_else(|| Error::ChartInversion("image point left the chart domain".into()))?;
        let err = u.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rep.max_round_trip_error = rep.max_round_trip_error.max(err);
        let jinv = j.try_inverse().ok_or_else(|| Error::ChartInversion("singular chart Jacobian".into()))?;
        let mut t = jinv * sys.field(&q);
        t[0] -= chart.lambda();
        rep.max_rectification_error = rep.max_rectification_error.max(t.amax());
    }
    Ok(rep)
}

/// `det DΦ` by central differences through the system's local coordinates.
pub fn chart_det_fd<C, S>(chart: &C, sys: &S, u: &[f64], h: f64) -> Result<f64>
where
    C: RectifyingChart<Point = S::Point>,
    S: FlowSystem,
{
    let n = chart.dim();
    let base = chart.phi(u)?;
    let mut j = DMatrix::zeros(n, n);
    let mut x = u.to_vec();
    for c in 0..n {
        x[c] = u[c] + h;
        let plus = sys.difference(&base, &chart.phi(&x)?);
        x[c] = u[c] - h;
        let minus = sys.difference(&base, &chart.phi(&x)?);
        x[c] = u[c];
        j.set_column(c, &((plus - minus) / (2.0 * h)));
    }
    Ok(j.determinant())
}

/// Largest radius up to `r_max` (by bisection) at which sampled charts stay
/// injective and the stretch of `DΦ` stays within `[1/2, 2]`.
pub fn generic_max_radius<F: VectorField + Clone + 'static>(
    sys: &AnalyticFlow<F>,
    center: &DVector<f64>,
    r_max: f64,
    grid_n: usize,
    seed: u64,
) -> Result<f64> {
    let ok = |r: f64| -> bool {
        let Ok(chart) = build_chart(sys, center, r, grid_n, f64::INFINITY) else { return false };
        let pts = sample_chart_domain(sys.dim(), r, 24, (-1.0, 1.0), seed);
        match verify_chart(&chart, sys, &pts) {
            Ok(rep) => rep.max_round_trip_error < 1e-8 && rep.min_stretch >= 0.5 && rep.max_stretch <= 2.0,
            Err(_) => false,
        }
    };
    if ok(r_max) {
        return Ok(r_max);
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::NotInjective(hi));
    }
    Ok(lo)
}
