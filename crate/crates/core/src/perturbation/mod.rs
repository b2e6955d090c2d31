//! Local rotation perturbation of the suspension flow.
//!
//! Inside the flowbox `X^{[0,1]}(B_r(p))` the perturbed field is
//! `Y = (Ψ⁻¹)_*(∂/∂u₁ + Z)` with `Z` from [`ChartField`]; outside it equals `X`.
//! Points are tracked in section coordinates `(s, b)`: `q = X^s(b)` with `b`
//! on the section through `p` and `s ∈ [0, 1)`.

mod chart_field;
mod profiles;

pub use chart_field::{rotation, ChartField};
pub use profiles::{BumpProfiles, ProfileId};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flowbox::SuspensionChart;
use crate::linalg::op_norm;
use crate::model::{divergence_fd, CatSuspension, FlowSystem, PhasePoint};

fn default_profile() -> ProfileId {
    ProfileId::ExpSmooth
}

/// Serializable description of one rotation perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub p: PhasePoint,
    /// Orthonormal pair `(u₂, u₃)` spanning `V_p`, in `(x, y, z)` coordinates.
    #[serde(rename = "V_basis")]
    pub v_basis: [[f64; 3]; 2],
    pub r: f64,
    pub xi: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_profile")]
    pub profile_id: ProfileId,
}

impl PerturbationSpec {
    /// `V_p` spanned by the unstable eigendirection and the rotation axis.
    pub fn aligned(sys: &CatSuspension, p: PhasePoint, r: f64, xi: f64) -> Self {
        let u = sys.unstable_vector();
        PerturbationSpec {
            p,
            v_basis: [[u[0], u[1], 0.0], [0.0, 0.0, 1.0]],
            r,
            xi,
            epsilon: None,
            profile_id: ProfileId::ExpSmooth,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_profile(mut self, id: ProfileId) -> Self {
        self.profile_id = id;
        self
    }

    pub fn profiles(&self) -> BumpProfiles {
        BumpProfiles::new(self.profile_id)
    }

    /// `xi_bound` for the configured `ε`, if any.
    pub fn bound(&self) -> Result<Option<f64>> {
        self.epsilon.map(|e| xi_bound(&self.profiles(), self.r, e)).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.v_basis.map(Vector3::from);
        if (a.norm() - 1.0).abs() > 1e-12 || (b.norm() - 1.0).abs() > 1e-12 || a.dot(&b).abs() > 1e-12 {
            return Err(invalid("V_basis must be an orthonormal pair"));
        }
        if !(self.r > 0.0) || !self.xi.is_finite() {
            return Err(invalid("perturbation needs r > 0 and a finite xi"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(invalid("epsilon must be positive"));
            }
        }
        Ok(())
    }
}

/// Largest admissible rotation angle: `ε / (2·max(sup|α″|, 4·sup|α′|·sup|β′|/r))`.
pub fn xi_bound(profiles: &BumpProfiles, r: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !(r > 0.0) {
        return Err(invalid("xi_bound needs epsilon > 0 and r > 0"));
    }
    let shear = 4.0 * profiles.alpha_prime_max * profiles.beta_prime_max / r;
    Ok(epsilon / (2.0 * profiles.alpha_second_max.max(shear)))
}

/// The `ε` for which `ξ` is exactly `xi_bound(r, ε)`.
pub fn implied_epsilon(profiles: &BumpProfiles, r: f64, xi: f64) -> Result<f64> {
    if !(r > 0.0) || !(xi >= 0.0) {
        return Err(invalid("implied_epsilon needs r > 0 and xi >= 0"));
    }
    let shear = 4.0 * profiles.alpha_prime_max * profiles.beta_prime_max / r;
    Ok(2.0 * xi * profiles.alpha_second_max.max(shear))
}

/// One section-to-section step of the perturbed flow.
#[derive(Clone, Copy, Debug)]
pub struct SectionStep {
    pub base: [f64; 3],
    /// Linear Poincaré map on `(x, y, z)`.
    pub matrix: Matrix3<f64>,
    /// Transverse coordinates at entry when the step crosses the flowbox.
    pub entry: Option<Vector3<f64>>,
    /// Rotation angle applied on the plateau-equivalent radius of the entry.
    pub theta: f64,
}

/// Suspension flow with a rotation perturbation inside one flowbox.
#[derive(Clone, Debug)]
pub struct PerturbedField {
    base: CatSuspension,
    spec: PerturbationSpec,
    chart: SuspensionChart,
    z: ChartField,
    lift: Matrix3<f64>,
    lift_inv: Matrix3<f64>,
}

impl PerturbedField {
    pub fn new(base: &CatSuspension, spec: PerturbationSpec) -> Result<Self> {
        spec.validate()?;
        let [a, b] = spec.v_basis.map(Vector3::from);
        let frame = Matrix3::from_columns(&[a, b, a.cross(&b)]);
        let chart = SuspensionChart::with_frame(base, spec.p, spec.r, frame)?;
        let z = ChartField { profiles: spec.profiles(), r: spec.r, xi: spec.xi };
        let mut lift = Matrix3::identity();
        lift.fixed_view_mut::<2, 2>(0, 0).copy_from(&base.matrix());
        let lift_inv = lift.try_inverse().ok_or(Error::NonInvertibleRestriction)?;
        Ok(PerturbedField { base: base.clone(), spec, chart, z, lift, lift_inv })
    }

    pub fn base(&self) -> &CatSuspension {
        &self.base
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn chart(&self) -> &SuspensionChart {
        &self.chart
    }

    pub fn chart_field(&self) -> &ChartField {
        &self.z
    }

    /// Time-1 derivative of `X` on `(x, y, z)`.
    pub fn lift(&self) -> &Matrix3<f64> {
        &self.lift
    }

    /// Transverse frame `E` with columns `(u₂, u₃, u₄)`.
    pub fn frame(&self) -> &Matrix3<f64> {
        &self.chart.frame
    }

    /// Section coordinates `(s, b)` of `q`.
    pub fn to_section(&self, q: &PhasePoint) -> (f64, [f64; 3]) {
        let hp = self.spec.p.height;
        if q.height >= hp {
            (q.height - hp, q.base)
        } else {
            (q.height - hp + 1.0, self.base.inverse_map(q.base))
        }
    }

    pub fn from_section(&self, s: f64, b: [f64; 3]) -> PhasePoint {
        let h = self.spec.p.height + s;
        if h >= 1.0 {
            PhasePoint::new(self.base.map(b), h - 1.0)
        } else {
            PhasePoint::new(b, h)
        }
    }

    #[inline]
    fn crossings(&self, s: f64) -> bool {
        self.spec.p.height + s >= 1.0
    }

    /// Chart coordinates of `q` when it lies in `X^{[0,1)}(B_r(p))`.
    pub fn box_coords(&self, q: &PhasePoint) -> Option<Vector4<f64>> {
        let (s, b) = self.to_section(q);
        let w = self.chart.transverse(&b);
        (w.norm() < self.spec.r).then(|| Vector4::new(s, w[0], w[1], w[2]))
    }

    /// `Φ(u)` for chart coordinates with `u₁ ∈ [0, 1)`.
    pub fn chart_point(&self, u: &Vector4<f64>) -> PhasePoint {
        let d = self.chart.frame * Vector3::new(u[1], u[2], u[3]);
        let p = self.spec.p.base;
        self.from_section(u[0], [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
    }

    fn ambient_lift(&self, s: f64) -> Matrix4<f64> {
        let mut c = Matrix4::identity();
        if self.crossings(s) {
            c.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.lift);
        }
        c
    }

    fn ambient_lift_inv(&self, s: f64) -> Matrix4<f64> {
        let mut c = Matrix4::identity();
        if self.crossings(s) {
            c.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.lift_inv);
        }
        c
    }

    /// Chart-to-section derivative, conjugating a chart-coordinate operator
    /// into `(b, s)` coordinates.
    fn chart_to_section(&self, m: &Matrix4<f64>) -> Matrix4<f64> {
        let e = &self.chart.frame;
        let mww = m.fixed_view::<3, 3>(1, 1).into_owned();
        let mwu = m.fixed_view::<3, 1>(1, 0).into_owned();
        let muw = m.fixed_view::<1, 3>(0, 1).into_owned();
        let mut out = Matrix4::zeros();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(e * mww * e.transpose()));
        out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(e * mwu));
        out.fixed_view_mut::<1, 3>(3, 0).copy_from(&(muw * e.transpose()));
        out[(3, 3)] = m[(0, 0)];
        out
    }

    /// `Y − X` at `q` and its ambient derivative.
    pub fn difference_jet(&self, q: &PhasePoint) -> (Vector4<f64>, Matrix4<f64>) {
        match self.box_coords(q) {
            None => (Vector4::zeros(), Matrix4::zeros()),
            Some(u) => {
                let z = self.z.z(&u);
                let zs = self.chart_to_section_vec(&z, u[0]);
                let d = self.ambient_lift(u[0]) * self.chart_to_section(&self.z.dz(&u)) * self.ambient_lift_inv(u[0]);
                (zs, d)
            }
        }
    }

    fn chart_to_section_vec(&self, z: &Vector4<f64>, s: f64) -> Vector4<f64> {
        let dw = self.chart.frame * Vector3::new(z[1], z[2], z[3]);
        self.ambient_lift(s) * Vector4::new(dw[0], dw[1], dw[2], z[0])
    }

    /// Exact section-to-section step from a base point `b` on the section.
    ///
    /// The box transit is written as a displacement `b + E(w′ − w)` so that a
    /// zero angle reproduces the unperturbed step bit for bit.
    pub fn section_step(&self, b: &[f64; 3]) -> SectionStep {
        self.section_step_at(b, &self.chart.transverse(b))
    }

    /// [`Self::section_step`] with the transverse coordinates `w` of `b` given.
    pub fn section_step_at(&self, b: &[f64; 3], w: &Vector3<f64>) -> SectionStep {
        let w = *w;
        if w.norm_squared() >= self.spec.r * self.spec.r {
            return SectionStep { base: self.base.map(*b), matrix: self.lift, entry: None, theta: 0.0 };
        }
        let u = Vector4::new(0.0, w[0], w[1], w[2]);
        let (out, m) = self.z.transit_jacobian(&u, 1.0);
        let e = &self.chart.frame;
        let d = e * Vector3::new(out[1] - w[0], out[2] - w[1], out[3] - w[2]);
        let moved = [b[0] + d[0], b[1] + d[1], b[2] + d[2]];
        let g = m.fixed_view::<3, 3>(1, 1).into_owned() - Matrix3::identity();
        let inner = Matrix3::identity() + e * g * e.transpose();
        SectionStep {
            base: self.base.map(moved),
            matrix: self.lift * inner,
            entry: Some(w),
            theta: self.z.angle(w.norm(), 0.0, 1.0),
        }
    }

    /// Preimage of a section point under [`Self::section_step`].
    pub fn section_step_inverse(&self, b: &[f64; 3]) -> [f64; 3] {
        let prev = self.base.inverse_map(*b);
        let w1 = self.chart.transverse(&prev);
        if w1.norm() >= self.spec.r {
            return prev;
        }
        // The transit preserves |w|, so the angle is known from the exit point.
        let th = self.z.angle(w1.norm(), 0.0, 1.0);
        let v = rotation(-th, [w1[0], w1[1]]);
        let d = self.chart.frame * Vector3::new(v[0] - w1[0], v[1] - w1[1], 0.0);
        [prev[0] + d[0], prev[1] + d[1], prev[2] + d[2]]
    }

    /// Flow of `Y` for time `t`, optionally with the ambient derivative.
    fn advance(&self, q: &PhasePoint, t: f64, want_jac: bool) -> Result<(PhasePoint, Option<Matrix4<f64>>)> {
        if !t.is_finite() {
            return Err(invalid("flow time must be finite"));
        }
        let (mut s, mut b) = self.to_section(q);
        let s0 = s;
        let mut js = Matrix4::identity();
        let mut lift4 = Matrix4::identity();
        lift4.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.lift);
        let mut lift4_inv = Matrix4::identity();
        lift4_inv.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.lift_inv);
        let forward = t >= 0.0;
        let mut rem = t;
        while rem != 0.0 {
            if !forward && s <= 0.0 {
                b = self.base.inverse_map(b);
                s = 1.0;
                if want_jac {
                    js = lift4_inv * js;
                }
            }
            let (d, hits) = if forward {
                if rem >= 1.0 - s {
                    (1.0 - s, true)
                } else {
                    (rem, false)
                }
            } else if -rem >= s {
                (-s, true)
            } else {
                (rem, false)
            };
            let w = self.chart.transverse(&b);
            if w.norm() < self.spec.r {
                let u = Vector4::new(s, w[0], w[1], w[2]);
                let (out, m) = if want_jac {
                    self.z.transit_jacobian(&u, d)
                } else {
                    (self.z.transit(&u, d), Matrix4::identity())
                };
                let dw = self.chart.frame * Vector3::new(out[1] - w[0], out[2] - w[1], out[3] - w[2]);
                b = [b[0] + dw[0], b[1] + dw[1], b[2] + dw[2]];
                if want_jac {
                    js = self.chart_to_section(&m) * js;
                }
            }
            if hits {
                rem -= d;
                if forward {
                    b = self.base.map(b);
                    s = 0.0;
                    if want_jac {
                        js = lift4 * js;
                    }
                } else {
                    s = 0.0;
                }
                if rem.abs() < 1e-15 {
                    rem = 0.0;
                }
            } else {
                s += d;
                rem = 0.0;
            }
        }
        let out = self.from_section(s, b);
        let jac = want_jac.then(|| self.ambient_lift(s) * js * self.ambient_lift_inv(s0));
        Ok((out, jac))
    }
}

impl FlowSystem for PerturbedField {
    type Point = PhasePoint;

    fn dim(&self) -> usize {
        4
    }

    fn field(&self, q: &PhasePoint) -> DVector<f64> {
        let mut y = self.base.field(q);
        if let Some(u) = self.box_coords(q) {
            let d = self.chart_to_section_vec(&self.z.z(&u), u[0]);
            for i in 0..4 {
                y[i] += d[i];
            }
        }
        y
    }

    fn flow(&self, q: &PhasePoint, t: f64) -> Result<PhasePoint> {
        Ok(self.advance(q, t, false)?.0)
    }

    fn tangent_flow(&self, q: &PhasePoint, t: f64) -> Result<(PhasePoint, DMatrix<f64>)> {
        let (out, j) = self.advance(q, t, true)?;
        let j = j.expect("jacobian requested");
        Ok((out, DMatrix::from_fn(4, 4, |i, k| j[(i, k)])))
    }

    fn displace(&self, p: &PhasePoint, v: &DVector<f64>) -> PhasePoint {
        self.base.displace(p, v)
    }

    fn difference(&self, a: &PhasePoint, b: &PhasePoint) -> DVector<f64> {
        self.base.difference(a, b)
    }
}

/// Sampling and tolerance settings for [`verify_conditions`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub tol: f64,
    /// RK4 step for the variational integration.
    pub dt: f64,
    pub c1_samples: usize,
    pub support_samples: usize,
    pub divergence_samples: usize,
    pub divergence_tol: f64,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            tol: 1e-6,
            dt: 1e-4,
            c1_samples: 4000,
            support_samples: 4000,
            divergence_samples: 10_000,
            divergence_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub r: f64,
    pub xi: f64,
    pub epsilon: Option<f64>,
    pub xi_bound: Option<f64>,
    /// `P_Y^1(p)` on `(x, y, z)` from RK4 at `dt`.
    pub poincare_y: [[f64; 3]; 3],
    /// `‖P_Y^1(p)v − P_X^1(p)R_ξ v‖` for `v = u₂, u₃`.
    pub rotation_error: [f64; 2],
    /// Change of `P_Y^1(p)` when `dt` is halved.
    pub step_refinement: f64,
    /// Distance between the RK4 and closed-form transits.
    pub closed_form_error: f64,
    /// `‖P_Y^1(p)u₄ − P_X^1(p)u₄‖`.
    pub w_error: f64,
    /// `‖P_Y^1(p)u₄ − u₄‖`, the literal identity reading; informational.
    pub literal_identity_error: f64,
    pub c1_distance: f64,
    pub support_samples: usize,
    pub support_violations: usize,
    pub max_divergence: f64,
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
}

impl ConditionReport {
    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            return Err(Error::ConditionFailed {
                name: c.name.clone(),
                detail: format!("{:.3e} exceeds {:.3e}", c.value, c.threshold),
            });
        }
        Ok(self)
    }
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

/// Uniform sample of the open ball of radius `r` in three dimensions.
pub fn sample_ball(rng: &mut impl Rng, r: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm_squared() < 1.0 {
            return v * r;
        }
    }
}

impl PerturbedField {
    /// `P_Y^1(p)` on the normal space at `p` by RK4 variational integration
    /// through the chart.
    pub fn poincare_at_center_rk4(&self, dt: f64) -> Matrix3<f64> {
        let e = &self.chart.frame;
        self.lift * e * self.center_transport_rk4(dt) * e.transpose()
    }

    /// Time-1 transport of transverse vectors at `p` in chart coordinates.
    pub fn center_transport_rk4(&self, dt: f64) -> Matrix3<f64> {
        let (_, m) = self.z.transit_rk4(&Vector4::zeros(), 1.0, dt);
        m.fixed_view::<3, 3>(1, 1).into_owned()
    }

    /// `C¹` distance between `X` and `Y` sampled in the flowbox.
    pub fn c1_distance(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.spec.r;
        let pts: Vec<Vector4<f64>> = (0..samples)
            .map(|_| {
                let w = sample_ball(&mut rng, r);
                Vector4::new(rng.gen_range(0.0..1.0), w[0], w[1], w[2])
            })
            .collect();
        pts.par_iter()
            .map(|u| {
                let (d, j) = self.difference_jet(&self.chart_point(u));
                let jd = DMatrix::from_fn(4, 4, |i, k| j[(i, k)]);
                d.norm().max(op_norm(&jd))
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Checks the four perturbation conditions and the divergence of `Y`.
pub fn check_conditions(field: &PerturbedField, opts: &ConditionOptions) -> Result<ConditionReport> {
    let spec = field.spec();
    let e = *field.frame();
    let px = *field.lift();
    let py = field.poincare_at_center_rk4(opts.dt);
    let py_half = field.poincare_at_center_rk4(opts.dt / 2.0);
    let (_, jy) = field.tangent_flow(&spec.p, 1.0)?;
    let py_closed = Matrix3::from_fn(|i, k| jy[(i, k)]);

    // Compared in chart coordinates, v = E·e_k, so that ξ = 0 is exact.
    let m = field.center_transport_rk4(opts.dt);
    let (s, c) = spec.xi.sin_cos();
    let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let ek = |k: usize| Matrix3::<f64>::identity().column(k).into_owned();
    let rotation_error = [0, 1].map(|k| (px * e * (m * ek(k) - rot * ek(k))).norm());
    let w_error = (px * e * (m * ek(2) - ek(2))).norm();
    let literal_identity_error = (py * e.column(2) - e.column(2)).norm();
    let step_refinement = (py - py_half).norm();
    let closed_form_error = (py - py_closed).norm();

    let c1_distance = field.c1_distance(opts.c1_samples, opts.seed);
    let epsilon = spec.epsilon;
    let bound = spec.bound()?;

    // Support: points outside the box, many of them just outside its rim.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let r = spec.r;
    let mut outside = Vec::with_capacity(opts.support_samples);
    while outside.len() < opts.support_samples {
        let q = if outside.len() % 2 == 0 {
            PhasePoint::new([rng.gen(), rng.gen(), rng.gen()], rng.gen_range(0.0..1.0))
        } else {
            let dir = sample_ball(&mut rng, 1.0).normalize();
            let w = dir * r * rng.gen_range(1.0..1.5);
            field.chart_point(&Vector4::new(rng.gen_range(0.0..1.0), w[0], w[1], w[2]))
        };
        if field.box_coords(&q).is_none() {
            outside.push(q);
        }
    }
    let mut support_violations = 0;
    for q in &outside {
        let same_field = field.field(q) == field.base().field(q);
        // Until the next section crossing the orbit stays outside the box.
        let (sq, _) = field.to_section(q);
        let t = 0.5 * (1.0 - sq);
        let same_flow = field.flow(q, t)? == field.base().flow(q, t)?;
        if !(same_field && same_flow) {
            support_violations += 1;
        }
    }

    let div_pts: Vec<PhasePoint> = (0..opts.divergence_samples)
        .map(|_| {
            let w = sample_ball(&mut rng, r);
            field.chart_point(&Vector4::new(rng.gen_range(0.02..0.98), w[0], w[1], w[2]))
        })
        .collect();
    let h = 1e-4 * r;
    let max_divergence = div_pts.par_iter().map(|q| divergence_fd(field, q, h).abs()).reduce(|| 0.0, f64::max);

    let check = |name: &str, value: f64, threshold: f64| ConditionCheck {
        name: name.to_string(),
        value,
        threshold,
        passed: value <= threshold,
    };
    let mut checks = vec![
        check("rotation_u2", rotation_error[0], opts.tol),
        check("rotation_u3", rotation_error[1], opts.tol),
        check("identity_on_w", w_error, opts.tol),
        check("support", support_violations as f64, 0.0),
        check("divergence", max_divergence, opts.divergence_tol),
    ];
    if let Some(eps) = epsilon {
        checks.push(ConditionCheck { name: "c1_distance".into(), value: c1_distance, threshold: eps, passed: c1_distance < eps });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ConditionReport {
        r,
        xi: spec.xi,
        epsilon,
        xi_bound: bound,
        poincare_y: to_rows(&py),
        rotation_error,
        step_refinement,
        closed_form_error,
        w_error,
        literal_identity_error,
        c1_distance,
        support_samples: outside.len(),
        support_violations,
        max_divergence,
        checks,
        passed,
    })
}

/// [`check_conditions`], failing with [`Error::ConditionFailed`] on the first
/// violated condition.
pub fn verify_conditions(field: &PerturbedField, opts: &ConditionOptions) -> Result<ConditionReport> {
    check_conditions(field, opts)?.into_result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_cat_suspension;
    use crate::poincare::poincare_map;

    fn golden() -> CatSuspension {
        make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap()
    }

    fn p0() -> PhasePoint {
        PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0)
    }

    fn field(xi: f64, r: f64) -> PerturbedField {
        let sys = golden();
        PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), r, xi)).unwrap()
    }

    #[test]
    fn xi_bound_arithmetic() {
        let p = BumpProfiles::standard();
        let b = xi_bound(&p, 0.1, 0.01).unwrap();
        let expect = 0.01 / (2.0 * p.alpha_second_max.max(4.0 * 2.0 * 40.0));
        assert!((b - expect).abs() < 1e-12 * expect);
        let half = xi_bound(&p, 0.05, 0.01).unwrap();
        assert!((half - b / 2.0).abs() < 1e-15);
        assert!(xi_bound(&p, 0.1, 1e-9).unwrap() < 1e-9);
        let e = implied_epsilon(&p, 0.05, half).unwrap();
        assert!((e - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_angle_is_the_unperturbed_flow() {
        let f = field(0.0, 0.05);
        let sys = golden();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let w = sample_ball(&mut rng, 0.05);
            let q = f.chart_point(&Vector4::new(rng.gen_range(0.0..1.0), w[0], w[1], w[2]));
            assert_eq!(f.field(&q), sys.field(&q));
            let step = f.section_step(&f.chart.section_point(&[w[0], w[1], w[2]]).base);
            assert_eq!(step.matrix, f.lift * Matrix3::identity());
        }
        let b = p0().base;
        assert_eq!(f.section_step(&b).base, sys.map(b));
    }

    #[test]
    fn flow_matches_section_steps_and_group_law() {
        let f = field(0.3, 0.05);
        let mut b = f.chart.section_point(&[0.01, -0.02, 0.005]).base;
        let mut q = PhasePoint::new(b, 0.0);
        for _ in 0..5 {
            q = f.flow(&q, 1.0).unwrap();
            b = f.section_step(&b).base;
        }
        assert!(b.iter().zip(q.base).all(|(x, y)| (x - y).abs() < 1e-14));
        let start = f.chart_point(&Vector4::new(0.3, 0.02, 0.01, 0.0));
        let a = f.flow(&f.flow(&start, 0.45).unwrap(), 1.35).unwrap();
        let c = f.flow(&start, 1.8).unwrap();
        assert!(f.difference(&a, &c).norm() < 1e-13);
        let back = f.flow(&c, -1.8).unwrap();
        assert!(f.difference(&back, &start).norm() < 1e-13);
    }

    #[test]
    fn section_inverse_round_trip() {
        let f = field(0.3, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let w = sample_ball(&mut rng, 0.05);
            let b = f.chart.section_point(&[w[0], w[1], w[2]]).base;
            let img = f.section_step(&b).base;
            let back = f.section_step_inverse(&img);
            let d = f.chart.transverse(&back) - w;
            assert!(d.norm() < 1e-13);
        }
    }

    #[test]
    fn tangent_flow_matches_finite_differences() {
        let f = field(0.3, 0.05);
        let q = f.chart_point(&Vector4::new(0.2, 0.03, -0.01, 0.015));
        let (_, j) = f.tangent_flow(&q, 1.3).unwrap();
        let fd = crate::model::flow_jacobian_fd(&f, &q, 1.3, 1e-6).unwrap();
        let err = (&j - &fd).norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn rotation_identities_at_center() {
        let f = field(0.3, 0.05);
        let opts = ConditionOptions { c1_samples: 200, support_samples: 200, divergence_samples: 500, ..Default::default() };
        let rep = check_conditions(&f, &opts).unwrap();
        assert!(rep.rotation_error.iter().all(|&e| e < 1e-6), "{:?}", rep.rotation_error);
        assert!(rep.w_error < 1e-6);
        assert!(rep.step_refinement < 1e-10);
        assert!(rep.closed_form_error < 1e-10);
        assert_eq!(rep.support_violations, 0);
        assert!(rep.max_divergence < 1e-8, "{}", rep.max_divergence);
        let pm = poincare_map(&f, &p0(), 1.0).unwrap();
        let py = Matrix3::from(rep.poincare_y).transpose();
        assert!((Matrix3::from_fn(|i, k| pm.matrix[(i, k)]) - py).norm() < 1e-10);
    }

    #[test]
    fn zero_angle_conditions_hold_with_equality() {
        let f = field(0.0, 0.05);
        let opts = ConditionOptions { c1_samples: 100, support_samples: 100, divergence_samples: 100, ..Default::default() };
        let rep = check_conditions(&f, &opts).unwrap();
        assert_eq!(rep.rotation_error, [0.0, 0.0]);
        assert_eq!(rep.w_error, 0.0);
        assert_eq!(rep.c1_distance, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn c1_distance_grows_with_angle() {
        let mut last = -1.0;
        for xi in [0.0, 0.01, 0.05, 0.1, 0.3] {
            let d = field(xi, 0.05).c1_distance(300, 1);
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn bound_respected_and_violated() {
        let sys = golden();
        let eps = 0.01;
        let bound = xi_bound(&BumpProfiles::standard(), 0.05, eps).unwrap();
        let opts = ConditionOptions { c1_samples: 2000, support_samples: 100, divergence_samples: 100, ..Default::default() };
        let ok = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, bound).with_epsilon(eps)).unwrap();
        assert!(verify_conditions(&ok, &opts).is_ok());
        let bad = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, 1000.0 * bound).with_epsilon(eps)).unwrap();
        match verify_conditions(&bad, &opts) {
            Err(Error::ConditionFailed { name, .. }) => assert_eq!(name, "c1_distance"),
            other => panic!("expected a C¹ failure, got {other:?}"),
        }
    }

    #[test]
    fn spec_json_keys() {
        let sys = golden();
        let spec = PerturbationSpec::aligned(&sys, p0(), 0.05, 0.3).with_epsilon(0.01);
        let js = serde_json::to_value(&spec).unwrap();
        for k in ["p", "V_basis", "r", "xi", "epsilon", "profile_id"] {
            assert!(js.get(k).is_some(), "{k}");
        }
        let back: PerturbationSpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, spec);
    }
}
