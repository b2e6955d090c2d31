//! Scalar comparison cocycle for the unstable growth of the perturbed flow.
//!
//! Along section-to-section steps the multiplier is `λ₊` outside the flowbox,
//! `λ₊·cos θ` on a box transit and `λ₊·A` on the step just before a box
//! entry, where `A` corrects for the tilt of the unstable direction left by
//! the previous transit.

mod run;

pub use run::{
    audit_from, audit_exponent_gap, merge_runs, run_ensemble, run_orbit, EnsembleSummary, Estimate, ExponentAudit,
    OrbitRun, RunSettings,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CatSuspension, PhasePoint};
use crate::perturbation::{BumpProfiles, PerturbedField};
use crate::poincare::poincare_map;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Outside,
    InsideForward,
    InsideBackward,
}

/// One flowbox-interacting step of an orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub run_id: u64,
    /// Step index (time) at which the step starts.
    pub t_enter: f64,
    pub regime: Regime,
    pub gamma: f64,
    pub tau: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
}

/// Time-`t` expansion factor of `P_X^t(q)` along the unstable direction.
pub fn unstable_multiplier(sys: &CatSuspension, q: &PhasePoint, t: f64) -> Result<f64> {
    let pm = poincare_map(sys, q, t)?;
    let eu = sys.unstable_vector();
    let u = nalgebra::DVector::from_vec(vec![eu[0], eu[1], 0.0]);
    let img = &pm.matrix * &u;
    let along = img.dot(&u);
    if (&img - &u * along).norm() > 1e-9 * img.norm() {
        return Err(Error::UnstableDirectionUnresolved);
    }
    Ok(along.abs())
}

/// Previous flowbox visit of a point just before the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnData {
    pub tau: f64,
    /// Point of `B_r(p)` with `Y^τ(q̃) = q`.
    pub tilde_q: PhasePoint,
    /// `Y^1(q̃)`, the exit of the box transit.
    pub hat_q: PhasePoint,
}

fn check_aligned(field: &PerturbedField) -> Result<()> {
    let eu = field.base().unstable_vector();
    let [a, b] = field.spec().v_basis;
    let ok_u = (a[0] * eu[0] + a[1] * eu[1]).abs() > 1.0 - 1e-12;
    let ok_c = b[2].abs() > 1.0 - 1e-12;
    if !(ok_u && ok_c) {
        return Err(invalid("comparison cocycle needs V_p spanned by the unstable and central directions"));
    }
    if !(field.spec().xi.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(invalid("rotation angle must satisfy |xi| < pi/2"));
    }
    Ok(())
}

/// Least `τ ≤ horizon` with `Y^τ(q̃) = q` for some `q̃ ∈ B_r(p)`.
///
/// `q` must lie on the disc `X^{-1}(B_r(p))`. Returns are integers because
/// `q` and `B_r(p)` sit on the same section.
pub fn return_time(field: &PerturbedField, q: &PhasePoint, horizon: usize) -> Result<Option<ReturnData>> {
    let hp = field.spec().p.height;
    let r = field.spec().r;
    if (q.height - hp).abs() > 1e-12 || field.chart().transverse(&field.base().map(q.base)).norm() >= r {
        return Err(invalid("return_time needs a point of X^{-1}(B_r(p))"));
    }
    let mut b = q.base;
    for tau in 1..=horizon {
        b = field.section_step_inverse(&b);
        if field.chart().transverse(&b).norm() < r {
            // Forward replay guards against drift of the inverse steps.
            let mut c = b;
            for _ in 0..tau {
                c = field.section_step(&c).base;
            }
            let err = field.chart().transverse(&c) - field.chart().transverse(&q.base);
            if err.norm() > 1e-9 {
                return Err(Error::Integrator(format!("return replay misses by {:.3e}", err.norm())));
            }
            let hat = field.section_step(&b).base;
            return Ok(Some(ReturnData {
                tau: tau as f64,
                tilde_q: PhasePoint::new(b, hp),
                hat_q: PhasePoint::new(hat, hp),
            }));
        }
    }
    Ok(None)
}

/// Correction factor at the end of one return cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionA {
    /// Projection ratio with the true transport through the box.
    pub a_def: f64,
    /// Projection ratio with the transport replaced by the rotation `R_θ`.
    pub a_rotation: f64,
    /// `1 − c·tan θ` with `c` the central tilt of the unstable direction.
    pub a_closed: f64,
    pub theta: f64,
    /// Entry point on the plateau `|w| ≤ r/2`, where all three agree.
    pub plateau: bool,
}

/// Unstable direction of `Y` at a section point, from `history` steps of
/// forward transport.
pub fn perturbed_unstable_direction(field: &PerturbedField, b: &[f64; 3], history: usize) -> Vector3<f64> {
    let mut path = vec![*b];
    for _ in 0..history {
        let prev = field.section_step_inverse(path.last().unwrap());
        path.push(prev);
    }
    let eu = field.base().unstable_vector();
    let mut v = Vector3::new(eu[0], eu[1], 0.0);
    for b in path.iter().skip(1).rev() {
        v = field.section_step(b).matrix * v;
        v /= v.norm();
    }
    v
}

/// `A` for the cycle starting at the box entry `q̃`; `1` without a return.
pub fn correction_a(field: &PerturbedField, ret: Option<&ReturnData>) -> Result<CorrectionA> {
    check_aligned(field)?;
    let Some(ret) = ret else {
        return Ok(CorrectionA { a_def: 1.0, a_rotation: 1.0, a_closed: 1.0, theta: 0.0, plateau: true });
    };
    let v = perturbed_unstable_direction(field, &ret.tilde_q.base, 40);
    let st = field.section_step(&ret.tilde_q.base);
    let w = st.entry.ok_or_else(|| invalid("q̃ is not in the flowbox"))?;
    cycle_factors(field, &v, &st.matrix, st.theta, w.norm())
}

pub(crate) fn cycle_factors(field: &PerturbedField, v: &Vector3<f64>, m: &Matrix3<f64>, theta: f64, rho: f64) -> Result<CorrectionA> {
    let eu = field.base().unstable_vector();
    let eu = Vector3::new(eu[0], eu[1], 0.0);
    let lu = field.base().lambda_u();
    let (vu, vc) = (v.dot(&eu), v[2]);
    let cos = theta.cos();
    let denom = (vu * lu * cos).abs();
    if denom < 1e-12 {
        return Err(Error::Singularity(denom));
    }
    let a_def = (m * v).dot(&eu).abs() / denom;
    let e = field.frame();
    let (s, c) = theta.sin_cos();
    let rot = field.lift() * e * Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0) * e.transpose();
    let a_rotation = (rot * v).dot(&eu).abs() / denom;
    // The central axis may be the negated third coordinate in the frame.
    let sign = e[(2, 1)].signum() * e.column(0).dot(&eu).signum();
    let a_closed = 1.0 - sign * (vc / vu) * theta.tan();
    Ok(CorrectionA { a_def, a_rotation, a_closed, theta, plateau: rho <= 0.5 * field.spec().r })
}

/// Normalized ball average `I(1)` of `log cos(ξ·β(|w|))` over the unit ball
/// of `R^d`; `I(r) = vol(B_r)·I(1)`.
pub fn i_integral(profiles: &BumpProfiles, xi: f64, d: usize) -> Result<f64> {
    if d == 0 || !(xi.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(invalid("I(1) needs d ≥ 1 and |xi| < pi/2"));
    }
    let f = |rho: f64| d as f64 * rho.powi(d as i32 - 1) * (xi * profiles.beta(rho)).cos().ln();
    // β ≡ 1 on [0, 1/2].
    let plateau = 0.5f64.powi(d as i32) * if profiles.beta(0.0) == 1.0 { xi.cos().ln() } else { 0.0 };
    let shell = |panels: usize| gauss_legendre(&f, 0.5, 1.0, panels);
    let (coarse, fine) = (shell(64), shell(128));
    if (coarse - fine).abs() > 1e-13 * fine.abs().max(1e-300) && (coarse - fine).abs() > 1e-16 {
        return Err(Error::Poisson(format!("I(1) quadrature did not converge: {coarse} vs {fine}")));
    }
    Ok(plateau + fine)
}

/// `vol(B_r)` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    use std::f64::consts::PI;
    let unit = match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            let mut v = [2.0, PI];
            for k in 3..=d {
                let next = v[0] * 2.0 * PI / k as f64;
                v = [v[1], next];
            }
            v[1]
        }
    };
    unit * r.powi(d as i32)
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            X.iter().zip(W).map(|(&x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_cat_suspension;
    use crate::perturbation::{PerturbationSpec, ProfileId};

    fn golden() -> CatSuspension {
        make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap()
    }

    fn field(xi: f64, r: f64) -> PerturbedField {
        let sys = golden();
        let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
        PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p, r, xi)).unwrap()
    }

    #[test]
    fn multiplier_is_the_eigenvalue() {
        let sys = golden();
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        let q = PhasePoint::new([0.3, 0.4, 0.5], 1e-9);
        assert!((unstable_multiplier(&sys, &q, 1.0).unwrap() - lu).abs() < 1e-12);
        let q = PhasePoint::new([0.3, 0.4, 0.5], 0.5);
        assert!((unstable_multiplier(&sys, &q, 1.0).unwrap() - lu).abs() < 1e-12);
        for t in [0.1, 0.4, 0.7, 0.99] {
            let a = unstable_multiplier(&sys, &q, t).unwrap();
            assert!((1.0 / lu..=lu).contains(&a));
        }
    }

    #[test]
    fn i_integral_properties() {
        let p = BumpProfiles::standard();
        let i = i_integral(&p, 0.3, 3).unwrap();
        assert!(i < 0.0 && i > 0.3f64.cos().ln());
        assert_eq!(i_integral(&BumpProfiles::new(ProfileId::Null), 0.3, 3).unwrap(), 0.0);
        let a = i_integral(&p, 1e-3, 3).unwrap() / 1e-6;
        let b = i_integral(&p, 2e-3, 3).unwrap() / 4e-6;
        assert!((a - b).abs() < 1e-5 * a.abs());
        // Small angles: −ξ²/2 times the ball average of β², which exceeds the plateau share.
        assert!(a < -0.5 * 0.125);
    }

    #[test]
    fn i_integral_matches_monte_carlo() {
        use rand::SeedableRng;
        let p = BumpProfiles::standard();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let w = crate::perturbation::sample_ball(&mut rng, 1.0);
                (0.3 * p.beta(w.norm())).cos().ln()
            })
            .sum::<f64>()
            / n as f64;
        let i = i_integral(&p, 0.3, 3).unwrap();
        assert!((mean - i).abs() < 2e-4, "{mean} {i}");
    }

    #[test]
    fn ball_volumes() {
        use std::f64::consts::PI;
        assert!((ball_volume(3, 2.0) - 32.0 * PI / 3.0).abs() < 1e-12);
        assert!((ball_volume(4, 1.0) - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn return_time_finds_previous_visit() {
        let f = field(0.3, 0.05);
        let mut b = f.chart().section_point(&[0.01, 0.0, -0.01]).base;
        let mut found = 0;
        for _ in 0..200_000 {
            let next = f.section_step(&b).base;
            if f.chart().transverse(&next).norm() < 0.05 {
                let q = PhasePoint::new(b, 0.0);
                let ret = return_time(&f, &q, 100_000).unwrap().unwrap();
                let mut c = ret.tilde_q.base;
                for _ in 0..ret.tau as usize {
                    c = f.section_step(&c).base;
                }
                let d = f.chart().transverse(&c) - f.chart().transverse(&b);
                assert!(d.norm() < 1e-9);
                // Y^τ(q̃) = q lies in X^{[-1,0)}(B_r).
                assert!(f.chart().transverse(&f.base().map(c)).norm() < 0.05);
                found += 1;
                if found == 3 {
                    break;
                }
            }
            b = next;
        }
        assert_eq!(found, 3);
    }

    #[test]
    fn correction_factors() {
        let f0 = field(0.0, 0.05);
        let q = PhasePoint::new(f0.chart().section_point(&[0.0, 0.0, 0.0]).base, 0.0);
        let ret = ReturnData { tau: 10.0, tilde_q: q, hat_q: q };
        let a = correction_a(&f0, Some(&ret)).unwrap();
        assert_eq!((a.a_def, a.a_closed), (1.0, 1.0));
        let f = field(0.3, 0.05);
        assert_eq!(correction_a(&f, None).unwrap().a_def, 1.0);
        let mut b = f.chart().section_point(&[0.005, 0.01, 0.0]).base;
        let mut checked = 0;
        for _ in 0..100_000 {
            if f.chart().transverse(&b).norm() < 0.05 {
                let st = f.section_step(&b);
                let ret = ReturnData { tau: 1.0, tilde_q: PhasePoint::new(b, 0.0), hat_q: PhasePoint::new(st.base, 0.0) };
                let a = correction_a(&f, Some(&ret)).unwrap();
                assert!((a.a_rotation - a.a_closed).abs() < 1e-8);
                if a.plateau {
                    assert!((a.a_def - a.a_closed).abs() < 1e-8);
                }
                checked += 1;
            }
            b = f.section_step(&b).base;
        }
        assert!(checked > 10);
    }

    #[test]
    fn domination_transfer() {
        let sys = golden();
        let lu = sys.lambda_u();
        let sigma = 1.0 / lu;
        for t in 1..=20 {
            let a = sys.base_derivative_power(t).unwrap();
            let eu = sys.unstable_vector();
            let grow_u = (a * eu).norm();
            let grow_c = 1.0;
            assert!(grow_c <= (1.0 + 1e-9) * sigma.powi(t as i32) * grow_u);
        }
    }
}
