//! The divergence-free rotation field `Z` in flowbox coordinates
//! `u = (u₁, w₁, w₂, w₃)`, with `V = span(w₁, w₂)` and `W = span(w₃)`.
//!
//! `Z = α′(u₁)·β_r(|w|)·ξ·(0, −w₂, w₁, 0)`. The flow of `∂/∂u₁ + Z` rotates
//! `w_V` by `ξ·β_r(|w|)·(α(s₁) − α(s₀))` and preserves `|w|`, so transits
//! have a closed form.

use nalgebra::{Matrix4, Vector4};

use super::profiles::BumpProfiles;

#[derive(Clone, Copy, Debug)]
pub struct ChartField {
    pub profiles: BumpProfiles,
    pub r: f64,
    pub xi: f64,
}

impl ChartField {
    #[inline]
    fn radial(&self, u: &Vector4<f64>) -> (f64, f64, f64) {
        let rho = (u[1] * u[1] + u[2] * u[2] + u[3] * u[3]).sqrt();
        let (b, db) = self.profiles.beta_r(rho, self.r);
        (rho, b, db)
    }

    pub fn z(&self, u: &Vector4<f64>) -> Vector4<f64> {
        let (_, b, _) = self.radial(u);
        let c = self.profiles.alpha_prime(u[0]) * b * self.xi;
        Vector4::new(0.0, -c * u[2], c * u[1], 0.0)
    }

    pub fn dz(&self, u: &Vector4<f64>) -> Matrix4<f64> {
        let (rho, b, db) = self.radial(u);
        let (a1, a2) = (self.profiles.alpha_prime(u[0]), self.profiles.alpha_second(u[0]));
        let xi = self.xi;
        let mut m = Matrix4::zeros();
        let g = if rho > 0.0 { db / rho } else { 0.0 };
        let (w1, w2, w3) = (u[1], u[2], u[3]);
        m[(1, 0)] = -a2 * xi * b * w2;
        m[(1, 1)] = -a1 * xi * g * w1 * w2;
        m[(1, 2)] = -a1 * xi * (b + g * w2 * w2);
        m[(1, 3)] = -a1 * xi * g * w2 * w3;
        m[(2, 0)] = a2 * xi * b * w1;
        m[(2, 1)] = a1 * xi * (b + g * w1 * w1);
        m[(2, 2)] = a1 * xi * g * w1 * w2;
        m[(2, 3)] = a1 * xi * g * w1 * w3;
        m
    }

    /// Generator `∂P/∂t ∘ P⁻¹` of the rotation family, acting on `V`.
    pub fn generator(&self, u: &Vector4<f64>) -> Matrix4<f64> {
        let (_, b, _) = self.radial(u);
        let c = self.profiles.alpha_prime(u[0]) * b * self.xi;
        let mut m = Matrix4::zeros();
        m[(1, 2)] = -c;
        m[(2, 1)] = c;
        m
    }

    /// Rotation angle accumulated between chart times `s0` and `s1` at radius `rho`.
    #[inline]
    pub fn angle(&self, rho: f64, s0: f64, s1: f64) -> f64 {
        self.xi * self.profiles.beta_r(rho, self.r).0 * (self.profiles.alpha(s1) - self.profiles.alpha(s0))
    }

    /// Exact time-`s` flow of `∂/∂u₁ + Z`.
    pub fn transit(&self, u: &Vector4<f64>, s: f64) -> Vector4<f64> {
        let (rho, _, _) = self.radial(u);
        let th = self.angle(rho, u[0], u[0] + s);
        let (sn, cs) = th.sin_cos();
        Vector4::new(u[0] + s, cs * u[1] - sn * u[2], sn * u[1] + cs * u[2], u[3])
    }

    /// Exact transit together with its Jacobian.
    pub fn transit_jacobian(&self, u: &Vector4<f64>, s: f64) -> (Vector4<f64>, Matrix4<f64>) {
        let (rho, b, db) = self.radial(u);
        let (s0, s1) = (u[0], u[0] + s);
        let da = self.profiles.alpha(s1) - self.profiles.alpha(s0);
        let th = self.xi * b * da;
        let (sn, cs) = th.sin_cos();
        let out = Vector4::new(s1, cs * u[1] - sn * u[2], sn * u[1] + cs * u[2], u[3]);
        // R_θ J w_V, the derivative of the rotated vector with respect to θ.
        let (jx, jy) = (-out[2], out[1]);
        let dth_du1 = self.xi * b * (self.profiles.alpha_prime(s1) - self.profiles.alpha_prime(s0));
        let g = if rho > 0.0 { self.xi * da * db / rho } else { 0.0 };
        let dth = [dth_du1, g * u[1], g * u[2], g * u[3]];
        let mut m = Matrix4::zeros();
        m[(0, 0)] = 1.0;
        m[(3, 3)] = 1.0;
        m[(1, 1)] = cs;
        m[(1, 2)] = -sn;
        m[(2, 1)] = sn;
        m[(2, 2)] = cs;
        for k in 0..4 {
            m[(1, k)] += jx * dth[k];
            m[(2, k)] += jy * dth[k];
        }
        (out, m)
    }

    /// RK4 integration of the state and the variational equation with step
    /// at most `dt`.
    pub fn transit_rk4(&self, u: &Vector4<f64>, s: f64, dt: f64) -> (Vector4<f64>, Matrix4<f64>) {
        let n = ((s.abs() / dt).ceil() as usize).max(1);
        let h = s / n as f64;
        let e1 = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let f = |x: &Vector4<f64>| e1 + self.z(x);
        let mut x = *u;
        let mut m = Matrix4::identity();
        for _ in 0..n {
            let k1 = f(&x);
            let l1 = self.dz(&x) * m;
            let x2 = x + k1 * (h / 2.0);
            let k2 = f(&x2);
            let l2 = self.dz(&x2) * (m + l1 * (h / 2.0));
            let x3 = x + k2 * (h / 2.0);
            let k3 = f(&x3);
            let l3 = self.dz(&x3) * (m + l2 * (h / 2.0));
            let x4 = x + k3 * h;
            let k4 = f(&x4);
            let l4 = self.dz(&x4) * (m + l3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            m += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
        }
        (x, m)
    }
}

/// Rotation by `theta` of a vector given in the `(u₂, u₃)` basis.
pub fn rotation(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::profiles::ProfileId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field() -> ChartField {
        ChartField { profiles: BumpProfiles::standard(), r: 0.05, xi: 0.3 }
    }

    fn random_box_point(rng: &mut ChaCha8Rng, r: f64) -> Vector4<f64> {
        loop {
            let w: [f64; 3] = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
            if w.iter().map(|v| v * v).sum::<f64>() < r * r {
                return Vector4::new(rng.gen_range(0.0..1.0), w[0], w[1], w[2]);
            }
        }
    }

    #[test]
    fn support_is_the_box() {
        let f = field();
        assert_eq!(f.z(&Vector4::new(-0.1, 0.01, 0.01, 0.0)), Vector4::zeros());
        assert_eq!(f.z(&Vector4::new(1.1, 0.01, 0.01, 0.0)), Vector4::zeros());
        assert_eq!(f.z(&Vector4::new(0.5, 0.04, 0.0, 0.04)), Vector4::zeros());
    }

    #[test]
    fn analytic_jacobian_and_divergence() {
        let f = field();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..200 {
            let u = random_box_point(&mut rng, f.r);
            let dz = f.dz(&u);
            assert!(dz.trace().abs() < 1e-15);
            for k in 0..4 {
                let mut e = Vector4::zeros();
                e[k] = h;
                let col = (f.z(&(u + e)) - f.z(&(u - e))) / (2.0 * h);
                assert!((col - dz.column(k)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn closed_form_matches_rk4() {
        let f = field();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut u = random_box_point(&mut rng, f.r);
            u[0] = 0.0;
            let (a, ma) = f.transit_jacobian(&u, 1.0);
            let (b, mb) = f.transit_rk4(&u, 1.0, 1e-3);
            assert!((a - b).norm() < 1e-10);
            assert!((ma - mb).norm() < 1e-7, "{}", (ma - mb).norm());
            assert!((ma.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn plateau_transport_is_the_rotation() {
        let f = field();
        let u = Vector4::new(0.0, 0.01, -0.005, 0.002);
        let (_, m) = f.transit_jacobian(&u, 1.0);
        let (s, c) = f.xi.sin_cos();
        assert!((m[(1, 1)] - c).abs() < 1e-15 && (m[(1, 2)] + s).abs() < 1e-15);
        assert!((m[(2, 1)] - s).abs() < 1e-15 && (m[(2, 2)] - c).abs() < 1e-15);
        assert_eq!(f.dz(&u).fixed_view::<2, 2>(1, 1), f.generator(&u).fixed_view::<2, 2>(1, 1));
    }

    #[test]
    fn rotation_group() {
        assert_eq!(rotation(0.0, [0.3, -0.2]), [0.3, -0.2]);
        let r = rotation(std::f64::consts::FRAC_PI_2, [1.0, 0.0]);
        assert!(r[0].abs() < 1e-16 && (r[1] - 1.0).abs() < 1e-16);
        let twice = rotation(0.3, rotation(0.3, [0.6, 0.8]));
        let once = rotation(0.6, [0.6, 0.8]);
        assert!((twice[0] - once[0]).abs() < 1e-12 && (twice[1] - once[1]).abs() < 1e-12);
    }

    #[test]
    fn null_profile_is_inert() {
        let f = ChartField { profiles: BumpProfiles::new(ProfileId::Null), r: 0.05, xi: 0.3 };
        let u = Vector4::new(0.5, 0.01, 0.0, 0.0);
        assert_eq!(f.z(&u), Vector4::zeros());
        assert_eq!(f.transit(&Vector4::new(0.0, 0.01, 0.02, 0.0), 1.0), Vector4::new(1.0, 0.01, 0.02, 0.0));
    }
}
