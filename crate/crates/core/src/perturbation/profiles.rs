//! Smooth step and plateau bump profiles with certified derivative bounds.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileId {
    /// `C^∞` step `S(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`.
    ExpSmooth,
    /// `C²` quintic step `6x⁵ − 15x⁴ + 10x³`.
    Quintic,
    /// Exp step for `α` with `β ≡ 0`; a control with no perturbation.
    Null,
}

/// `α` is the step, `β(t) = 1 − S(2|t| − 1)` the plateau bump; `β_r(t) = β(t/r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfiles {
    pub id: ProfileId,
    /// `sup |α′|`.
    pub alpha_prime_max: f64,
    /// `sup |α″|`.
    pub alpha_second_max: f64,
    /// `sup |β′|`.
    pub beta_prime_max: f64,
}

impl BumpProfiles {
    pub fn new(id: ProfileId) -> Self {
        let step_max = |k: usize| -> f64 {
            let n = 200_000;
            (1..n).map(|i| step(id, i as f64 / n as f64)[k].abs()).fold(0.0, f64::max)
        };
        let d1 = step_max(1);
        let d2 = step_max(2);
        BumpProfiles {
            id,
            alpha_prime_max: d1,
            alpha_second_max: d2,
            beta_prime_max: if id == ProfileId::Null { 0.0 } else { 2.0 * d1 },
        }
    }

    pub fn standard() -> Self {
        Self::new(ProfileId::ExpSmooth)
    }

    #[inline]
    pub fn alpha(&self, t: f64) -> f64 {
        step(self.id, t)[0]
    }

    #[inline]
    pub fn alpha_prime(&self, t: f64) -> f64 {
        step(self.id, t)[1]
    }

    #[inline]
    pub fn alpha_second(&self, t: f64) -> f64 {
        step(self.id, t)[2]
    }

    /// `(β, β′, β″)` at `t`.
    #[inline]
    pub fn beta_jet(&self, t: f64) -> [f64; 3] {
        if self.id == ProfileId::Null {
            return [0.0; 3];
        }
        let s = step(self.id, 2.0 * t.abs() - 1.0);
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        [1.0 - s[0], -2.0 * sign * s[1], -4.0 * s[2]]
    }

    #[inline]
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_jet(t)[0]
    }

    /// `(β_r, β_r′)` at `t`.
    #[inline]
    pub fn beta_r(&self, t: f64, r: f64) -> (f64, f64) {
        let j = self.beta_jet(t / r);
        (j[0], j[1] / r)
    }
}

/// Value and first two derivatives of the step at `x`.
#[inline]
fn step(id: ProfileId, x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    match id {
        ProfileId::Quintic => {
            let (x2, y) = (x * x, 1.0 - x);
            [x2 * x * (10.0 - 15.0 * x + 6.0 * x2), 30.0 * x2 * y * y, 60.0 * x * y * (1.0 - 2.0 * x)]
        }
        ProfileId::ExpSmooth | ProfileId::Null => {
            // S = σ(L) with L = 1/(1−x) − 1/x and σ the logistic function.
            let y = 1.0 - x;
            let l = 1.0 / y - 1.0 / x;
            let l1 = 1.0 / (y * y) + 1.0 / (x * x);
            let l2 = 2.0 / (y * y * y) - 2.0 / (x * x * x);
            let s = if l >= 0.0 { 1.0 / (1.0 + (-l).exp()) } else { let e = l.exp(); e / (1.0 + e) };
            let s1 = s * (1.0 - s);
            if s1 == 0.0 {
                return [s, 0.0, 0.0];
            }
            [s, s1 * l1, s1 * (1.0 - 2.0 * s) * l1 * l1 + s1 * l2]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_profile_bounds() {
        let p = BumpProfiles::standard();
        assert!((p.alpha_prime_max - 2.0).abs() < 1e-9);
        assert!((p.beta_prime_max - 4.0).abs() < 1e-9);
        assert!(p.alpha_second_max > 0.0 && p.alpha_second_max < 20.0);
    }

    #[test]
    fn step_and_plateau_shape() {
        for p in [BumpProfiles::standard(), BumpProfiles::new(ProfileId::Quintic)] {
            assert_eq!(p.alpha(-0.1), 0.0);
            assert_eq!(p.alpha(1.2), 1.0);
            assert!((p.alpha(0.5) - 0.5).abs() < 1e-15);
            assert_eq!(p.beta(0.4), 1.0);
            assert_eq!(p.beta(-0.5), 1.0);
            assert_eq!(p.beta(1.0), 0.0);
            for i in 0..1000 {
                let t = -0.2 + 1.4 * i as f64 / 1000.0;
                assert!(p.alpha_prime(t) >= 0.0 && p.alpha_prime(t) <= 2.0);
                assert!(p.beta_jet(t)[1].abs() <= 4.0 + 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for p in [BumpProfiles::standard(), BumpProfiles::new(ProfileId::Quintic)] {
            let h = 1e-6;
            for &t in &[0.13, 0.5, 0.77, 0.95] {
                let d = (p.alpha(t + h) - p.alpha(t - h)) / (2.0 * h);
                assert!((d - p.alpha_prime(t)).abs() < 1e-7);
                let d2 = (p.alpha_prime(t + h) - p.alpha_prime(t - h)) / (2.0 * h);
                assert!((d2 - p.alpha_second(t)).abs() < 1e-6);
                let b = (p.beta(0.5 + t / 2.0 + h) - p.beta(0.5 + t / 2.0 - h)) / (2.0 * h);
                assert!((b - p.beta_jet(0.5 + t / 2.0)[1]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn null_profile_has_no_bump() {
        let p = BumpProfiles::new(ProfileId::Null);
        assert_eq!(p.beta(0.0), 0.0);
        assert_eq!(p.beta_prime_max, 0.0);
    }
}
