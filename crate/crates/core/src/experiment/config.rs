use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comparison::RunSettings;
use crate::error::{invalid, Result};
use crate::flowbox::suspension_max_radius;
use crate::model::{CatSuspension, PhasePoint, SystemSpec};
use crate::perturbation::{xi_bound, BumpProfiles, PerturbationSpec, ProfileId};

/// How the rotation angle is chosen for each radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum XiPolicy {
    Fixed { value: f64 },
    /// `xi_bound(r, ε)` for the configured `ε`.
    Auto,
}

/// Extra sweep axes; empty lists fall back to the main settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub xi: Vec<f64>,
    pub horizons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    /// Perturbation point; for the ABC flow its base coordinates are used.
    pub p: PhasePoint,
    pub r: Vec<f64>,
    pub xi: XiPolicy,
    pub epsilon: Option<f64>,
    /// Time horizon `T` of each orbit.
    pub horizon: f64,
    /// Step of the generic spectrum driver.
    pub dt: f64,
    pub orbits: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub profile: ProfileId,
    /// Write per-visit comparison records next to the results.
    pub records: bool,
    pub output: Option<PathBuf>,
    pub sweep: SweepAxes,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemSpec::golden(),
            p: PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0),
            r: vec![0.05],
            xi: XiPolicy::Fixed { value: 0.3 },
            epsilon: None,
            horizon: 1e6,
            dt: 1.0,
            orbits: 64,
            burn_in: 1000,
            seed: 1,
            profile: ProfileId::ExpSmooth,
            records: true,
            output: None,
            sweep: SweepAxes::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 1e3) || !self.horizon.is_finite() {
            return Err(invalid("horizon T must be at least 1e3"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt must be positive"));
        }
        if self.orbits == 0 {
            return Err(invalid("at least one orbit is needed"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(invalid("epsilon must be positive"));
            }
        }
        if self.xi == XiPolicy::Auto && self.epsilon.is_none() {
            return Err(invalid("the auto xi policy needs epsilon"));
        }
        if self.sweep.horizons.iter().any(|&t| !(t >= 1e3)) {
            return Err(invalid("sweep horizons must be at least 1e3"));
        }
        if let SystemSpec::CatSuspension { .. } = self.system {
            let sys = self.suspension()?;
            let r0 = suspension_max_radius(&sys, &self.p);
            if self.r.is_empty() || self.r.iter().any(|&r| !(r > 0.0 && r <= r0)) {
                return Err(invalid(format!("radii must lie in (0, {r0:.4}]")));
            }
        }
        Ok(())
    }

    pub fn suspension(&self) -> Result<CatSuspension> {
        self.system.cat_suspension()
    }

    pub fn xi_for(&self, r: f64) -> Result<f64> {
        match self.xi {
            XiPolicy::Fixed { value } => Ok(value),
            XiPolicy::Auto => xi_bound(&BumpProfiles::new(self.profile), r, self.epsilon.unwrap_or(0.0)),
        }
    }

    pub fn spec_for(&self, sys: &CatSuspension, r: f64, xi: f64) -> PerturbationSpec {
        let mut spec = PerturbationSpec::aligned(sys, self.p, r, xi).with_profile(self.profile);
        spec.epsilon = self.epsilon;
        spec
    }

    pub fn run_settings(&self, horizon: f64, keep_records: bool) -> RunSettings {
        RunSettings { steps: horizon.round() as usize, burn_in: self.burn_in, keep_records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.xi_for(0.05).unwrap(), 0.3);
        assert_eq!(cfg.run_settings(1e6, false).steps, 1_000_000);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = [
            ExperimentConfig { horizon: 999.0, ..Default::default() },
            ExperimentConfig { epsilon: Some(0.0), ..Default::default() },
            ExperimentConfig { r: vec![0.5], ..Default::default() },
            ExperimentConfig { r: vec![], ..Default::default() },
            ExperimentConfig { xi: XiPolicy::Auto, ..Default::default() },
            ExperimentConfig { orbits: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn auto_policy_uses_the_bound() {
        let cfg = ExperimentConfig { xi: XiPolicy::Auto, epsilon: Some(0.01), ..Default::default() };
        let b = xi_bound(&BumpProfiles::standard(), 0.05, 0.01).unwrap();
        assert_eq!(cfg.xi_for(0.05).unwrap(), b);
    }

    #[test]
    fn json_round_trip_and_partial_documents() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"r": [0.1], "xi": {"policy": "auto"}, "epsilon": 0.02}"#).unwrap();
        assert_eq!(cfg.r, vec![0.1]);
        assert_eq!(cfg.orbits, 64);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"radius": 0.1}"#).is_err());
    }
}
