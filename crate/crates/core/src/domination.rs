//! Sampled checks of dominated splittings and uniformly hyperbolic bundles
//! for the linear Poincaré flow.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{conorm, op_norm, qr_in_place};
use crate::model::{CatSuspension, FlowSystem, PhasePoint};
use crate::poincare::poincare_map;

/// Spacing between consecutive orbit samples.
const SAMPLE_SPACING: f64 = 0.754_877_666_246_692_7;

/// Invariant subbundles at a point, as column bases in normal-frame
/// coordinates, ordered from most expanding to most contracting.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub bundles: Vec<DMatrix<f64>>,
}

impl Splitting {
    fn orthonormal(&self) -> Result<Vec<DMatrix<f64>>> {
        self.bundles
            .iter()
            .map(|b| {
                let mut q = b.clone();
                let mut d = vec![0.0; q.ncols()];
                qr_in_place(&mut q, &mut d).map_err(|_| invalid("degenerate bundle basis"))?;
                Ok(q)
            })
            .collect()
    }
}

impl CatSuspension {
    /// Exact `(unstable, central, stable)` splitting; constant in the canonical frame.
    pub fn exact_splitting(&self) -> Splitting {
        let u = self.unstable_vector();
        let s = self.stable_vector();
        Splitting {
            bundles: vec![
                DMatrix::from_column_slice(3, 1, &[u[0], u[1], 0.0]),
                DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
                DMatrix::from_column_slice(3, 1, &[s[0], s[1], 0.0]),
            ],
        }
    }

    pub fn exact_splitting_at(&self, _p: &PhasePoint) -> Result<Splitting> {
        Ok(self.exact_splitting())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub i: usize,
    pub j: usize,
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub m: usize,
    pub pairs: Vec<PairRatio>,
    pub passed: bool,
    pub sample_count: usize,
}

/// Sample points `X^{s + k·spacing}(p)` with a seeded offset `s`.
pub fn orbit_samples<S: FlowSystem>(sys: &S, p: &S::Point, samples: usize, seed: u64) -> Result<Vec<S::Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = sys.flow(p, rng.gen::<f64>())?;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        out.push(q.clone());
        q = sys.flow(&q, SAMPLE_SPACING)?;
    }
    Ok(out)
}

pub fn check_domination<S, F>(sys: &S, splitting: F, p: &S::Point, m: usize, samples: usize, seed: u64) -> Result<DominationReport>
where
    S: FlowSystem,
    F: Fn(&S::Point) -> Result<Splitting> + Sync,
{
    if m == 0 || samples == 0 {
        return Err(invalid("m and samples must be positive"));
    }
    let points = orbit_samples(sys, p, samples, seed)?;
    let per_point: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let bundles = splitting(x)?.orthonormal()?;
            if bundles.len() < 2 {
                return Err(invalid("domination needs at least two bundles"));
            }
            let pm = poincare_map(sys, x, m as f64)?.matrix;
            bundles
                .windows(2)
                .map(|w| {
                    let weak = conorm(&(&pm * &w[0]));
                    if !(weak > 1e-300) {
                        return Err(Error::NonInvertibleRestriction);
                    }
                    Ok(op_norm(&(&pm * &w[1])) / weak)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let npairs = per_point[0].len();
    let pairs: Vec<PairRatio> = (0..npairs)
        .map(|k| PairRatio { i: k, j: k + 1, worst_ratio: per_point.iter().map(|r| r[k]).fold(0.0, f64::max) })
        .collect();
    let passed = pairs.iter().all(|p| p.worst_ratio <= 0.5);
    Ok(DominationReport { m, pairs, passed, sample_count: samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleMode {
    Expanding,
    Contracting,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicReport {
    pub mode: BundleMode,
    /// `sup ‖P^k u‖` when contracting, `inf ‖P^k u‖` when expanding.
    pub extremal_growth: f64,
    pub holds: bool,
}

/// Contracting: `‖P^k u‖ ≤ 1/2` for all unit `u`; expanding: `‖P^k u‖ ≥ 2`.
pub fn check_hyperbolic_bundle<S, F>(
    sys: &S,
    bundle: F,
    p: &S::Point,
    k: usize,
    mode: BundleMode,
    samples: usize,
    seed: u64,
) -> Result<HyperbolicReport>
where
    S: FlowSystem,
    F: Fn(&S::Point) -> Result<DMatrix<f64>> + Sync,
{
    if k == 0 || samples == 0 {
        return Err(invalid("k and samples must be positive"));
    }
    let points = orbit_samples(sys, p, samples, seed)?;
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let b = Splitting { bundles: vec![bundle(x)?] }.orthonormal()?.remove(0);
            let img = poincare_map(sys, x, k as f64)?.matrix * b;
            Ok(match mode {
                BundleMode::Contracting => op_norm(&img),
                BundleMode::Expanding => conorm(&img),
            })
        })
        .collect::<Result<_>>()?;
    let (extremal_growth, holds) = match mode {
        BundleMode::Contracting => {
            let v = values.iter().cloned().fold(0.0, f64::max);
            (v, v <= 0.5)
        }
        BundleMode::Expanding => {
            let v = values.iter().cloned().fold(f64::INFINITY, f64::min);
            (v, v >= 2.0)
        }
    };
    Ok(HyperbolicReport { mode, extremal_growth, holds })
}
