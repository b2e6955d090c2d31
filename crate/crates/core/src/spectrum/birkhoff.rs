use serde::{Deserialize, Serialize};

use super::stats::block_bootstrap;
use super::{qr_spectrum, SpectrumEstimate, SplitDims};
use crate::error::{invalid, Error, Result};
use crate::model::FlowSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub horizon: f64,
}

/// Time average of `observable` along the orbit of `p` by the composite
/// trapezoid rule with step `dt`; the error bar is a block bootstrap.
pub fn birkhoff_average<S, F>(sys: &S, p: &S::Point, observable: F, horizon: f64, dt: f64, seed: u64) -> Result<BirkhoffEstimate>
where
    S: FlowSystem,
    F: Fn(&S::Point) -> f64,
{
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(invalid("need 0 < dt <= horizon"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut q = p.clone();
    let mut prev = observable(&q);
    let mut series = Vec::with_capacity(steps);
    for _ in 0..steps {
        q = sys.flow(&q, dt)?;
        let next = observable(&q);
        series.push(0.5 * (prev + next));
        prev = next;
    }
    let block = (steps as f64).sqrt().ceil() as usize;
    let est = block_bootstrap(&series, block, 200, seed);
    Ok(BirkhoffEstimate { mean: est.mean, stderr: est.stderr, horizon: steps as f64 * dt })
}

/// Central exponent sum computed directly from the central QR directions and
/// as the complement `-(Σ^u + Σ^s)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CentralSum {
    pub direct: f64,
    pub complement: f64,
    pub stderr: f64,
    pub dims: SplitDims,
    pub spectrum: SpectrumEstimate,
}

/// The central block is the contiguous window of `central_dim` exponents
/// with the smallest total magnitude.
pub fn central_sum_of(est: SpectrumEstimate, central_dim: usize) -> Result<CentralSum> {
    let n = est.raw.len();
    if central_dim == 0 || central_dim > n {
        return Err(Error::CentralBlockUnresolved(format!("central dimension {central_dim} with normal rank {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| est.raw[b].total_cmp(&est.raw[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| est.raw[i]).collect();
    let errs: Vec<f64> = order.iter().map(|&i| est.raw_stderr[i]).collect();
    let start = (0..=n - central_dim)
        .min_by(|&a, &b| {
            let sa: f64 = sorted[a..a + central_dim].iter().map(|x| x.abs()).sum();
            let sb: f64 = sorted[b..b + central_dim].iter().map(|x| x.abs()).sum();
            sa.total_cmp(&sb)
        })
        .unwrap();
    let dims = SplitDims { unstable: start, central: central_dim, stable: n - start - central_dim };
    let (direct, complement) = if central_dim == n {
        (est.log_det_rate, est.log_det_rate)
    } else {
        let c: f64 = sorted[start..start + central_dim].iter().sum();
        let rest: f64 = sorted[..start].iter().chain(&sorted[start + central_dim..]).sum();
        (c, -rest)
    };
    let stderr = errs[start..start + central_dim].iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(CentralSum { direct, complement, stderr, dims, spectrum: est })
}

pub fn central_sum<S: FlowSystem>(
    sys: &S,
    p: &S::Point,
    horizon: f64,
    dt: f64,
    central_dim: usize,
    seed: u64,
) -> Result<CentralSum> {
    central_sum_of(qr_spectrum(sys, p, horizon, dt, seed)?, central_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_cat_suspension, PhasePoint};

    fn setup() -> (crate::model::CatSuspension, PhasePoint) {
        (make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap(), PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0))
    }

    #[test]
    fn constant_observable() {
        let (sys, p) = setup();
        let est = birkhoff_average(&sys, &p, |_| 0.75, 1e3, 0.5, 1).unwrap();
        assert!((est.mean - 0.75).abs() < 1e-15);
    }

    #[test]
    fn central_sum_vanishes_for_the_suspension() {
        let (sys, p) = setup();
        let cs = central_sum(&sys, &p, 1e4, 1.0, 1, 2).unwrap();
        assert_eq!(cs.dims, SplitDims { unstable: 1, central: 1, stable: 1 });
        assert!(cs.direct.abs() < 1e-3);
        assert!((cs.complement - cs.direct).abs() < 1e-10);
    }

    #[test]
    fn whole_normal_bundle_gives_log_det_rate() {
        let (sys, p) = setup();
        let cs = central_sum(&sys, &p, 1e3, 1.0, 3, 2).unwrap();
        assert!(cs.direct.abs() < 1e-12);
        assert!(central_sum(&sys, &p, 1e3, 1.0, 4, 2).is_err());
    }
}
