//! Lyapunov spectrum of the linear Poincaré flow by repeated QR
//! re-orthonormalization, with batch-means error bars and multiplicity
//! clustering.

mod birkhoff;
pub mod stats;

pub use birkhoff::{birkhoff_average, central_sum, BirkhoffEstimate, CentralSum};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::qr_in_place;
use crate::model::FlowSystem;
use crate::poincare::{normal_frame, poincare_step, NormalFrame};
use stats::{BatchMeans, DEFAULT_BLOCKS, MIN_BLOCKS};

/// Floor applied to standard errors so that exactly constant averages still
/// carry a roundoff-sized error bar.
pub const STDERR_FLOOR: f64 = 16.0 * f64::EPSILON;

/// A discrete linear cocycle over some orbit.
pub trait Cocycle {
    fn dim(&self) -> usize;
    /// Writes the next step matrix into `m` and advances the base point.
    fn advance(&mut self, m: &mut DMatrix<f64>) -> Result<()>;
}

/// Time-`dt` linear Poincaré maps along the orbit of a flow.
pub struct OrbitCocycle<'a, S: FlowSystem> {
    sys: &'a S,
    frame: NormalFrame<S::Point>,
    dt: f64,
}

impl<'a, S: FlowSystem> OrbitCocycle<'a, S> {
    pub fn new(sys: &'a S, p: &S::Point, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        Ok(OrbitCocycle { sys, frame: normal_frame(sys, p)?, dt })
    }

    pub fn point(&self) -> &S::Point {
        &self.frame.at
    }
}

impl<S: FlowSystem> Cocycle for OrbitCocycle<'_, S> {
    fn dim(&self) -> usize {
        self.frame.rank()
    }

    fn advance(&mut self, m: &mut DMatrix<f64>) -> Result<()> {
        let step = poincare_step(self.sys, &self.frame, self.dt)?;
        m.copy_from(&step.matrix);
        self.frame = step.to;
        Ok(())
    }
}

/// Lyapunov spectrum estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Per-direction exponents in QR order.
    pub raw: Vec<f64>,
    pub raw_stderr: Vec<f64>,
    /// Distinct exponents after clustering, in decreasing order.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub stderr: Vec<f64>,
    pub horizon: f64,
    /// `(1/T) log |det|` of the accumulated cocycle.
    pub log_det_rate: f64,
    pub blocks: usize,
}

/// Dimensions of the unstable, central and stable blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDims {
    pub unstable: usize,
    pub central: usize,
    pub stable: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSums {
    pub unstable: f64,
    pub central: f64,
    pub stable: f64,
    pub dims: SplitDims,
}

impl SpectrumEstimate {
    /// Sum of exponents weighted by multiplicity.
    pub fn total(&self) -> f64 {
        self.exponents.iter().zip(&self.multiplicities).map(|(l, &m)| l * m as f64).sum()
    }

    /// Default splitting: with three or more clusters the first is unstable,
    /// the last stable and the rest central; otherwise exponents within
    /// `3·stderr` of zero are central.
    pub fn default_dims(&self) -> SplitDims {
        let n = self.raw.len();
        if self.exponents.len() >= 3 {
            let u = self.multiplicities[0];
            let s = *self.multiplicities.last().unwrap();
            return SplitDims { unstable: u, central: n - u - s, stable: s };
        }
        let mut dims = SplitDims { unstable: 0, central: 0, stable: 0 };
        for ((l, &m), se) in self.exponents.iter().zip(&self.multiplicities).zip(&self.stderr) {
            if l.abs() <= 3.0 * se {
                dims.central += m;
            } else if *l > 0.0 {
                dims.unstable += m;
            } else {
                dims.stable += m;
            }
        }
        dims
    }

    pub fn sums(&self, dims: Option<SplitDims>) -> Result<ExponentSums> {
        let dims = dims.unwrap_or_else(|| self.default_dims());
        if dims.unstable + dims.central + dims.stable != self.raw.len() {
            return Err(invalid("split dimensions do not add up to the normal rank"));
        }
        let mut sorted = self.raw.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let u: f64 = sorted[..dims.unstable].iter().sum();
        let c: f64 = sorted[dims.unstable..dims.unstable + dims.central].iter().sum();
        let s: f64 = sorted[dims.unstable + dims.central..].iter().sum();
        Ok(ExponentSums { unstable: u, central: c, stable: s, dims })
    }
}

/// Collects per-step `log R_ii` and `log |det|` into batch means.
#[derive(Clone, Debug)]
pub struct ExponentAccumulator {
    dt: f64,
    batches: Vec<BatchMeans>,
    log_det: f64,
}

impl ExponentAccumulator {
    pub fn new(dim: usize, total_steps: usize, dt: f64) -> Self {
        let nblocks = DEFAULT_BLOCKS.min(total_steps.max(1));
        ExponentAccumulator { dt, batches: (0..dim).map(|_| BatchMeans::new(total_steps, nblocks)).collect(), log_det: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, log_r: &[f64], log_det: f64) {
        for (b, &v) in self.batches.iter_mut().zip(log_r) {
            b.push(v);
        }
        self.log_det += log_det;
    }

    pub fn steps(&self) -> usize {
        self.batches.first().map_or(0, |b| b.steps())
    }

    pub fn finish(&self) -> Result<SpectrumEstimate> {
        let steps = self.steps();
        if steps == 0 {
            return Err(invalid("no steps accumulated"));
        }
        let horizon = steps as f64 * self.dt;
        let raw: Vec<f64> = self.batches.iter().map(|b| b.mean() / self.dt).collect();
        let blocks = self.batches[0].batch_means().len();
        let raw_stderr: Vec<f64> = self
            .batches
            .iter()
            .map(|b| if blocks >= MIN_BLOCKS { (b.stderr() / self.dt).max(STDERR_FLOOR) } else { f64::INFINITY })
            .collect();
        let (exponents, multiplicities, stderr) = cluster(&raw, &raw_stderr);
        Ok(SpectrumEstimate {
            raw,
            raw_stderr,
            exponents,
            multiplicities,
            stderr,
            horizon,
            log_det_rate: self.log_det / horizon,
            blocks,
        })
    }
}

/// Groups exponents separated by gaps smaller than half the largest gap or
/// statistically indistinguishable from zero.
pub fn cluster(raw: &[f64], raw_stderr: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..raw.len()).collect();
    idx.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let gaps: Vec<f64> = idx.windows(2).map(|w| raw[w[0]] - raw[w[1]]).collect();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    let mut groups: Vec<Vec<usize>> = vec![];
    let mut current = vec![];
    for (k, &i) in idx.iter().enumerate() {
        current.push(i);
        if k < gaps.len() {
            let j = idx[k + 1];
            let g = gaps[k];
            if g > 0.5 * max_gap && g > 3.0 * (raw_stderr[i] + raw_stderr[j]) {
                groups.push(std::mem::take(&mut current));
            }
        }
    }
    groups.push(current);
    let mut values = vec![];
    let mut mult = vec![];
    let mut errs = vec![];
    for g in groups {
        let m = g.len() as f64;
        values.push(g.iter().map(|&i| raw[i]).sum::<f64>() / m);
        mult.push(g.len());
        errs.push((g.iter().map(|&i| raw_stderr[i].powi(2)).sum::<f64>()).sqrt() / m);
    }
    (values, mult, errs)
}

/// Random orthonormal `n x n` frame drawn from `seed`.
pub fn random_frame(n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut diag = vec![0.0; n];
    qr_in_place(&mut q, &mut diag)?;
    Ok(q)
}

/// QR spectrum of an arbitrary cocycle over `steps` steps of length `dt`.
pub fn qr_spectrum_of<C: Cocycle>(cocycle: &mut C, steps: usize, dt: f64, seed: u64) -> Result<SpectrumEstimate> {
    let n = cocycle.dim();
    let mut q = random_frame(n, seed)?;
    let mut m = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut diag = vec![0.0; n];
    let mut logs = vec![0.0; n];
    let mut acc = ExponentAccumulator::new(n, steps, dt);
    for _ in 0..steps {
        cocycle.advance(&mut m)?;
        b.gemm(1.0, &m, &q, 0.0);
        qr_in_place(&mut b, &mut diag)?;
        std::mem::swap(&mut q, &mut b);
        for (l, d) in logs.iter_mut().zip(&diag) {
            *l = d.ln();
        }
        acc.push(&logs, m.determinant().abs().ln());
    }
    acc.finish()
}

/// QR spectrum of the linear Poincaré flow along the orbit of `p`.
///
/// Fails with [`Error::HorizonTooShort`] when an error bar exceeds the
/// smallest gap between distinct exponents.
pub fn qr_spectrum<S: FlowSystem>(sys: &S, p: &S::Point, horizon: f64, dt: f64, seed: u64) -> Result<SpectrumEstimate> {
    if !(horizon >= dt) {
        return Err(invalid("horizon must be at least one step"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut cocycle = OrbitCocycle::new(sys, p, dt)?;
    let est = qr_spectrum_of(&mut cocycle, steps, dt, seed)?;
    check_resolution(&est)?;
    Ok(est)
}

pub fn check_resolution(est: &SpectrumEstimate) -> Result<()> {
    if est.exponents.len() < 2 {
        return Ok(());
    }
    let gap = est.exponents.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let stderr = est.stderr.iter().cloned().fold(0.0, f64::max);
    if stderr > gap {
        return Err(Error::HorizonTooShort { stderr, gap });
    }
    Ok(())
}
