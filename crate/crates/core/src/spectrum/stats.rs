//! Batch-means and block-bootstrap error estimates for time averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of batches used for standard errors.
pub const DEFAULT_BLOCKS: usize = 32;
/// Minimum number of batches accepted for an error estimate.
pub const MIN_BLOCKS: usize = 20;

/// Running sums of a per-step quantity split into contiguous batches.
#[derive(Clone, Debug)]
pub struct BatchMeans {
    block_len: usize,
    nblocks: usize,
    sums: Vec<f64>,
    counts: Vec<usize>,
    step: usize,
    cur: usize,
}

impl BatchMeans {
    pub fn new(total_steps: usize, nblocks: usize) -> Self {
        let nblocks = nblocks.clamp(1, total_steps.max(1));
        BatchMeans {
            block_len: (total_steps / nblocks).max(1),
            nblocks,
            sums: vec![0.0; nblocks],
            counts: vec![0; nblocks],
            step: 0,
            cur: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, value: f64) {
        if self.counts[self.cur] == self.block_len && self.cur + 1 < self.nblocks {
            self.cur += 1;
        }
        self.sums[self.cur] += value;
        self.counts[self.cur] += 1;
        self.step += 1;
    }

    /// Adds `value` to the batch holding the most recent step.
    #[inline]
    pub fn add_to_current(&mut self, value: f64) {
        self.sums[self.cur] += value;
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn total(&self) -> f64 {
        self.sums.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.total() / self.step as f64
        }
    }

    /// Per-batch means of the filled batches.
    pub fn batch_means(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect()
    }

    /// Standard error of the mean from the spread of batch means.
    pub fn stderr(&self) -> f64 {
        stderr_of_means(&self.batch_means())
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation divided by sqrt(len).
pub fn stderr_of_means(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Mean and standard error of a time series by the moving-block bootstrap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub block_len: usize,
    pub resamples: usize,
}

pub fn block_bootstrap(series: &[f64], block_len: usize, resamples: usize, seed: u64) -> BootstrapEstimate {
    let n = series.len();
    let m = mean(series);
    if n < 2 || resamples < 2 {
        return BootstrapEstimate { mean: m, stderr: f64::INFINITY, block_len, resamples };
    }
    let block_len = block_len.clamp(1, n);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for x in series {
        prefix.push(prefix.last().unwrap() + x);
    }
    let starts = n - block_len + 1;
    let nblocks = n.div_ceil(block_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..nblocks {
                let a = rng.gen_range(0..starts);
                s += prefix[a + block_len] - prefix[a];
            }
            s / (nblocks * block_len) as f64
        })
        .collect();
    let mb = mean(&means);
    let var = means.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    BootstrapEstimate { mean: m, stderr: var.sqrt(), block_len, resamples }
}
