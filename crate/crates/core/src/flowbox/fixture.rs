//! Chart fixtures: a JSON header plus a little-endian `f64` blob of sampled
//! chart points, used for regression tests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chart::{sample_chart_domain, RectifyingChart};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartFixture {
    pub dim: usize,
    pub radius: f64,
    pub lambda: f64,
    pub samples: usize,
    pub seed: u64,
    /// Record layout: chart coordinates, ambient image coordinates, det DΦ.
    pub columns: Vec<String>,
    /// Blob file name, relative to the JSON file.
    pub blob: String,
}

pub fn write_chart_fixture<C, F>(chart: &C, coords: F, samples: usize, seed: u64, json_path: &Path) -> Result<ChartFixture>
where
    C: RectifyingChart,
    F: Fn(&C::Point) -> Vec<f64>,
{
    let n = chart.dim();
    let pts = sample_chart_domain(n, chart.radius(), samples, (-1.0, 1.0), seed);
    let mut bytes = Vec::with_capacity(samples * (2 * n + 1) * 8);
    for u in &pts {
        let image = coords(&chart.phi(u)?);
        let det = chart.phi_jacobian(u)?.determinant();
        for v in u.iter().chain(&image).chain(std::iter::once(&det)) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let blob_path = json_path.with_extension("bin");
    let blob = blob_path.file_name().and_then(|s| s.to_str()).ok_or_else(|| invalid("bad fixture path"))?.to_string();
    let mut columns: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
    columns.extend((0..n).map(|i| format!("x{i}")));
    columns.push("det".into());
    let fx = ChartFixture { dim: n, radius: chart.radius(), lambda: chart.lambda(), samples, seed, columns, blob };
    fs::write(&blob_path, bytes)?;
    fs::write(json_path, serde_json::to_string_pretty(&fx)?)?;
    Ok(fx)
}

/// Reads a fixture and its records, one `Vec` per sample.
pub fn read_chart_fixture(json_path: &Path) -> Result<(ChartFixture, Vec<Vec<f64>>)> {
    let fx: ChartFixture = serde_json::from_str(&fs::read_to_string(json_path)?)?;
    let blob: PathBuf = json_path.parent().unwrap_or(Path::new(".")).join(&fx.blob);
    let bytes = fs::read(blob)?;
    let width = fx.columns.len();
    if bytes.len() != fx.samples * width * 8 {
        return Err(invalid("fixture blob size does not match header"));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((fx, values.chunks(width).map(|c| c.to_vec()).collect()))
}
