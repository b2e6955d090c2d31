//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Overwrites `b` with an orthonormal `Q` and writes `|R_ii|` into `diag`.
/// Entries below `1e-200` are flushed to zero: components along exactly
/// invariant directions otherwise decay into slow subnormals.
pub fn qr_in_place(b: &mut DMatrix<f64>, diag: &mut [f64]) -> Result<()> {
    let (n, k) = b.shape();
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = 0.0;
                for r in 0..n {
                    dot += b[(r, i)] * b[(r, j)];
                }
                for r in 0..n {
                    let v = b[(r, i)];
                    b[(r, j)] -= dot * v;
                }
            }
        }
        let norm = b.column(j).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateQr(norm));
        }
        b.column_mut(j).unscale_mut(norm);
        diag[j] = norm;
    }
    b.apply(flush);
    Ok(())
}

/// Same as [`qr_in_place`] for a stack-allocated 3x3 frame.
#[inline]
pub fn qr3_in_place(b: &mut Matrix3<f64>) -> Result<Vector3<f64>> {
    let mut diag = Vector3::zeros();
    for j in 0..3 {
        let mut col: Vector3<f64> = b.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = b.column(i);
                let dot = qi.dot(&col);
                col -= qi * dot;
            }
        }
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateQr(norm));
        }
        b.set_column(j, &(col / norm));
        diag[j] = norm;
    }
    b.apply(flush);
    Ok(diag)
}

#[inline]
fn flush(x: &mut f64) {
    if x.abs() < 1e-200 {
        *x = 0.0;
    }
}

/// Smallest singular value.
pub fn conorm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Serde adapter writing matrices as arrays of rows.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.0, 0.2, 1.5]);
        let mut q = a.clone();
        let mut d = [0.0; 3];
        qr_in_place(&mut q, &mut d).unwrap();
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-14);
        let prod: f64 = d.iter().product();
        assert!((prod - a.determinant().abs()).abs() < 1e-12);
    }

    #[test]
    fn qr3_matches_dynamic() {
        let a = Matrix3::new(2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.0, 0.2, 1.5);
        let mut q = a;
        let d = qr3_in_place(&mut q).unwrap();
        let mut qd = DMatrix::from_column_slice(3, 3, a.as_slice());
        let mut dd = [0.0; 3];
        qr_in_place(&mut qd, &mut dd).unwrap();
        for j in 0..3 {
            assert!((d[j] - dd[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_frame_is_reported() {
        let mut a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let mut d = [0.0; 2];
        assert!(matches!(qr_in_place(&mut a, &mut d), Err(Error::DegenerateQr(_))));
    }
}
