use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::FlowSystem;
use crate::error::{invalid, Error, Result};

/// Point of the suspension: base point on the 3-torus and height in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub base: [f64; 3],
    pub height: f64,
}

impl PhasePoint {
    pub fn new(base: [f64; 3], height: f64) -> Self {
        PhasePoint { base: base.map(wrap), height }
    }
}

#[inline]
pub(crate) fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed representative of `x` modulo 1 in `[-1/2, 1/2)`.
#[inline]
pub(crate) fn wrap_signed(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

/// Constant-roof suspension of `(x, y, z) -> (M(x, y), z + omega)` on the 3-torus.
///
/// Tangent coordinates are `(x, y, z, h)`; the field is `∂h`.
#[derive(Clone, Debug)]
pub struct CatSuspension {
    matrix: [[i64; 2]; 2],
    inverse: [[i64; 2]; 2],
    omega: f64,
    lambda_u: f64,
    lambda_s: f64,
    e_u: Vector2<f64>,
    e_s: Vector2<f64>,
}

pub fn make_cat_suspension(omega: f64) -> Result<CatSuspension> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(invalid(format!("omega must lie in (0, 1), got {omega}")));
    }
    CatSuspension::from_parts([[2, 1], [1, 1]], omega)
}

impl CatSuspension {
    /// Suspension of an arbitrary symmetric hyperbolic matrix in SL(2, Z).
    ///
    /// `omega` may be any value in `[0, 1)`; rational values give periodic
    /// orbits and are only useful as test fixtures.
    pub fn from_parts(matrix: [[i64; 2]; 2], omega: f64) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        if a * d - b * c != 1 {
            return Err(invalid("base matrix must have determinant 1"));
        }
        if b != c {
            return Err(invalid("base matrix must be symmetric"));
        }
        if (a + d).abs() <= 2 {
            return Err(invalid("base matrix must be hyperbolic"));
        }
        if !(0.0..1.0).contains(&omega) {
            return Err(invalid(format!("omega must lie in [0, 1), got {omega}")));
        }
        let m = Matrix2::new(a as f64, b as f64, c as f64, d as f64);
        let eig = m.symmetric_eigen();
        let (iu, is) = if eig.eigenvalues[0].abs() > eig.eigenvalues[1].abs() { (0, 1) } else { (1, 0) };
        let orient = |v: Vector2<f64>| if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -v } else { v };
        Ok(CatSuspension {
            matrix,
            inverse: [[d, -b], [-c, a]],
            omega,
            lambda_u: eig.eigenvalues[iu],
            lambda_s: eig.eigenvalues[is],
            e_u: orient(eig.eigenvectors.column(iu).into_owned()),
            e_s: orient(eig.eigenvectors.column(is).into_owned()),
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let [[a, b], [c, d]] = self.matrix;
        Matrix2::new(a as f64, b as f64, c as f64, d as f64)
    }

    /// Expanding eigenvalue of the base matrix.
    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    /// Unit expanding eigenvector in the `(x, y)` plane.
    pub fn unstable_vector(&self) -> Vector2<f64> {
        self.e_u
    }

    pub fn stable_vector(&self) -> Vector2<f64> {
        self.e_s
    }

    /// Base map `F`.
    pub fn map(&self, b: [f64; 3]) -> [f64; 3] {
        apply(&self.matrix, b, self.omega)
    }

    pub fn inverse_map(&self, b: [f64; 3]) -> [f64; 3] {
        apply(&self.inverse, b, -self.omega)
    }

    /// `F^k` for any integer `k`.
    pub fn map_power(&self, mut b: [f64; 3], k: i64) -> [f64; 3] {
        if k >= 0 {
            for _ in 0..k {
                b = self.map(b);
            }
        } else {
            for _ in 0..(-k) {
                b = self.inverse_map(b);
            }
        }
        b
    }

    /// Exact flow, returning the image and the signed number of roof crossings.
    pub fn flow_with_crossings(&self, p: &PhasePoint, t: f64) -> (PhasePoint, i64) {
        let s = p.height + t;
        let mut k = s.floor();
        let mut h = s - k;
        if h >= 1.0 {
            h -= 1.0;
            k += 1.0;
        }
        let k = k as i64;
        (PhasePoint { base: self.map_power(p.base, k), height: h }, k)
    }

    /// Derivative of `F^k` on the `(x, y, z)` coordinates.
    pub fn base_derivative_power(&self, k: i64) -> Result<Matrix2<f64>> {
        let step = if k >= 0 { self.matrix() } else { matrix_of(&self.inverse) };
        let mut m = Matrix2::identity();
        for _ in 0..k.unsigned_abs() {
            m = step * m;
        }
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err(Error::Integrator(format!("derivative of F^{k} overflows")))
        }
    }
}

fn matrix_of(m: &[[i64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64)
}

#[inline]
fn apply(m: &[[i64; 2]; 2], b: [f64; 3], shift: f64) -> [f64; 3] {
    let x = m[0][0] as f64 * b[0] + m[0][1] as f64 * b[1];
    let y = m[1][0] as f64 * b[0] + m[1][1] as f64 * b[1];
    [wrap(x), wrap(y), wrap(b[2] + shift)]
}

impl FlowSystem for CatSuspension {
    type Point = PhasePoint;

    fn dim(&self) -> usize {
        4
    }

    fn field(&self, _p: &PhasePoint) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0])
    }

    fn flow(&self, p: &PhasePoint, t: f64) -> Result<PhasePoint> {
        if !t.is_finite() {
            return Err(invalid("flow time must be finite"));
        }
        Ok(self.flow_with_crossings(p, t).0)
    }

    fn tangent_flow(&self, p: &PhasePoint, t: f64) -> Result<(PhasePoint, DMatrix<f64>)> {
        if !t.is_finite() {
            return Err(invalid("flow time must be finite"));
        }
        let (q, k) = self.flow_with_crossings(p, t);
        let a = self.base_derivative_power(k)?;
        let mut d = DMatrix::identity(4, 4);
        d.view_mut((0, 0), (2, 2)).copy_from(&a);
        Ok((q, d))
    }

    fn displace(&self, p: &PhasePoint, v: &DVector<f64>) -> PhasePoint {
        let moved = PhasePoint::new([p.base[0] + v[0], p.base[1] + v[1], p.base[2] + v[2]], p.height);
        self.flow_with_crossings(&moved, v[3]).0
    }

    fn difference(&self, a: &PhasePoint, b: &PhasePoint) -> DVector<f64> {
        // b may sit on a neighbouring sheet of the roof identification.
        let candidates = [
            (b.base, b.height),
            (self.inverse_map(b.base), b.height + 1.0),
            (self.map(b.base), b.height - 1.0),
        ];
        let mut best: Option<DVector<f64>> = None;
        for (base, h) in candidates {
            let v = DVector::from_vec(vec![
                wrap_signed(base[0] - a.base[0]),
                wrap_signed(base[1] - a.base[1]),
                wrap_signed(base[2] - a.base[2]),
                h - a.height,
            ]);
            if best.as_ref().is_none_or(|b| v.norm() < b.norm()) {
                best = Some(v);
            }
        }
        best.expect("non-empty candidate list")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> CatSuspension {
        make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap()
    }

    #[test]
    fn flow_crosses_roof_once() {
        let sys = golden();
        let q = sys.flow(&PhasePoint::new([0.1, 0.2, 0.3], 0.5), 0.6).unwrap();
        assert!((q.base[0] - 0.4).abs() < 1e-14);
        assert!((q.base[1] - 0.3).abs() < 1e-14);
        assert!((q.base[2] - (0.3 + sys.omega())).abs() < 1e-14);
        assert!((q.height - 0.1).abs() < 1e-14);
    }

    #[test]
    fn flow_is_a_group_action() {
        let sys = golden();
        let p = PhasePoint::new([0.37, 0.81, 0.05], 0.72);
        let a = sys.flow(&sys.flow(&p, 2.3).unwrap(), -1.45).unwrap();
        let b = sys.flow(&p, 0.85).unwrap();
        assert!(sys.difference(&a, &b).norm() < 1e-12);
    }

    #[test]
    fn eigen_data() {
        let sys = golden();
        assert!((sys.lambda_u() - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((sys.lambda_u() * sys.lambda_s() - 1.0).abs() < 1e-14);
        assert!(sys.unstable_vector().dot(&sys.stable_vector()).abs() < 1e-15);
        let av = sys.matrix() * sys.unstable_vector();
        assert!((av - sys.unstable_vector() * sys.lambda_u()).norm() < 1e-14);
    }

    #[test]
    fn inverse_map_round_trip() {
        let sys = golden();
        let b = [0.123, 0.456, 0.789];
        let c = sys.inverse_map(sys.map(b));
        for i in 0..3 {
            assert!(wrap_signed(c[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn omega_outside_unit_interval_rejected() {
        assert!(make_cat_suspension(1.5).is_err());
        assert!(make_cat_suspension(0.0).is_err());
        assert!(make_cat_suspension(f64::NAN).is_err());
    }

    #[test]
    fn difference_sees_across_roof() {
        let sys = golden();
        let a = PhasePoint::new([0.2, 0.3, 0.4], 0.999);
        let b = sys.flow(&a, 0.002).unwrap();
        let v = sys.difference(&a, &b);
        assert!((v[3] - 0.002).abs() < 1e-12);
        assert!(v.rows(0, 3).norm() < 1e-12);
    }
}
