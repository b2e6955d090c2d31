//! Linear Poincaré flow on the normal bundle.
//!
//! The normal space at `p` is the orthogonal complement of `X(p)`; the
//! projection `Π` is orthogonal. Frames are built deterministically: the
//! canonical axis most aligned with `X(p)` is dropped (lowest index on ties)
//! and the remaining axes are Gram-Schmidt orthonormalized against `X̂(p)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::rows;
use crate::model::FlowSystem;

/// Below this norm the field is treated as vanishing.
pub const SINGULAR_FIELD: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFrame<P> {
    pub at: P,
    /// Unit field direction.
    pub direction: Vec<f64>,
    /// Orthonormal basis of the normal space, one column per vector.
    #[serde(with = "rows")]
    pub basis: DMatrix<f64>,
}

impl<P> NormalFrame<P> {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection `Π` onto the normal space, in ambient coordinates.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

pub fn normal_frame<S: FlowSystem>(sys: &S, p: &S::Point) -> Result<NormalFrame<S::Point>> {
    let x = sys.field(p);
    let n = x.len();
    let norm = x.norm();
    if !(norm >= SINGULAR_FIELD) {
        return Err(Error::Singularity(norm));
    }
    let y = &x / norm;
    let mut drop = 0;
    for i in 1..n {
        if y[i].abs() > y[drop].abs() {
            drop = i;
        }
    }
    let mut basis = DMatrix::zeros(n, n - 1);
    let mut col = 0;
    for i in (0..n).filter(|&i| i != drop) {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _pass in 0..2 {
            v -= &y * y.dot(&v);
            for j in 0..col {
                let q = basis.column(j);
                v -= q * q.dot(&v);
            }
        }
        let vn = v.norm();
        basis.set_column(col, &(v / vn));
        col += 1;
    }
    Ok(NormalFrame { at: p.clone(), direction: y.iter().copied().collect(), basis })
}

/// Matrix of `P^t = Π∘DX^t` between two normal frames.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoincareMap<P> {
    pub from: NormalFrame<P>,
    pub to: NormalFrame<P>,
    pub t: f64,
    #[serde(with = "rows")]
    pub matrix: DMatrix<f64>,
}

impl<P> PoincareMap<P> {
    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }
}

pub fn poincare_step<S: FlowSystem>(
    sys: &S,
    frame: &NormalFrame<S::Point>,
    t: f64,
) -> Result<PoincareMap<S::Point>> {
    let (q, d) = sys.tangent_flow(&frame.at, t)?;
    let to = normal_frame(sys, &q)?;
    // The target basis is orthogonal to X(q), so its transpose already applies Π.
    let matrix = to.basis.transpose() * d * &frame.basis;
    Ok(PoincareMap { from: frame.clone(), to, t, matrix })
}

pub fn poincare_map<S: FlowSystem>(sys: &S, p: &S::Point, t: f64) -> Result<PoincareMap<S::Point>> {
    poincare_step(sys, &normal_frame(sys, p)?, t)
}

/// Composition `P^s(X^t p) ∘ P^t(p)` of consecutive maps.
pub fn compose<P: Clone>(later: &PoincareMap<P>, earlier: &PoincareMap<P>) -> PoincareMap<P> {
    PoincareMap {
        from: earlier.from.clone(),
        to: later.to.clone(),
        t: earlier.t + later.t,
        matrix: &later.matrix * &earlier.matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_cat_suspension, AbcField, AnalyticFlow, PhasePoint, VectorField};

    struct Constant(DVector<f64>);

    impl VectorField for Constant {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn eval(&self, _x: &DVector<f64>) -> DVector<f64> {
            self.0.clone()
        }
        fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::zeros(self.0.len(), self.0.len())
        }
    }

    #[test]
    fn frame_drops_the_field_axis() {
        let sys = AnalyticFlow::new(Constant(DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])), 0.1).unwrap();
        let f = normal_frame(&sys, &DVector::zeros(4)).unwrap();
        let expected = DMatrix::from_column_slice(4, 3, &[0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.]);
        assert_eq!(f.basis, expected);
    }

    #[test]
    fn tie_breaks_toward_lowest_index() {
        let sys = AnalyticFlow::new(Constant(DVector::from_vec(vec![1.0, 1.0, 0.0])), 0.1).unwrap();
        let f = normal_frame(&sys, &DVector::zeros(3)).unwrap();
        let g = f.basis.transpose() * &f.basis;
        assert!((g - DMatrix::identity(2, 2)).norm() < 1e-15);
        // Axis 0 was dropped: the first basis vector comes from e_1.
        assert!(f.basis[(1, 0)] > 0.0 && f.basis[(0, 0)] < 0.0);
    }

    #[test]
    fn vanishing_field_is_singular() {
        let sys = AnalyticFlow::new(Constant(DVector::zeros(3)), 0.1).unwrap();
        assert!(matches!(normal_frame(&sys, &DVector::zeros(3)), Err(Error::Singularity(_))));
    }

    #[test]
    fn suspension_time_one_map_is_block_diagonal() {
        let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap();
        let m = poincare_map(&sys, &PhasePoint::new([0.3, 0.6, 0.2], 0.0), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.matrix, expected);
        assert!((m.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cocycle_property_on_abc_flow() {
        let sys = AnalyticFlow::new(AbcField::new(1.0, 0.8, 0.6), 1e-3).unwrap();
        let p = DVector::from_vec(vec![0.4, 1.1, -0.3]);
        let a = poincare_map(&sys, &p, 0.7).unwrap();
        let b = poincare_step(&sys, &a.to, 0.9).unwrap();
        let whole = poincare_map(&sys, &p, 1.6).unwrap();
        let err = (compose(&b, &a).matrix - &whole.matrix).norm() / whole.matrix.norm();
        assert!(err < 1e-8, "relative cocycle error {err}");
    }

    #[test]
    fn projection_absorbs_inner_projection() {
        let sys = AnalyticFlow::new(AbcField::new(1.0, 0.8, 0.6), 1e-3).unwrap();
        let p = DVector::from_vec(vec![0.9, -0.2, 0.5]);
        let from = normal_frame(&sys, &p).unwrap();
        let (q, d) = sys.tangent_flow(&p, 1.3).unwrap();
        let to = normal_frame(&sys, &q).unwrap();
        let lhs = to.projector() * &d * from.projector();
        let rhs = to.projector() * &d;
        // DX^t carries X(p) to X(q), so the inner projection changes nothing.
        assert!((lhs - rhs).norm() < 1e-9);
    }
}
