//! Volume-preserving flows: the suspension testbed and generic analytic fields.
//!
//! Every system implements [`FlowSystem`]. Tangent vectors are expressed in
//! the ambient coordinates of the phase space; `displace`/`difference` are the
//! local chart maps used for finite differences across identifications.

mod analytic;
pub(crate) mod suspension;

pub use analytic::{AbcField, AnalyticFlow, VectorField};
pub use suspension::{make_cat_suspension, CatSuspension, PhasePoint};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub trait FlowSystem: Send + Sync {
    type Point: Clone + std::fmt::Debug + Send + Sync;

    /// Ambient dimension.
    fn dim(&self) -> usize;
    fn field(&self, p: &Self::Point) -> DVector<f64>;
    fn flow(&self, p: &Self::Point, t: f64) -> Result<Self::Point>;
    /// Time-`t` image of `p` together with the ambient derivative `DX^t(p)`.
    fn tangent_flow(&self, p: &Self::Point, t: f64) -> Result<(Self::Point, DMatrix<f64>)>;
    /// Moves `p` by the ambient vector `v` in local coordinates.
    fn displace(&self, p: &Self::Point, v: &DVector<f64>) -> Self::Point;
    /// Local vector `v` with `displace(a, v) == b` for nearby points.
    fn difference(&self, a: &Self::Point, b: &Self::Point) -> DVector<f64>;
}

/// Serializable system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemSpec {
    CatSuspension { omega: f64 },
    AbcFlow { a: f64, b: f64, c: f64, max_step: f64 },
}

impl SystemSpec {
    pub fn golden() -> Self {
        SystemSpec::CatSuspension { omega: (5f64.sqrt() - 1.0) / 2.0 }
    }

    pub fn cat_suspension(&self) -> Result<CatSuspension> {
        match self {
            SystemSpec::CatSuspension { omega } => make_cat_suspension(*omega),
            other => Err(invalid(format!("expected a cat suspension, got {other:?}"))),
        }
    }

    pub fn abc_flow(&self) -> Result<AnalyticFlow<AbcField>> {
        match self {
            SystemSpec::AbcFlow { a, b, c, max_step } => {
                AnalyticFlow::new(AbcField::new(*a, *b, *c), *max_step)
            }
            other => Err(invalid(format!("expected an ABC flow, got {other:?}"))),
        }
    }
}

/// Fourth-order central-difference Jacobian of the field.
pub fn field_jacobian_fd<S: FlowSystem>(sys: &S, p: &S::Point, h: f64) -> DMatrix<f64> {
    let n = sys.dim();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        let at = |s: f64, e: &mut DVector<f64>| {
            e.fill(0.0);
            e[j] = s * h;
            sys.field(&sys.displace(p, e))
        };
        let col = (at(-2.0, &mut e) - at(2.0, &mut e)) / 12.0 + (at(1.0, &mut e) - at(-1.0, &mut e)) * (8.0 / 12.0);
        jac.set_column(j, &(col / h));
    }
    jac
}

/// Divergence of the field by fourth-order central differences.
pub fn divergence_fd<S: FlowSystem>(sys: &S, p: &S::Point, h: f64) -> f64 {
    field_jacobian_fd(sys, p, h).trace()
}

/// Central-difference Jacobian of the time-`t` flow map.
pub fn flow_jacobian_fd<S: FlowSystem>(sys: &S, p: &S::Point, t: f64, h: f64) -> Result<DMatrix<f64>> {
    let n = sys.dim();
    let base = sys.flow(p, t)?;
    let mut jac = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = h;
        let plus = sys.flow(&sys.displace(p, &e), t)?;
        e[j] = -h;
        let minus = sys.flow(&sys.displace(p, &e), t)?;
        let col = (sys.difference(&base, &plus) - sys.difference(&base, &minus)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Whether the orbit of `p` stays away from `p` (after first leaving the
/// `tol`-ball) up to `horizon`, sampled at time step `dt`.
pub fn is_nonperiodic_sample<S: FlowSystem>(
    sys: &S,
    p: &S::Point,
    horizon: f64,
    tol: f64,
    dt: f64,
) -> Result<bool> {
    if !(dt > 0.0) || !(tol > 0.0) {
        return Err(invalid("dt and tol must be positive"));
    }
    let steps = (horizon / dt).ceil() as usize;
    let mut q = p.clone();
    let mut left = false;
    for _ in 0..steps {
        q = sys.flow(&q, dt)?;
        let d = sys.difference(p, &q).norm();
        if !d.is_finite() {
            return Err(Error::Integrator("non-finite orbit point".into()));
        }
        if d > tol {
            left = true;
        } else if left {
            return Ok(false);
        }
    }
    Ok(true)
}
