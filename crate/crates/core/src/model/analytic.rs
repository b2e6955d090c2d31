use nalgebra::{DMatrix, DVector};

use super::FlowSystem;
use crate::error::{invalid, Error, Result};

/// Smooth vector field on R^n with an analytic Jacobian.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Arnold-Beltrami-Childress field, divergence-free on R^3.
#[derive(Clone, Debug)]
pub struct AbcField {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcField {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        AbcField { a, b, c }
    }
}

impl VectorField for AbcField {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let (a, b, c) = (self.a, self.b, self.c);
        DVector::from_vec(vec![
            a * x[2].sin() + c * x[1].cos(),
            b * x[0].sin() + a * x[2].cos(),
            c * x[1].sin() + b * x[0].cos(),
        ])
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b, c) = (self.a, self.b, self.c);
        DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                -c * x[1].sin(),
                a * x[2].cos(),
                b * x[0].cos(),
                0.0,
                -a * x[2].sin(),
                -b * x[0].sin(),
                c * x[1].cos(),
                0.0,
            ],
        )
    }
}

/// Flow of a [`VectorField`] by fixed-step RK4, with the variational equation
/// integrated alongside for tangent maps.
#[derive(Clone, Debug)]
pub struct AnalyticFlow<F> {
    pub field: F,
    max_step: f64,
}

impl<F: VectorField> AnalyticFlow<F> {
    pub fn new(field: F, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(invalid("max_step must be positive"));
        }
        Ok(AnalyticFlow { field, max_step })
    }

    fn substeps(&self, t: f64) -> Result<(usize, f64)> {
        if !t.is_finite() {
            return Err(invalid("flow time must be finite"));
        }
        let n = ((t.abs() / self.max_step).ceil() as usize).max(1);
        Ok((n, t / n as f64))
    }
}

fn check(x: &DVector<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integrator("non-finite state in RK4 step".into()))
    }
}

impl<F: VectorField> FlowSystem for AnalyticFlow<F> {
    type Point = DVector<f64>;

    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn field(&self, p: &DVector<f64>) -> DVector<f64> {
        self.field.eval(p)
    }

    fn flow(&self, p: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let (n, h) = self.substeps(t)?;
        let f = &self.field;
        let mut x = p.clone();
        for _ in 0..n {
            let k1 = f.eval(&x);
            let k2 = f.eval(&(&x + &k1 * (h / 2.0)));
            let k3 = f.eval(&(&x + &k2 * (h / 2.0)));
            let k4 = f.eval(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            check(&x)?;
        }
        Ok(x)
    }

    fn tangent_flow(&self, p: &DVector<f64>, t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (n, h) = self.substeps(t)?;
        let f = &self.field;
        let dim = f.dim();
        let mut x = p.clone();
        let mut m = DMatrix::identity(dim, dim);
        for _ in 0..n {
            let k1 = f.eval(&x);
            let l1 = f.jacobian(&x) * &m;
            let x2 = &x + &k1 * (h / 2.0);
            let k2 = f.eval(&x2);
            let l2 = f.jacobian(&x2) * (&m + &l1 * (h / 2.0));
            let x3 = &x + &k2 * (h / 2.0);
            let k3 = f.eval(&x3);
            let l3 = f.jacobian(&x3) * (&m + &l2 * (h / 2.0));
            let x4 = &x + &k3 * h;
            let k4 = f.eval(&x4);
            let l4 = f.jacobian(&x4) * (&m + &l3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            m += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
            check(&x)?;
        }
        Ok((x, m))
    }

    fn displace(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        p + v
    }

    fn difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        b - a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{divergence_fd, flow_jacobian_fd};

    fn abc() -> AnalyticFlow<AbcField> {
        AnalyticFlow::new(AbcField::new(1.0, (2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()), 1e-2).unwrap()
    }

    #[test]
    fn abc_is_divergence_free() {
        let sys = abc();
        let p = DVector::from_vec(vec![0.3, -1.2, 2.5]);
        assert!(divergence_fd(&sys, &p, 1e-3).abs() < 1e-10);
        assert!(sys.field.jacobian(&p).trace().abs() < 1e-15);
    }

    #[test]
    fn tangent_flow_matches_finite_differences() {
        let sys = abc();
        let p = DVector::from_vec(vec![0.7, 0.1, -0.4]);
        let (_, m) = sys.tangent_flow(&p, 1.5).unwrap();
        let fd = flow_jacobian_fd(&sys, &p, 1.5, 1e-6).unwrap();
        assert!((m - fd).norm() < 1e-7);
    }
}
