//! Uniform tensor-product cubic B-spline interpolation.

/// Cubic B-spline interpolant of values on a uniform grid in 2 or 3 axes.
///
/// Axis `a` has nodes `origin[a] + i·step[a]` for `i in 0..shape[a]`.
#[derive(Clone, Debug)]
pub struct TensorSpline {
    shape: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<f64>,
    step: Vec<f64>,
    coef: Vec<f64>,
}

impl TensorSpline {
    /// Builds the interpolant; `values` is row-major with the last axis fastest.
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, step: Vec<f64>, mut values: Vec<f64>) -> Self {
        let d = shape.len();
        assert!(shape.iter().all(|&s| s >= 4));
        assert_eq!(values.len(), shape.iter().product::<usize>());
        let mut strides = vec![1; d];
        for a in (0..d - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        for a in 0..d {
            prefilter_axis(&mut values, &shape, &strides, a);
        }
        TensorSpline { shape, strides, origin, step, coef: values }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Value and gradient with respect to the grid coordinates at `x`.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, [f64; 3]) {
        let d = self.dim();
        let mut base = [0usize; 3];
        let mut w = [[0.0; 4]; 3];
        let mut dw = [[0.0; 4]; 3];
        for a in 0..d {
            let s = (x[a] - self.origin[a]) / self.step[a];
            let i = (s.floor() as isize).clamp(1, self.shape[a] as isize - 3);
            let t = s - i as f64;
            base[a] = i as usize - 1;
            let u = 1.0 - t;
            w[a] = [u * u * u / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0, (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0];
            let h = self.step[a];
            dw[a] = [-u * u / 2.0 / h, (1.5 * t * t - 2.0 * t) / h, (-1.5 * t * t + t + 0.5) / h, t * t / 2.0 / h];
        }
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        if d == 2 {
            for i in 0..4 {
                let row = (base[0] + i) * self.strides[0] + base[1];
                for j in 0..4 {
                    let c = self.coef[row + j];
                    val += c * w[0][i] * w[1][j];
                    grad[0] += c * dw[0][i] * w[1][j];
                    grad[1] += c * w[0][i] * dw[1][j];
                }
            }
        } else {
            for i in 0..4 {
                for j in 0..4 {
                    let row = (base[0] + i) * self.strides[0] + (base[1] + j) * self.strides[1] + base[2];
                    let (wij, dij0, dij1) = (w[0][i] * w[1][j], dw[0][i] * w[1][j], w[0][i] * dw[1][j]);
                    for k in 0..4 {
                        let c = self.coef[row + k];
                        val += c * wij * w[2][k];
                        grad[0] += c * dij0 * w[2][k];
                        grad[1] += c * dij1 * w[2][k];
                        grad[2] += c * wij * dw[2][k];
                    }
                }
            }
        }
        (val, grad)
    }
}

/// Solves `(c[i-1] + 4c[i] + c[i+1]) / 6 = f[i]` along one axis, with the
/// missing end coefficients extrapolated by cubics so cubic data is exact.
fn prefilter_axis(data: &mut [f64], shape: &[usize], strides: &[usize], axis: usize) {
    let n = shape[axis];
    let stride = strides[axis];
    let total: usize = shape.iter().product();
    let mut f = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut cp = vec![0.0; n];
    // Rows: (lower, diag, upper); the end rows reduce to c0 - c1 = f0 - f1.
    let row = |i: usize| -> (f64, f64, f64) {
        if i == 0 {
            (0.0, 1.0, -1.0)
        } else if i == n - 1 {
            (-1.0, 1.0, 0.0)
        } else {
            (1.0, 4.0, 1.0)
        }
    };
    for start in 0..total {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        for i in 0..n {
            f[i] = data[start + i * stride];
        }
        rhs[0] = f[0] - f[1];
        rhs[n - 1] = f[n - 1] - f[n - 2];
        for i in 1..n - 1 {
            rhs[i] = 6.0 * f[i];
        }
        let (_, b0, c0) = row(0);
        cp[0] = c0 / b0;
        rhs[0] /= b0;
        for i in 1..n {
            let (a, b, c) = row(i);
            let m = b - a * cp[i - 1];
            cp[i] = c / m;
            rhs[i] = (rhs[i] - a * rhs[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= cp[i] * rhs[i + 1];
        }
        for i in 0..n {
            data[start + i * stride] = rhs[i];
        }
    }
}
