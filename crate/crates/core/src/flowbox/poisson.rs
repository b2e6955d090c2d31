//! Cell-centred finite volumes for the Neumann problem `Δu = f` on a disk
//! (polar cells) or a ball (spherical cells).
//!
//! The operator is diagonalized by a real DFT in the azimuth; each Fourier
//! mode is a banded SPD system in `(ρ, θ)` solved by banded Cholesky.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Polar (`d = 2`) or spherical (`d = 3`) cell grid on `B_r`.
#[derive(Clone, Debug)]
pub struct BallGrid {
    pub d: usize,
    pub radius: f64,
    pub n_rho: usize,
    /// One polar cell in two dimensions.
    pub n_theta: usize,
    pub n_phi: usize,
}

impl BallGrid {
    pub fn new(d: usize, radius: f64, grid_n: usize) -> Self {
        let n_phi = grid_n;
        let n_rho = grid_n / 2;
        let n_theta = if d == 3 { grid_n / 2 } else { 1 };
        BallGrid { d, radius, n_rho, n_theta, n_phi }
    }

    pub fn h_rho(&self) -> f64 {
        self.radius / self.n_rho as f64
    }

    pub fn h_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn h_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_theta + j) * self.n_phi + k
    }

    /// Cell-centre logical coordinates `(ρ, θ, φ)`; `θ = π/2` in two dimensions.
    pub fn center(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        let theta = if self.d == 3 { (j as f64 + 0.5) * self.h_theta() } else { PI / 2.0 };
        ((i as f64 + 0.5) * self.h_rho(), theta, (k as f64 + 0.5) * self.h_phi())
    }

    pub fn to_cartesian(&self, rho: f64, theta: f64, phi: f64) -> Vec<f64> {
        if self.d == 2 {
            vec![rho * phi.cos(), rho * phi.sin()]
        } else {
            vec![rho * theta.sin() * phi.cos(), rho * theta.sin() * phi.sin(), rho * theta.cos()]
        }
    }

    /// Integral of `g` and volume of every cell by tensor Gauss quadrature.
    pub fn integrate<G: Fn(&[f64]) -> f64>(&self, g: G) -> (Vec<f64>, Vec<f64>) {
        let (hr, ht, hp) = (self.h_rho(), self.h_theta(), self.h_phi());
        let mut gint = vec![0.0; self.len()];
        let mut vol = vec![0.0; self.len()];
        let tq: &[(f64, f64)] = if self.d == 3 { &GAUSS4 } else { &[(0.0, 2.0)] };
        for i in 0..self.n_rho {
            for j in 0..self.n_theta {
                for k in 0..self.n_phi {
                    let (rc, tc, pc) = self.center(i, j, k);
                    let mut gi = 0.0;
                    let mut vi = 0.0;
                    for &(a, wa) in &GAUSS4 {
                        let rho = rc + a * hr / 2.0;
                        for &(b, wb) in tq {
                            let theta = tc + b * ht / 2.0;
                            for &(c, wc) in &GAUSS4 {
                                let phi = pc + c * hp / 2.0;
                                let jac = if self.d == 3 { rho * rho * theta.sin() * hr * ht * hp / 8.0 } else { rho * hr * hp / 4.0 };
                                let w = wa * wb * wc * jac / if self.d == 3 { 1.0 } else { 2.0 };
                                gi += w * g(&self.to_cartesian(rho, theta, phi));
                                vi += w;
                            }
                        }
                    }
                    let idx = self.index(i, j, k);
                    gint[idx] = gi;
                    vol[idx] = vi;
                }
            }
        }
        (gint, vol)
    }

    /// Face coefficients `(radial, polar, azimuthal)` for cell `(i, j)`;
    /// radial and polar couple to the `+1` neighbour.
    fn coefficients(&self, i: usize, j: usize) -> (f64, f64, f64) {
        let (hr, ht, hp) = (self.h_rho(), self.h_theta(), self.h_phi());
        let rho = (i as f64 + 0.5) * hr;
        let (rm, rp) = (i as f64 * hr, (i as f64 + 1.0) * hr);
        let radial = if i + 1 < self.n_rho {
            if self.d == 3 {
                let (tm, tp) = (j as f64 * ht, (j as f64 + 1.0) * ht);
                rp * rp * (tm.cos() - tp.cos()) * hp / hr
            } else {
                rp * hp / hr
            }
        } else {
            0.0
        };
        if self.d == 2 {
            return (radial, 0.0, hr / (rho * hp));
        }
        let theta = (j as f64 + 0.5) * ht;
        let polar = if j + 1 < self.n_theta {
            let tf = (j as f64 + 1.0) * ht;
            tf.sin() * (rp * rp - rm * rm) / 2.0 * hp / (rho * ht)
        } else {
            0.0
        };
        let azimuthal = (rp * rp - rm * rm) / 2.0 * ht / (rho * theta.sin() * hp);
        (radial, polar, azimuthal)
    }

    /// Solves the discrete Neumann problem `Σ flux = rhs` cell by cell.
    /// The gauge fixes the azimuthal mean of the innermost line to zero.
    pub fn solve_neumann(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (nr, nt, np) = (self.n_rho, self.n_theta, self.n_phi);
        if np % 2 != 0 || np < 4 {
            return Err(Error::Poisson("azimuthal cell count must be even".into()));
        }
        let total: f64 = rhs.iter().sum();
        let scale: f64 = rhs.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        if total.abs() > 1e-9 * scale && total.abs() > 1e-12 {
            return Err(Error::Poisson(format!("incompatible Neumann data (net source {total:.3e})")));
        }
        let half = np / 2;
        let (cos_t, sin_t) = dft_tables(np);
        let lines = nr * nt;
        let coef: Vec<(f64, f64, f64)> = (0..nr).flat_map(|i| (0..nt).map(move |j| (i, j))).map(|(i, j)| self.coefficients(i, j)).collect();
        // Forward real DFT of every azimuthal line.
        let mut a_hat = vec![0.0; lines * (half + 1)];
        let mut b_hat = vec![0.0; lines * (half + 1)];
        for l in 0..lines {
            let row = &rhs[l * np..(l + 1) * np];
            for m in 0..=half {
                let (mut a, mut b) = (0.0, 0.0);
                for k in 0..np {
                    a += row[k] * cos_t[m * np + k];
                    b += row[k] * sin_t[m * np + k];
                }
                a_hat[l * (half + 1) + m] = a;
                b_hat[l * (half + 1) + m] = b;
            }
        }
        let mut u_a = vec![0.0; lines * (half + 1)];
        let mut u_b = vec![0.0; lines * (half + 1)];
        let bw = if self.d == 3 { nt } else { 1 };
        let mut band = vec![0.0; lines * (bw + 1)];
        let mut x = vec![0.0; lines];
        for m in 0..=half {
            let mu = 2.0 - 2.0 * (2.0 * PI * m as f64 / np as f64).cos();
            // Band storage: band[row * (bw + 1) + (row - col)] for col <= row.
            band.fill(0.0);
            for i in 0..nr {
                for j in 0..nt {
                    let l = i * nt + j;
                    let (cr, ct, cp) = coef[l];
                    band[l * (bw + 1)] += cp * mu;
                    if i + 1 < nr {
                        let n = l + nt;
                        band[l * (bw + 1)] += cr;
                        band[n * (bw + 1)] += cr;
                        band[n * (bw + 1) + nt] -= cr;
                    }
                    if ct != 0.0 {
                        let n = l + 1;
                        band[l * (bw + 1)] += ct;
                        band[n * (bw + 1)] += ct;
                        band[n * (bw + 1) + 1] -= ct;
                    }
                }
            }
            if m == 0 {
                band[0] = 1.0;
                for l in 1..=bw.min(lines - 1) {
                    band[l * (bw + 1) + l] = 0.0;
                }
            }
            banded_cholesky(&mut band, lines, bw)?;
            for (hat, out, skip) in [(&a_hat, &mut u_a, false), (&b_hat, &mut u_b, m == 0 || m == half)] {
                if skip {
                    continue;
                }
                for l in 0..lines {
                    // The assembled matrix is the negated operator.
                    x[l] = -hat[l * (half + 1) + m];
                }
                if m == 0 {
                    x[0] = 0.0;
                }
                banded_solve(&band, lines, bw, &mut x);
                for l in 0..lines {
                    out[l * (half + 1) + m] = x[l];
                }
            }
        }
        let mut u = vec![0.0; self.len()];
        for l in 0..lines {
            for k in 0..np {
                let mut s = u_a[l * (half + 1)] + u_a[l * (half + 1) + half] * cos_t[half * np + k];
                for m in 1..half {
                    s += 2.0 * (u_a[l * (half + 1) + m] * cos_t[m * np + k] + u_b[l * (half + 1) + m] * sin_t[m * np + k]);
                }
                u[l * np + k] = s / np as f64;
            }
        }
        Ok(u)
    }

    /// Applies the discrete operator; used to check solves.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let (nr, nt, np) = (self.n_rho, self.n_theta, self.n_phi);
        let mut out = vec![0.0; u.len()];
        for i in 0..nr {
            for j in 0..nt {
                let (cr, ct, cp) = self.coefficients(i, j);
                for k in 0..np {
                    let c = self.index(i, j, k);
                    let kp = self.index(i, j, (k + 1) % np);
                    out[c] += cp * (u[kp] - u[c]);
                    out[kp] += cp * (u[c] - u[kp]);
                    if i + 1 < nr {
                        let n = self.index(i + 1, j, k);
                        out[c] += cr * (u[n] - u[c]);
                        out[n] += cr * (u[c] - u[n]);
                    }
                    if ct != 0.0 {
                        let n = self.index(i, j + 1, k);
                        out[c] += ct * (u[n] - u[c]);
                        out[n] += ct * (u[c] - u[n]);
                    }
                }
            }
        }
        out
    }
}

fn dft_tables(n: usize) -> (Vec<f64>, Vec<f64>) {
    let half = n / 2;
    let mut c = vec![0.0; (half + 1) * n];
    let mut s = vec![0.0; (half + 1) * n];
    for m in 0..=half {
        for k in 0..n {
            // Reduce the product first so large indices keep full accuracy.
            let ang = 2.0 * PI * ((m * k) % n) as f64 / n as f64;
            c[m * n + k] = ang.cos();
            s[m * n + k] = ang.sin();
        }
    }
    (c, s)
}

fn banded_cholesky(band: &mut [f64], n: usize, bw: usize) -> Result<()> {
    let w = bw + 1;
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut d = band[j * w];
        for k in lo..j {
            let l = band[j * w + (j - k)];
            d -= l * l;
        }
        if !(d > 0.0) {
            return Err(Error::Poisson(format!("matrix not positive definite at row {j}")));
        }
        let d = d.sqrt();
        band[j * w] = d;
        for i in j + 1..(j + w).min(n) {
            let mut s = band[i * w + (i - j)];
            for k in i.saturating_sub(bw)..j {
                s -= band[i * w + (i - k)] * band[j * w + (j - k)];
            }
            band[i * w + (i - j)] = s / d;
        }
    }
    Ok(())
}

fn banded_solve(band: &[f64], n: usize, bw: usize, x: &mut [f64]) {
    let w = bw + 1;
    for i in 0..n {
        let mut s = x[i];
        for k in i.saturating_sub(bw)..i {
            s -= band[i * w + (i - k)] * x[k];
        }
        x[i] = s / band[i * w];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..(i + w).min(n) {
            s -= band[k * w + (k - i)] * x[k];
        }
        x[i] = s / band[i * w];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_solve(d: usize, n: usize) {
        let grid = BallGrid::new(d, 1.0, n);
        let (gint, vol) = grid.integrate(|x| 1.0 + 0.2 * x[0] + 0.1 * x[1] * x[1]);
        let lam = gint.iter().sum::<f64>() / vol.iter().sum::<f64>();
        let rhs: Vec<f64> = gint.iter().zip(&vol).map(|(g, v)| lam * v - g).collect();
        let u = grid.solve_neumann(&rhs).unwrap();
        let back = grid.apply(&u);
        let err = back.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "d={d}: operator residual {err}");
        let ring: f64 = u[..grid.n_phi].iter().sum();
        assert!(ring.abs() < 1e-12);
    }

    #[test]
    fn polar_solve_inverts_operator() {
        check_solve(2, 32);
    }

    #[test]
    fn spherical_solve_inverts_operator() {
        check_solve(3, 16);
    }

    #[test]
    fn volumes_add_up() {
        for (d, exact) in [(2, PI), (3, 4.0 * PI / 3.0)] {
            let (_, vol) = BallGrid::new(d, 1.0, 16).integrate(|_| 1.0);
            assert!((vol.iter().sum::<f64>() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn incompatible_data_rejected() {
        let grid = BallGrid::new(2, 1.0, 8);
        assert!(grid.solve_neumann(&vec![1.0; grid.len()]).is_err());
    }
}
