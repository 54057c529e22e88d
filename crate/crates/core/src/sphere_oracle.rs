//! Closed-form reference solutions on the unit sphere.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::quadrature::legendre_all;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// j_n, y_n and their derivatives for n = 0..=nmax at a complex argument.
#[derive(Debug, Clone)]
pub struct SphericalFunctions {
    pub z: Complex64,
    pub j: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub dj: Vec<Complex64>,
    pub dy: Vec<Complex64>,
}

impl SphericalFunctions {
    /// Upward recurrence for y_n; Miller's downward recurrence for j_n,
    /// normalized with Σ (2n+1) j_n² = 1.
    pub fn new(nmax: usize, z: Complex64) -> Result<Self> {
        if z.norm() == 0.0 {
            return Err(Error::InvalidArgument(
                "spherical functions need a nonzero argument".into(),
            ));
        }
        let (s, c) = (z.sin(), z.cos());
        let mut y = Vec::with_capacity(nmax + 2);
        y.push(-c / z);
        y.push(-c / (z * z) - s / z);
        for n in 1..=nmax {
            let next = y[n] * ((2 * n + 1) as f64) / z - y[n - 1];
            y.push(next);
        }

        let start = nmax + 40 + (2.0 * z.norm()) as usize;
        let mut jj = vec![Complex64::new(0.0, 0.0); start + 2];
        jj[start] = Complex64::new(1e-30, 0.0);
        for n in (1..=start).rev() {
            jj[n - 1] = jj[n] * ((2 * n + 1) as f64) / z - jj[n + 1];
            if jj[n - 1].norm() > 1e150 {
                for v in jj[n - 1..].iter_mut() {
                    *v *= 1e-150;
                }
            }
        }
        let sum: Complex64 = jj.iter().enumerate().map(|(n, v)| v * v * (2 * n + 1) as f64).sum();
        let scale = 1.0 / sum.sqrt();
        // Fix the sign of the square root against j_0 = sin z / z.
        let j0 = s / z;
        let scale = if (jj[0] * scale - j0).norm() <= (jj[0] * scale + j0).norm() {
            scale
        } else {
            -scale
        };
        let j: Vec<Complex64> = jj[..nmax + 2].iter().map(|v| v * scale).collect();

        let deriv = |f: &[Complex64]| -> Vec<Complex64> {
            (0..=nmax)
                .map(|n| {
                    if n == 0 {
                        -f[1]
                    } else {
                        f[n - 1] - f[n] * ((n + 1) as f64) / z
                    }
                })
                .collect()
        };
        let dj = deriv(&j);
        let dy = deriv(&y);
        Ok(Self {
            z,
            j: j[..=nmax].to_vec(),
            y: y[..=nmax].to_vec(),
            dj,
            dy,
        })
    }

    /// h_n = j_n + i y_n.
    pub fn h(&self, n: usize) -> Complex64 {
        self.j[n] + I * self.y[n]
    }

    pub fn dh(&self, n: usize) -> Complex64 {
        self.dj[n] + I * self.dy[n]
    }

    /// h_n^{(2)} = j_n − i y_n.
    pub fn h2(&self, n: usize) -> Complex64 {
        self.j[n] - I * self.y[n]
    }

    pub fn dh2(&self, n: usize) -> Complex64 {
        self.dj[n] - I * self.dy[n]
    }
}

/// ς_n(k) = h_n(k)/(k h_n'(k)); the k = 0 limit is −1/(n+1).
pub fn ntd_eigenvalue_sphere(n: usize, k: Complex64) -> Result<Complex64> {
    if k.norm() == 0.0 {
        return Ok(Complex64::new(-1.0 / (n as f64 + 1.0), 0.0));
    }
    let f = SphericalFunctions::new(n + 1, k)?;
    let denom = k * f.dh(n);
    if denom.norm() < 1e-300 {
        return Err(Error::InvalidArgument(format!("k = {k} is a zero of h_{n}'")));
    }
    Ok(f.h(n) / denom)
}

/// Modal coefficients a_n of the scattered field for ∂u/∂r − γu = 0 on r = 1.
pub fn mie_coefficients(k: f64, gamma: Complex64, nmax: usize) -> Result<Vec<Complex64>> {
    let kc = Complex64::new(k, 0.0);
    let f = SphericalFunctions::new(nmax + 1, kc)?;
    (0..=nmax)
        .map(|n| {
            let den = kc * f.dh(n) - gamma * f.h(n);
            if den.norm() == 0.0 {
                return Err(Error::Resonance {
                    nearest_eigenvalue: 1.0 / gamma,
                    distance: 0.0,
                });
            }
            Ok(-(kc * f.dj[n] - gamma * f.j[n]) / den)
        })
        .collect()
}

/// a_n = −j_n/h_n for the sound-soft sphere.
pub fn mie_dirichlet_coefficients(k: f64, nmax: usize) -> Result<Vec<Complex64>> {
    let f = SphericalFunctions::new(nmax + 1, Complex64::new(k, 0.0))?;
    Ok((0..=nmax).map(|n| -f.j[n] / f.h(n)).collect())
}

#[derive(Debug, Clone)]
pub struct MieSolution {
    pub coefficients: Vec<Complex64>,
    pub far_field: Vec<Complex64>,
    pub sigma: f64,
}

/// u_∞(θ) = Σ_n (2n+1)/(ik) a_n P_n(θ·α).
pub fn mie_far_field(k: f64, coefficients: &[Complex64], alpha: &Vec3, directions: &[Vec3]) -> Vec<Complex64> {
    let nmax = coefficients.len() - 1;
    directions
        .iter()
        .map(|d| {
            let p = legendre_all(nmax, d.dot(alpha).clamp(-1.0, 1.0));
            coefficients
                .iter()
                .enumerate()
                .map(|(n, a)| a * p[n] * (2 * n + 1) as f64)
                .sum::<Complex64>()
                / (I * k)
        })
        .collect()
}

/// σ = (4π/k²) Σ (2n+1)|a_n|².
pub fn mie_cross_section(k: f64, coefficients: &[Complex64]) -> f64 {
    4.0 * PI / (k * k)
        * coefficients
            .iter()
            .enumerate()
            .map(|(n, a)| (2 * n + 1) as f64 * a.norm_sqr())
            .sum::<f64>()
}

pub fn mie_solve(k: f64, gamma: Complex64, nmax: usize, alpha: &Vec3, directions: &[Vec3]) -> Result<MieSolution> {
    let coefficients = mie_coefficients(k, gamma, nmax)?;
    Ok(MieSolution {
        far_field: mie_far_field(k, &coefficients, alpha, directions),
        sigma: mie_cross_section(k, &coefficients),
        coefficients,
    })
}

pub fn mie_solve_dirichlet(k: f64, nmax: usize, alpha: &Vec3, directions: &[Vec3]) -> Result<MieSolution> {
    let coefficients = mie_dirichlet_coefficients(k, nmax)?;
    Ok(MieSolution {
        far_field: mie_far_field(k, &coefficients, alpha, directions),
        sigma: mie_cross_section(k, &coefficients),
        coefficients,
    })
}

/// s_n = −(k h_n^{(2)'} − γ h_n^{(2)})/(k h_n' − γ h_n).
pub fn smatrix_diag_sphere(n: usize, k: Complex64, gamma: Complex64) -> Result<Complex64> {
    let f = SphericalFunctions::new(n + 1, k)?;
    let den = k * f.dh(n) - gamma * f.h(n);
    if den.norm() == 0.0 {
        return Err(Error::Resonance {
            nearest_eigenvalue: 1.0 / gamma,
            distance: 0.0,
        });
    }
    Ok(-(k * f.dh2(n) - gamma * f.h2(n)) / den)
}

/// k h_n'(k) − γ(k) h_n(k), whose roots are the poles of s_n.
pub fn pole_function(n: usize, k: Complex64, gamma: impl Fn(Complex64) -> Complex64) -> Result<Complex64> {
    let f = SphericalFunctions::new(n + 1, k)?;
    Ok(k * f.dh(n) - gamma(k) * f.h(n))
}

/// k h_n^{(2)'}(k) − γ(k) h_n^{(2)}(k), whose roots are the zeros of s_n.
pub fn zero_function(n: usize, k: Complex64, gamma: impl Fn(Complex64) -> Complex64) -> Result<Complex64> {
    let f = SphericalFunctions::new(n + 1, k)?;
    Ok(k * f.dh2(n) - gamma(k) * f.h2(n))
}

/// Secant iteration for a root of an analytic function.
pub fn secant_root(
    f: impl Fn(Complex64) -> Result<Complex64>,
    guess: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<Complex64> {
    let mut x0 = guess;
    let mut x1 = guess * (1.0 + 1e-4) + 1e-6;
    let mut f0 = f(x0)?;
    let mut f1 = f(x1)?;
    for _ in 0..max_iter {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        let step = (x2 - x1).norm();
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
        if step <= tol * x1.norm().max(1e-3) {
            return Ok(x1);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f1.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_forms_and_wronskian() {
        for z in [
            c(0.01, 0.0),
            c(0.5, 0.0),
            c(3.0, -0.4),
            c(0.2, 0.7),
            c(9.5, 0.0),
            c(0.0, 1.0),
        ] {
            let f = SphericalFunctions::new(30, z).unwrap();
            assert!((f.j[0] - z.sin() / z).norm() < 1e-13 * (z.sin() / z).norm().max(1.0));
            assert!((f.y[0] + z.cos() / z).norm() < 1e-13 * (z.cos() / z).norm());
            let j1 = z.sin() / (z * z) - z.cos() / z;
            assert!((f.j[1] - j1).norm() < 1e-12 * j1.norm().max(1e-3), "{z}");
            for n in 0..=30 {
                let w = f.j[n] * f.dy[n] - f.dj[n] * f.y[n];
                let expect = 1.0 / (z * z);
                assert!((w - expect).norm() < 1e-12 * expect.norm(), "n={n} z={z}: {w}");
            }
        }
    }

    #[test]
    fn ntd_eigenvalues() {
        for k in [c(0.5, 0.0), c(0.3, -0.2), c(1e-3, 0.0)] {
            let expect = 1.0 / (I * k - 1.0);
            assert!((ntd_eigenvalue_sphere(0, k).unwrap() - expect).norm() < 1e-13);
        }
        assert!((ntd_eigenvalue_sphere(0, c(0.5, 0.0)).unwrap() - c(-0.8, -0.4)).norm() < 1e-14);
        assert!((ntd_eigenvalue_sphere(2, c(1e-4, 0.0)).unwrap() - c(-1.0 / 3.0, 0.0)).norm() < 1e-6);
        assert_eq!(ntd_eigenvalue_sphere(2, c(0.0, 0.0)).unwrap(), c(-1.0 / 3.0, 0.0));
        let v = ntd_eigenvalue_sphere(0, c(0.0, 1.0)).unwrap();
        assert!((v - c(-0.5, 0.0)).norm() < 1e-14);
        let v = ntd_eigenvalue_sphere(3, c(0.0, 0.7)).unwrap();
        assert!(v.im.abs() < 1e-14 * v.norm());
    }

    #[test]
    fn mie_limits() {
        let k = 0.01;
        let a = mie_coefficients(k, c(-1.0, 0.0), 20).unwrap();
        let sigma = mie_cross_section(k, &a);
        assert!((sigma * k * k / (4.0 * PI) - 1.0).abs() < 1e-2, "{sigma}");

        let soft = mie_cross_section(0.5, &mie_dirichlet_coefficients(0.5, 20).unwrap());
        let hard_limit = mie_cross_section(0.5, &mie_coefficients(0.5, c(-1e6, 0.0), 20).unwrap());
        assert!((hard_limit - soft).abs() < 1e-3 * soft);

        // Low-frequency sound-soft sphere: u_∞ → −1.
        let dirs = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ];
        let alpha = Vec3::new(0.0, 0.0, 1.0);
        let sol = mie_solve_dirichlet(0.1, 20, &alpha, &dirs).unwrap();
        for u in &sol.far_field {
            assert!((u - c(-1.0, 0.0)).norm() < 0.15, "{u}");
        }
    }

    #[test]
    fn mie_optical_theorem() {
        let k = 0.5;
        let alpha = Vec3::new(0.0, 0.0, 1.0);
        for gamma in [c(1.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0)] {
            let sol = mie_solve(k, gamma, 25, &alpha, &[alpha]).unwrap();
            // σ = (4π/k) Im u_∞(α) for lossless scatterers.
            let forward = 4.0 * PI / k * sol.far_field[0].im;
            assert!((forward - sol.sigma).abs() < 1e-12 * sol.sigma, "{gamma}");
        }
        let tail = mie_coefficients(k, c(1.0, 0.0), 25).unwrap();
        assert!(tail[20].norm() < 1e-12);
    }

    #[test]
    fn smatrix_unitarity_and_absorption() {
        for n in 0..4 {
            let s = smatrix_diag_sphere(n, c(0.5, 0.0), c(1.0, 0.0)).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let s = smatrix_diag_sphere(n, c(0.5, 0.0), c(0.0, -0.5)).unwrap();
            assert!(s.norm() < 1.0);
            let s = smatrix_diag_sphere(n, c(0.5, 0.0), c(0.0, 0.5)).unwrap();
            assert!(s.norm() > 1.0);
        }
        let a = mie_coefficients(0.5, c(1.0, 0.0), 3).unwrap();
        let s = smatrix_diag_sphere(2, c(0.5, 0.0), c(1.0, 0.0)).unwrap();
        assert!((s - (1.0 + 2.0 * a[2])).norm() < 1e-13);
    }

    #[test]
    fn springy_pole_is_the_quadratic_root() {
        let z = 100.0;
        let gamma = |k: Complex64| -z * k * k;
        let root = secant_root(|k| pole_function(0, k, gamma), c(0.1, -0.005), 1e-14, 50).unwrap();
        // Z k² + i k − 1 = 0
        let exact = (-I + (c(-1.0, 0.0) + 4.0 * z).sqrt()) / (2.0 * z);
        assert!((root - exact).norm() < 1e-12, "{root} vs {exact}");
        assert!((exact - c(0.09987, -0.005)).norm() < 1e-5);
    }
}
