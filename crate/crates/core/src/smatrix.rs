//! Far-field operator and scattering matrix on the direction grid.

use std::f64::consts::PI;
use std::io::Write;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::geometry::SurfaceMesh;
use crate::impedance::ImpedanceModel;
use crate::scatter::{FarFieldGrid, ImpedanceSolver, ScatterOptions};

const I: c64 = c64::new(0.0, 1.0);

/// F_{pq} = u_∞(θ_p; α_q) with both θ and α running over the grid.
#[derive(Debug, Clone)]
pub struct FarFieldOperator {
    pub f: Mat<c64>,
    pub grid: FarFieldGrid,
    pub k: f64,
    pub gamma: c64,
}

pub fn far_field_operator(
    mesh: &SurfaceMesh,
    k: f64,
    model: &ImpedanceModel,
    grid: &FarFieldGrid,
    options: &ScatterOptions,
) -> Result<FarFieldOperator> {
    let solver = ImpedanceSolver::new(mesh, k, model, options)?;
    let f = solver.far_field_matrix(&grid.directions, &grid.directions);
    Ok(FarFieldOperator {
        f,
        grid: grid.clone(),
        k,
        gamma: solver.gamma(),
    })
}

fn sqrt_weights(grid: &FarFieldGrid) -> Vec<f64> {
    grid.weights.iter().map(|w| w.sqrt()).collect()
}

fn spectral_norm(m: &Mat<c64>) -> Result<f64> {
    let s = m.singular_values().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

impl FarFieldOperator {
    pub fn len(&self) -> usize {
        self.f.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.f.nrows() == 0
    }

    /// W^½ F W^½, the matrix of the integral operator in an orthonormal
    /// sampling basis.
    pub fn symmetric(&self) -> Mat<c64> {
        let r = sqrt_weights(&self.grid);
        Mat::from_fn(self.len(), self.len(), |p, q| self.f[(p, q)] * (r[p] * r[q]))
    }

    /// ‖F(θ,α) − F(−α,−θ)‖_F / ‖F‖_F.
    pub fn reciprocity_residual(&self) -> Result<f64> {
        let n = self.len();
        let anti: Vec<usize> = (0..n)
            .map(|i| {
                self.grid
                    .antipode(i)
                    .ok_or_else(|| Error::InvalidArgument("grid is not antipodally symmetric".into()))
            })
            .collect::<Result<_>>()?;
        let (mut num, mut den) = (0.0, 0.0);
        for q in 0..n {
            for p in 0..n {
                num += (self.f[(p, q)] - self.f[(anti[q], anti[p])]).norm_sqr();
                den += self.f[(p, q)].norm_sqr();
            }
        }
        Ok((num / den).sqrt())
    }

    /// ⟨g, F W g⟩_W / ⟨g, g⟩_W for grid samples g.
    pub fn rayleigh_quotient(&self, g: &[c64]) -> c64 {
        let w = &self.grid.weights;
        let n = self.len();
        let mut num = c64::new(0.0, 0.0);
        let mut den = 0.0;
        for p in 0..n {
            let fg: c64 = (0..n).map(|q| self.f[(p, q)] * w[q] * g[q]).sum();
            num += w[p] * g[p].conj() * fg;
            den += w[p] * g[p].norm_sqr();
        }
        num / den
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "p,q,theta_p,phi_p,theta_q,phi_q,weight_q,re_f,im_f")?;
        let g = &self.grid;
        for p in 0..self.len() {
            for q in 0..self.len() {
                let v = self.f[(p, q)];
                writeln!(
                    out,
                    "{p},{q},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    g.theta[p], g.phi[p], g.theta[q], g.phi[q], g.weights[q], v.re, v.im
                )?;
            }
        }
        Ok(())
    }
}

/// S = I + (ik/2π) F W, acting on grid samples.
#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    pub s: Mat<c64>,
    /// W^½ S W^−½, unitary exactly when S is unitary on L²(S²).
    pub symmetric: Mat<c64>,
    pub k: f64,
    pub gamma: c64,
}

pub fn smatrix(f: &FarFieldOperator) -> ScatteringMatrix {
    let n = f.len();
    let scale = I * f.k / (2.0 * PI);
    let w = &f.grid.weights;
    let r = sqrt_weights(&f.grid);
    let delta = |p: usize, q: usize| if p == q { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
    ScatteringMatrix {
        s: Mat::from_fn(n, n, |p, q| delta(p, q) + scale * f.f[(p, q)] * w[q]),
        symmetric: Mat::from_fn(n, n, |p, q| delta(p, q) + scale * f.f[(p, q)] * (r[p] * r[q])),
        k: f.k,
        gamma: f.gamma,
    }
}

impl ScatteringMatrix {
    /// ‖S S* − I‖₂ in L²(S²).
    pub fn unitarity_defect(&self) -> Result<f64> {
        let mut m = &self.symmetric * self.symmetric.adjoint();
        for i in 0..m.nrows() {
            m[(i, i)] -= c64::new(1.0, 0.0);
        }
        spectral_norm(&m)
    }

    /// Smallest and largest gain ‖Sx‖/‖x‖ over L²(S²).
    pub fn gain_bounds(&self) -> Result<(f64, f64)> {
        let s = self
            .symmetric
            .singular_values()
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(0.0, f64::max);
        Ok((lo, hi))
    }

    /// ‖Sx‖_W / ‖x‖_W for grid samples x.
    pub fn gain(&self, x: &[c64], grid: &FarFieldGrid) -> f64 {
        let n = self.s.nrows();
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..n {
            let sx: c64 = (0..n).map(|q| self.s[(p, q)] * x[q]).sum();
            num += grid.weights[p] * sx.norm_sqr();
            den += grid.weights[p] * x[p].norm_sqr();
        }
        (num / den).sqrt()
    }

    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        let evd = self
            .symmetric
            .eigen()
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        Ok(evd.S().column_vector().iter().copied().collect())
    }

    pub fn write_csv(&self, grid: &FarFieldGrid, mut out: impl Write) -> Result<()> {
        writeln!(out, "p,q,theta_p,phi_p,theta_q,phi_q,re_s,im_s")?;
        for p in 0..self.s.nrows() {
            for q in 0..self.s.ncols() {
                let v = self.s[(p, q)];
                writeln!(
                    out,
                    "{p},{q},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    grid.theta[p], grid.phi[p], grid.theta[q], grid.phi[q], v.re, v.im
                )?;
            }
        }
        Ok(())
    }
}

/// ‖S_γ (F_{γ₁})* − F_γ‖₂ / ‖F_γ‖₂ with γ₁(k) = conj(γ(conj k)).
pub fn conjugate_relation_check(
    mesh: &SurfaceMesh,
    k: f64,
    model: &ImpedanceModel,
    grid: &FarFieldGrid,
    options: &ScatterOptions,
) -> Result<f64> {
    let f = far_field_operator(mesh, k, model, grid, options)?;
    let f1 = if model.has_real_coefficients() {
        f.clone()
    } else {
        far_field_operator(mesh, k, &model.reflected(), grid, options)?
    };
    conjugate_defect(&f, &f1)
}

/// Defect of S_γ (F_{γ₁})* = F_γ for precomputed operators.
pub fn conjugate_defect(f: &FarFieldOperator, f1: &FarFieldOperator) -> Result<f64> {
    let s = smatrix(f);
    let fs = f.symmetric();
    let f1s = f1.symmetric();
    let lhs = &s.symmetric * f1s.adjoint();
    Ok(spectral_norm(&(&lhs - &fs))? / spectral_norm(&fs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;
    use crate::quadrature::legendre_all;
    use crate::sphere_oracle::mie_coefficients;

    fn operator(gamma: c64) -> FarFieldOperator {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let grid = FarFieldGrid::new(8, 16);
        far_field_operator(
            &mesh,
            0.5,
            &ImpedanceModel::constant(gamma),
            &grid,
            &ScatterOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn real_impedance_is_nearly_unitary_and_reciprocal() {
        let f = operator(c64::new(1.0, 0.0));
        assert!(f.reciprocity_residual().unwrap() < 1e-2);
        let s = smatrix(&f);
        let defect = s.unitarity_defect().unwrap();
        assert!(defect < 0.1, "{defect}");
        for z in s.eigenvalues().unwrap() {
            assert!((z.norm() - 1.0).abs() <= defect + 1e-9);
        }
    }

    fn random_samples(n: usize, seed: u64) -> Vec<c64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn absorbing_and_gain_impedances() {
        let f = operator(c64::new(0.0, -0.5));
        let s = smatrix(&f);
        for seed in 0..5 {
            assert!(s.gain(&random_samples(f.len(), seed), &f.grid) < 1.0);
        }
        let f = operator(c64::new(0.0, 0.5));
        let s = smatrix(&f);
        assert!((0..5).any(|seed| s.gain(&random_samples(f.len(), seed), &f.grid) > 1.0));
        assert!(s.gain_bounds().unwrap().1 > 1.0);
    }

    #[test]
    fn sphere_harmonic_eigenvalues() {
        let f = operator(c64::new(1.0, 0.0));
        let a = mie_coefficients(0.5, c64::new(1.0, 0.0), 20).unwrap();
        let top = 4.0 * PI * a[0].norm() / 0.5;
        for (n, an) in a.iter().enumerate().take(3) {
            let g: Vec<c64> = f
                .grid
                .directions
                .iter()
                .map(|d| c64::new(legendre_all(n, d.z)[n], 0.0))
                .collect();
            let q = f.rayleigh_quotient(&g);
            let exact = 4.0 * PI * an / (I * 0.5);
            assert!((q - exact).norm() < 0.02 * top, "n = {n}: {q} vs {exact}");
        }
    }

    #[test]
    fn conjugate_relation_for_complex_impedance() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let grid = FarFieldGrid::new(8, 16);
        let opts = ScatterOptions::default();
        let model = ImpedanceModel::constant(c64::new(1.0, 0.5));
        let defect = conjugate_relation_check(&mesh, 0.5, &model, &grid, &opts).unwrap();
        assert!(defect < 0.05, "{defect}");
        // Pairing γ with itself instead of its reflection breaks the relation.
        let f = far_field_operator(&mesh, 0.5, &model, &grid, &opts).unwrap();
        assert!(conjugate_defect(&f, &f).unwrap() > 0.1);
    }
}
