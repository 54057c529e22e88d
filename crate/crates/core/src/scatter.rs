//! Exterior impedance and Dirichlet scattering, far fields and cross-sections.

use std::f64::consts::PI;
use std::io::Write;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, MatRef};
use serde::Serialize;

use crate::bie::{assemble_single_layer, Wavenumber};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceMesh, Vec3};
use crate::impedance::ImpedanceModel;
use crate::linalg::{condition_estimate, weighted_dot, weighted_norm};
use crate::ntd::{NtdOptions, TraceSystem};
use crate::quadrature::gauss_legendre;

const I: c64 = c64::new(0.0, 1.0);

/// Direction quadrature on S²: Gauss–Legendre in cos θ times a uniform
/// azimuthal rule.
#[derive(Debug, Clone)]
pub struct FarFieldGrid {
    pub directions: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl FarFieldGrid {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Self {
        let (x, w) = gauss_legendre(n_polar);
        let mut grid = Self {
            directions: Vec::with_capacity(n_polar * n_azimuth),
            weights: Vec::with_capacity(n_polar * n_azimuth),
            theta: Vec::with_capacity(n_polar * n_azimuth),
            phi: Vec::with_capacity(n_polar * n_azimuth),
        };
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).sqrt();
            for m in 0..n_azimuth {
                // Half-step offset keeps the grid free of antipodal ties
                // with the poles and symmetric under θ → −θ.
                let phi = (m as f64 + 0.5) * dphi;
                grid.directions.push(Vec3::new(st * phi.cos(), st * phi.sin(), *ct));
                grid.weights.push(wt * dphi);
                grid.theta.push(ct.acos());
                grid.phi.push(phi);
            }
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Index of the grid direction −d, if the grid contains it.
    pub fn antipode(&self, i: usize) -> Option<usize> {
        let target = -self.directions[i];
        self.directions.iter().position(|d| (d - target).norm() < 1e-12)
    }
}

impl Default for FarFieldGrid {
    fn default() -> Self {
        Self::new(16, 32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub direction: Vec3,
    pub k: Wavenumber,
}

impl PlaneWave {
    pub fn new(direction: Vec3, k: Wavenumber) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("incident direction must be nonzero".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "incident direction must be a unit vector, |α| = {norm}"
            )));
        }
        Ok(Self { direction, k })
    }

    /// e^{ik x·α} and its normal derivative at the collocation nodes.
    pub fn traces(&self, mesh: &SurfaceMesh) -> (Vec<c64>, Vec<c64>) {
        let k = self.k.value();
        let value: Vec<c64> = mesh
            .centroids()
            .iter()
            .map(|c| (I * k * c.dot(&self.direction)).exp())
            .collect();
        let normal = value
            .iter()
            .zip(mesh.normals())
            .map(|(u, n)| I * k * n.dot(&self.direction) * u)
            .collect();
        (value, normal)
    }
}

#[derive(Debug, Clone)]
pub struct FarField {
    pub values: Vec<c64>,
    /// (1/4π) Σ ω_q u_∞(θ_q).
    pub monopole: c64,
}

/// Rows e^{−ik θ·c_j} w_j/(4π) and −ik(θ·n_j) times the same, so that
/// u_∞ = E_u u + E_v v.
fn far_field_operators(mesh: &SurfaceMesh, k: c64, directions: &[Vec3]) -> (Mat<c64>, Mat<c64>) {
    let (m, n) = (directions.len(), mesh.panel_count());
    let c = mesh.centroids();
    let nr = mesh.normals();
    let w = mesh.weights();
    let mut eu = Mat::<c64>::zeros(m, n);
    let mut ev = Mat::<c64>::zeros(m, n);
    for j in 0..n {
        for (q, d) in directions.iter().enumerate() {
            let e = (-I * k * d.dot(&c[j])).exp() * (w[j] / (4.0 * PI));
            ev[(q, j)] = -e;
            eu[(q, j)] = -I * k * d.dot(&nr[j]) * e;
        }
    }
    (eu, ev)
}

/// u_∞(θ) = (1/4π) ∫ (u ∂_n e^{−ikθ·r} − v e^{−ikθ·r}) dS at the given
/// directions.
pub fn far_field_at(mesh: &SurfaceMesh, u: &[c64], v: &[c64], k: f64, directions: &[Vec3]) -> Vec<c64> {
    let (eu, ev) = far_field_operators(mesh, c64::new(k, 0.0), directions);
    (0..directions.len())
        .map(|q| (0..u.len()).map(|j| eu[(q, j)] * u[j] + ev[(q, j)] * v[j]).sum())
        .collect()
}

pub fn far_field(mesh: &SurfaceMesh, u: &[c64], v: &[c64], k: f64, grid: &FarFieldGrid) -> FarField {
    let values = far_field_at(mesh, u, v, k, &grid.directions);
    let monopole = values.iter().zip(&grid.weights).map(|(u, w)| u * *w).sum::<c64>() / (4.0 * PI);
    FarField { values, monopole }
}

/// Σ ω_q |u_∞(θ_q)|².
pub fn cross_section_farfield(ff: &FarField, grid: &FarFieldGrid) -> f64 {
    ff.values.iter().zip(&grid.weights).map(|(u, w)| w * u.norm_sqr()).sum()
}

/// (1/k) Im Σ w_i v_i conj(u_i).
pub fn cross_section_flux(v: &[c64], u: &[c64], w: &[f64], k: f64) -> f64 {
    weighted_dot(w, u, v).im / k
}

#[derive(Debug, Clone)]
pub struct ScatterSolution {
    /// ∂u/∂n of the scattered field at the nodes.
    pub v: Vec<c64>,
    /// Scattered field at the nodes, u = D v.
    pub u: Vec<c64>,
    pub far_field: FarField,
    pub sigma_farfield: f64,
    pub sigma_flux: f64,
    pub k: f64,
    pub gamma: c64,
    /// ‖(I − γD)v − f‖ / ‖f‖.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterOptions {
    pub ntd: NtdOptions,
    /// Condition estimates of A + γS above this abort as a resonance.
    pub max_condition: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            ntd: NtdOptions::default(),
            max_condition: 1e10,
        }
    }
}

/// Impedance problem at one real wavenumber, factorized once for many
/// incident waves. With A = ½I − K, (I − γD)v = f becomes (A + γS)v = A f.
pub struct ImpedanceSolver<'m> {
    mesh: &'m SurfaceMesh,
    system: TraceSystem,
    matrix: Mat<c64>,
    lu: PartialPivLu<c64>,
    gamma: c64,
    k: f64,
    pub condition: f64,
}

impl<'m> ImpedanceSolver<'m> {
    pub fn new(mesh: &'m SurfaceMesh, k: f64, model: &ImpedanceModel, options: &ScatterOptions) -> Result<Self> {
        model.validate()?;
        if !(k > 0.0) {
            return Err(Error::WavenumberOutOfRange {
                k: c64::new(k, 0.0),
                reason: "scattering needs a real wavenumber k > 0".into(),
            });
        }
        let system = TraceSystem::new(mesh, Wavenumber::real(k), &options.ntd)?;
        let gamma = model.gamma(c64::new(k, 0.0));
        let n = mesh.panel_count();
        let matrix = Mat::<c64>::from_fn(n, n, |i, j| system.a[(i, j)] + gamma * system.s[(i, j)]);
        let lu = matrix.partial_piv_lu();
        let condition = condition_estimate(&matrix, &lu);
        if !(condition < options.max_condition) {
            // Recover the offending eigenvalue from the near-null vector.
            let probe = Mat::<c64>::from_fn(n, 1, |i, _| c64::new(1.0 + (i % 7) as f64 * 0.1, 0.0));
            let x = lu.solve(&probe);
            let dx = system.apply_d(x.as_ref());
            let w = mesh.weights();
            let xv: Vec<c64> = (0..n).map(|i| x[(i, 0)]).collect();
            let dxv: Vec<c64> = (0..n).map(|i| dx[(i, 0)]).collect();
            let sigma = weighted_dot(w, &xv, &dxv) / weighted_dot(w, &xv, &xv);
            return Err(Error::Resonance {
                nearest_eigenvalue: sigma,
                distance: (1.0 - gamma * sigma).norm(),
            });
        }
        Ok(Self {
            mesh,
            system,
            matrix,
            lu,
            gamma,
            k,
            condition,
        })
    }

    pub fn gamma(&self) -> c64 {
        self.gamma
    }

    pub fn trace_system(&self) -> &TraceSystem {
        &self.system
    }

    /// Right-hand sides f = −(∂_n u_inc − γ u_inc) for a set of waves.
    fn data(&self, directions: &[Vec3]) -> Mat<c64> {
        let n = self.mesh.panel_count();
        let mut f = Mat::<c64>::zeros(n, directions.len());
        for (q, d) in directions.iter().enumerate() {
            let wave = PlaneWave {
                direction: *d,
                k: Wavenumber::real(self.k),
            };
            let (u, du) = wave.traces(self.mesh);
            for i in 0..n {
                f[(i, q)] = -(du[i] - self.gamma * u[i]);
            }
        }
        f
    }

    /// Boundary data (v, u) for each incident direction, as columns.
    pub fn solve_block(&self, directions: &[Vec3]) -> (Mat<c64>, Mat<c64>, Vec<f64>) {
        let f = self.data(directions);
        let af = &self.system.a * &f;
        let v = self.lu.solve(&af);
        let u = self.system.apply_d(v.as_ref());
        let residuals = (0..directions.len())
            .map(|q| {
                let (mut r, mut nf) = (0.0, 0.0);
                for i in 0..f.nrows() {
                    r += (v[(i, q)] - self.gamma * u[(i, q)] - f[(i, q)]).norm_sqr();
                    nf += f[(i, q)].norm_sqr();
                }
                (r / nf).sqrt()
            })
            .collect();
        (v, u, residuals)
    }

    pub fn solve(&self, wave: &PlaneWave, grid: &FarFieldGrid) -> Result<ScatterSolution> {
        if wave.k.value() != c64::new(self.k, 0.0) {
            return Err(Error::InvalidArgument(
                "incident wavenumber differs from the factorized one".into(),
            ));
        }
        let (v, u, residuals) = self.solve_block(&[wave.direction]);
        let v: Vec<c64> = (0..v.nrows()).map(|i| v[(i, 0)]).collect();
        let u: Vec<c64> = (0..u.nrows()).map(|i| u[(i, 0)]).collect();
        let ff = far_field(self.mesh, &u, &v, self.k, grid);
        Ok(ScatterSolution {
            sigma_farfield: cross_section_farfield(&ff, grid),
            sigma_flux: cross_section_flux(&v, &u, self.mesh.weights(), self.k),
            far_field: ff,
            k: self.k,
            gamma: self.gamma,
            residual: residuals[0],
            v,
            u,
        })
    }

    /// Far-field matrix F_{pq} = u_∞(θ_p; α_q).
    pub fn far_field_matrix(&self, incident: &[Vec3], observe: &[Vec3]) -> Mat<c64> {
        let (v, u, _) = self.solve_block(incident);
        let (eu, ev) = far_field_operators(self.mesh, c64::new(self.k, 0.0), observe);
        &eu * &u + &ev * &v
    }

    /// Relative residual of the factorized system (A + γS)x = b, for checks.
    pub fn system_matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }
}

pub fn solve_impedance(
    mesh: &SurfaceMesh,
    k: f64,
    model: &ImpedanceModel,
    wave: &PlaneWave,
    grid: &FarFieldGrid,
) -> Result<ScatterSolution> {
    ImpedanceSolver::new(mesh, k, model, &ScatterOptions::default())?.solve(wave, grid)
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    /// Neumann data of the scattered field.
    pub v: Vec<c64>,
    /// Dirichlet data w = −e^{ik r·α}.
    pub w: Vec<c64>,
    pub far_field: FarField,
    pub sigma: f64,
    pub condition: f64,
}

/// Sound-soft obstacle: the scattered field equals w = −u_inc on the
/// boundary, and v solves the first-kind system S v = −(½I − K) w.
pub fn solve_dirichlet(
    mesh: &SurfaceMesh,
    wave: &PlaneWave,
    grid: &FarFieldGrid,
    options: &ScatterOptions,
) -> Result<DirichletSolution> {
    let k = wave.k.value();
    if k.im != 0.0 || !(k.re > 0.0) {
        return Err(Error::WavenumberOutOfRange {
            k,
            reason: "scattering needs a real wavenumber k > 0".into(),
        });
    }
    let system = TraceSystem::new(mesh, wave.k, &options.ntd)?;
    let s = assemble_single_layer(mesh, wave.k)?.into_entries();
    let lu = s.partial_piv_lu();
    let condition = condition_estimate(&s, &lu);
    if !(condition < options.max_condition) {
        return Err(Error::IllConditioned {
            system: "single layer",
            condition,
        });
    }
    let (u_inc, _) = wave.traces(mesh);
    let n = mesh.panel_count();
    let w: Vec<c64> = u_inc.iter().map(|u| -u).collect();
    let wm = Mat::<c64>::from_fn(n, 1, |i, _| w[i]);
    let rhs = -(&system.a * &wm);
    let v = lu.solve(&rhs);
    let v: Vec<c64> = (0..n).map(|i| v[(i, 0)]).collect();
    let ff = far_field(mesh, &w, &v, k.re, grid);
    Ok(DirichletSolution {
        sigma: cross_section_farfield(&ff, grid),
        far_field: ff,
        v,
        w,
        condition,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub t: f64,
    /// ‖u^t − w‖ on the boundary.
    pub boundary_error: f64,
    /// ‖u^t_∞ − w_∞‖ on the direction sphere.
    pub far_field_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSweep {
    pub delta: f64,
    pub boundary_norm: f64,
    pub far_field_norm: f64,
    pub rows: Vec<LimitRow>,
}

/// Impedance solutions with γ = t e^{iδ} against the Dirichlet solution.
pub fn dirichlet_limit_sweep(
    mesh: &SurfaceMesh,
    wave: &PlaneWave,
    delta: f64,
    t_list: &[f64],
    grid: &FarFieldGrid,
    options: &ScatterOptions,
) -> Result<LimitSweep> {
    if !(delta.abs() < PI) {
        return Err(Error::InvalidArgument("δ must lie in (−π, π)".into()));
    }
    let dir = solve_dirichlet(mesh, wave, grid, options)?;
    let k = wave.k.value().re;
    let w = mesh.weights();
    let l2_sphere = |a: &[c64], b: &[c64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&grid.weights)
            .map(|((x, y), q)| q * (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let zero = vec![c64::new(0.0, 0.0); grid.len()];
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let model = ImpedanceModel::constant(c64::from_polar(t, delta));
        let sol = ImpedanceSolver::new(mesh, k, &model, options)?.solve(wave, grid)?;
        let diff: Vec<c64> = sol.u.iter().zip(&dir.w).map(|(a, b)| a - b).collect();
        rows.push(LimitRow {
            t,
            boundary_error: weighted_norm(w, &diff),
            far_field_error: l2_sphere(&sol.far_field.values, &dir.far_field.values),
        });
    }
    Ok(LimitSweep {
        delta,
        boundary_norm: weighted_norm(w, &dir.w),
        far_field_norm: l2_sphere(&dir.far_field.values, &zero),
        rows,
    })
}

/// Largest relative reciprocity defect |u_∞(θ; α) − u_∞(−α; −θ)| / |u_∞(θ; α)|
/// over the given (θ, α) pairs.
pub fn reciprocity_defect(solver: &ImpedanceSolver<'_>, pairs: &[(Vec3, Vec3)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (theta, alpha) in pairs {
        let forward = solver.far_field_matrix(&[*alpha], &[*theta])[(0, 0)];
        let backward = solver.far_field_matrix(&[-*theta], &[-*alpha])[(0, 0)];
        worst = worst.max((forward - backward).norm() / forward.norm());
    }
    worst
}

/// Least-squares fit of p(k) ≈ b/(k − k_pole) + a over real k; returns (b, a).
pub fn fit_residue(ks: &[f64], values: &[c64], k_pole: c64) -> (c64, c64) {
    // Normal equations for the basis {1/(k − k_pole), 1}.
    let x: Vec<c64> = ks.iter().map(|&k| 1.0 / (k - k_pole)).collect();
    let (mut s11, mut s12, s22) = (0.0, c64::new(0.0, 0.0), ks.len() as f64);
    let (mut r1, mut r2) = (c64::new(0.0, 0.0), c64::new(0.0, 0.0));
    for (xi, &p) in x.iter().zip(values) {
        s11 += xi.norm_sqr();
        s12 += xi.conj();
        r1 += xi.conj() * p;
        r2 += p;
    }
    // [s11 s12; conj(s12) s22] [b; a] = [r1; r2]
    let det = s11 * s22 - s12.norm_sqr();
    let b = (r1 * s22 - s12 * r2) / det;
    let a = (r2 * s11 - s12.conj() * r1) / det;
    (b, a)
}

/// Far-field samples (k, θ, φ, u_∞) for one or more wavenumbers as CSV.
pub fn write_far_field_csv(rows: &[(f64, &FarField)], grid: &FarFieldGrid, mut out: impl Write) -> Result<()> {
    writeln!(out, "k,theta,phi,re_u_inf,im_u_inf")?;
    for (k, ff) in rows {
        for (q, u) in ff.values.iter().enumerate() {
            writeln!(
                out,
                "{k:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                grid.theta[q], grid.phi[q], u.re, u.im
            )?;
        }
    }
    Ok(())
}

/// Cross-section table rows (k, σ_ff, σ_flux) as CSV.
pub fn write_sigma_csv(rows: &[(f64, f64, f64)], mut out: impl Write) -> Result<()> {
    writeln!(out, "k,sigma_farfield,sigma_flux")?;
    for (k, a, b) in rows {
        writeln!(out, "{k:.12e},{a:.12e},{b:.12e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;
    use crate::sphere_oracle;

    #[test]
    fn grid_weights() {
        let g = FarFieldGrid::default();
        assert_eq!(g.len(), 512);
        assert!((g.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        assert!(g.directions.iter().all(|d| (d.norm() - 1.0).abs() < 1e-14));
        assert!((0..g.len()).all(|i| g.antipode(i).is_some()));
    }

    #[test]
    fn cross_section_of_constant_amplitude() {
        let g = FarFieldGrid::default();
        let ff = FarField {
            values: vec![c64::new(1.0, 0.0); g.len()],
            monopole: c64::new(1.0, 0.0),
        };
        assert!((cross_section_farfield(&ff, &g) - 4.0 * PI).abs() < 1e-10);
        let ff = FarField {
            values: vec![c64::new(100.0, 0.0); g.len()],
            monopole: c64::new(100.0, 0.0),
        };
        assert!((cross_section_farfield(&ff, &g) / (4.0 * PI * 1e4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_has_zero_far_field() {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let zero = vec![c64::new(0.0, 0.0); mesh.panel_count()];
        let ff = far_field(&mesh, &zero, &zero, 0.5, &FarFieldGrid::new(4, 8));
        assert!(ff.values.iter().all(|u| u.norm() == 0.0));
    }

    #[test]
    fn sphere_impedance_matches_mie_level_two() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let grid = FarFieldGrid::new(8, 16);
        let alpha = Vec3::new(0.0, 0.0, 1.0);
        let wave = PlaneWave::new(alpha, Wavenumber::real(0.5)).unwrap();
        let sol = solve_impedance(&mesh, 0.5, &ImpedanceModel::constant(1.0), &wave, &grid).unwrap();
        let mie = sphere_oracle::mie_solve(0.5, c64::new(1.0, 0.0), 20, &alpha, &grid.directions).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(
            (sol.sigma_farfield / mie.sigma - 1.0).abs() < 0.05,
            "{} vs {}",
            sol.sigma_farfield,
            mie.sigma
        );
        assert!((sol.sigma_flux / sol.sigma_farfield - 1.0).abs() < 0.02);
    }

    #[test]
    fn dirichlet_low_frequency_amplitude() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let grid = FarFieldGrid::new(6, 12);
        let wave = PlaneWave::new(Vec3::new(0.0, 0.0, 1.0), Wavenumber::real(0.1)).unwrap();
        let sol = solve_dirichlet(&mesh, &wave, &grid, &ScatterOptions::default()).unwrap();
        let mie = sphere_oracle::mie_solve_dirichlet(0.1, 20, &wave.direction, &grid.directions).unwrap();
        for (u, m) in sol.far_field.values.iter().zip(&mie.far_field) {
            assert!((u - m).norm() < 0.05 * m.norm(), "{u} vs {m}");
        }
        assert!((sol.sigma / (4.0 * PI) - 1.0).abs() < 0.05);
    }

    #[test]
    fn resonance_is_reported() {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let spec = crate::ntd::spectrum(&crate::ntd::build_ntd(&mesh, Wavenumber::real(0.3)).unwrap()).unwrap();
        // Choose γ so that 1/γ hits the BEM eigenvalue nearest −1.
        let s0 = spec
            .values()
            .into_iter()
            .min_by(|a, b| (a + 1.0).norm().total_cmp(&(b + 1.0).norm()))
            .unwrap();
        let err = ImpedanceSolver::new(
            &mesh,
            0.3,
            &ImpedanceModel::constant(1.0 / s0),
            &ScatterOptions::default(),
        )
        .err()
        .expect("resonant system must be refused");
        match err {
            Error::Resonance {
                nearest_eigenvalue,
                distance,
            } => {
                assert!((nearest_eigenvalue - s0).norm() < 1e-6, "{nearest_eigenvalue} vs {s0}");
                assert!(distance < 1e-6);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn residue_fit_recovers_exact_model() {
        let ks = [0.005, 0.01, 0.02, 0.03, 0.05];
        let b = c64::new(0.3, -2.0);
        let a = c64::new(1.5, 0.25);
        let p: Vec<c64> = ks.iter().map(|k| b / *k + a).collect();
        let (fb, fa) = fit_residue(&ks, &p, c64::new(0.0, 0.0));
        assert!((fb - b).norm() < 1e-12 && (fa - a).norm() < 1e-10);
        let pole = c64::new(0.0, -1e-3);
        let p: Vec<c64> = ks.iter().map(|k| b / (*k - pole) + a).collect();
        let (fb, fa) = fit_residue(&ks, &p, pole);
        assert!((fb - b).norm() < 1e-12 && (fa - a).norm() < 1e-10);
    }
}
