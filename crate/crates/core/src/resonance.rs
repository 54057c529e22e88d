//! Low-frequency resonance poles: asymptotic prediction, refinement by
//! secant iteration on g_j(k) = 1 − γ(k) ς_j(k), and condition checks.

use std::f64::consts::PI;
use std::io::Write;

use faer::c64;
use serde::Serialize;

use crate::bie::Wavenumber;
use crate::error::{Error, Result};
use crate::geometry::SurfaceMesh;
use crate::impedance::ImpedanceModel;
use crate::ntd::{clusters, derivative_formula, follow_path, NtdOptions, SpectrumResult, TraceSystem, TrackedSubspace};

const ZERO: c64 = c64::new(0.0, 0.0);

/// Modes with |c_j|² below this fraction of max |c|² count as c_j = 0.
pub const SILENT_FRACTION: f64 = 1e-4;

/// Relative gap that separates eigenvalue clusters at k = 0.
const CLUSTER_GAP: f64 = 0.05;

/// Length of one tracking step from k = 0 towards a starting guess,
/// in units of 1/diameter.
const PATH_STEP: f64 = 0.025;

const MAX_SECANT: usize = 50;

/// Roots closer than this to k = 0 (in units of 1/diameter) are reported
/// as the k = 0 pole.
pub const ORIGIN_RADIUS: f64 = 0.02;

fn admissible(spec0: &SpectrumResult) -> Vec<bool> {
    let top = spec0.pairs.iter().map(|p| p.c.norm_sqr()).fold(0.0, f64::max);
    spec0
        .pairs
        .iter()
        .map(|p| p.c.norm_sqr() > SILENT_FRACTION * top)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedPole {
    pub j: usize,
    /// +1 or −1, the sign of the real part of the leading term.
    pub sign: i8,
    pub k: c64,
    pub c: c64,
}

/// k^± = ±1/√(Z|ς_j(0)|) + ς'_j(0)/(2Zς_j(0)²) for γ(k) = −Zk², over modes
/// j < j_max with c_j ≠ 0. `derivs[j]` is ς'_j(0).
pub fn predict_poles_springy(
    spec0: &SpectrumResult,
    derivs: &[c64],
    z: f64,
    j_max: usize,
) -> Result<Vec<PredictedPole>> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("Z must be positive, got {z}")));
    }
    if spec0.k.value() != ZERO {
        return Err(Error::InvalidArgument("spectrum must be computed at k = 0".into()));
    }
    let keep = admissible(spec0);
    let mut out = Vec::new();
    for (j, pair) in spec0.pairs.iter().enumerate().take(j_max.min(derivs.len())) {
        if !keep[j] {
            continue;
        }
        let s = pair.value;
        let lead = 1.0 / (z * s.norm()).sqrt();
        let shift = derivs[j] / (2.0 * z * s * s);
        for sign in [1i8, -1] {
            out.push(PredictedPole {
                j,
                sign,
                k: c64::new(sign as f64 * lead, 0.0) + shift,
                c: pair.c,
            });
        }
    }
    Ok(out)
}

/// ς'_j(0) = −i c_j²/4π for every mode of a k = 0 spectrum.
pub fn derivatives_from_coefficients(spec0: &SpectrumResult) -> Vec<c64> {
    spec0.pairs.iter().map(|p| derivative_formula(p.c)).collect()
}

/// Predicted poles inside |k| < radius.
pub fn count_within(poles: &[PredictedPole], radius: f64) -> usize {
    poles.iter().filter(|p| p.k.norm() < radius).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub j: usize,
    pub predicted_k: c64,
    pub refined_k: c64,
    /// |g_j(refined_k)|.
    pub residual: f64,
    pub iterations: usize,
    /// The mode belongs to a cluster of nearly equal eigenvalues at k = 0.
    pub cluster: bool,
    pub c: c64,
    /// |refined_k| · diameter ≤ ORIGIN_RADIUS: the pole at k = 0, displaced
    /// only by the discretization error of ς_j(0).
    pub at_origin: bool,
}

/// Tracks the k = 0 cluster of mode `j` to `k_guess` and solves
/// 1 − γ(k) ς_j(k) = 0 by secant iteration, re-tracking at every iterate.
pub fn refine_pole(
    mesh: &SurfaceMesh,
    model: &ImpedanceModel,
    spec0: &SpectrumResult,
    j: usize,
    k_guess: c64,
    options: &NtdOptions,
) -> Result<ResonanceReport> {
    Ok(refine_cluster(mesh, model, spec0, j, k_guess, options)?
        .into_iter()
        .find(|r| r.j == j)
        .expect("the target mode belongs to its own cluster"))
}

/// Refines against every branch of the cluster containing `j`. Reports are
/// ordered by decreasing |c|.
pub fn refine_cluster(
    mesh: &SurfaceMesh,
    model: &ImpedanceModel,
    spec0: &SpectrumResult,
    j: usize,
    k_guess: c64,
    options: &NtdOptions,
) -> Result<Vec<ResonanceReport>> {
    model.validate()?;
    if spec0.k.value() != ZERO {
        return Err(Error::InvalidArgument("spectrum must be computed at k = 0".into()));
    }
    let cluster = clusters(spec0, CLUSTER_GAP)
        .into_iter()
        .find(|c| c.contains(&j))
        .ok_or_else(|| Error::InvalidArgument(format!("mode {j} out of range")))?;
    let start = TrackedSubspace::from_pairs(spec0, &cluster);
    let steps = (k_guess.norm() * mesh.characteristic_diameter() / PATH_STEP).ceil() as usize;
    let at_guess = follow_path(mesh, &start, Wavenumber::new(k_guess), steps.max(1), options)?;
    let mut reports: Vec<ResonanceReport> = cluster
        .iter()
        .enumerate()
        .map(|(branch, &mode)| {
            secant(mesh, model, &at_guess, branch, options).map(|(k, residual, iterations)| ResonanceReport {
                j: mode,
                predicted_k: k_guess,
                refined_k: k,
                residual,
                iterations,
                cluster: cluster.len() > 1,
                c: spec0.pairs[mode].c,
                at_origin: k.norm() * mesh.characteristic_diameter() <= ORIGIN_RADIUS,
            })
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| b.c.norm().total_cmp(&a.c.norm()));
    Ok(reports)
}

fn secant(
    mesh: &SurfaceMesh,
    model: &ImpedanceModel,
    at_guess: &TrackedSubspace,
    branch: usize,
    options: &NtdOptions,
) -> Result<(c64, f64, usize)> {
    let mut current = at_guess.clone();
    let g = |k: c64, current: &mut TrackedSubspace| -> Result<c64> {
        *current = follow_path(mesh, current, Wavenumber::new(k), 1, options)?;
        Ok(1.0 - model.gamma(k) * current.values[branch])
    };
    let scale = 1.0 / mesh.characteristic_diameter();
    let mut x0 = at_guess.k.value();
    let mut f0 = 1.0 - model.gamma(x0) * at_guess.values[branch];
    let mut x1 = x0 + c64::new(1e-4 * x0.norm().max(scale), 0.0);
    let mut f1 = g(x1, &mut current)?;
    for iteration in 1..=MAX_SECANT {
        if f1.norm() <= 1e-12 {
            return Ok((x1, f1.norm(), iteration));
        }
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        let step = (x2 - x1).norm();
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = g(x1, &mut current)?;
        if step <= 1e-13 * x1.norm().max(scale) {
            if f1.norm() <= 1e-10 {
                return Ok((x1, f1.norm(), iteration));
            }
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SECANT,
        residual: f1.norm(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub z: f64,
    pub j: usize,
    pub sign: i8,
    pub predicted: c64,
    pub refined: c64,
    pub gap: f64,
    pub residual: f64,
    pub iterations: usize,
    pub c: c64,
}

/// Predicts and refines springy-coating poles for each Z in `z_list`.
pub fn sweep_springy(
    mesh: &SurfaceMesh,
    spec0: &SpectrumResult,
    z_list: &[f64],
    j_max: usize,
    options: &NtdOptions,
) -> Result<Vec<SweepRow>> {
    let derivs = derivatives_from_coefficients(spec0);
    let mut rows = Vec::new();
    for &z in z_list {
        let model = ImpedanceModel::springy(z);
        for p in predict_poles_springy(spec0, &derivs, z, j_max)? {
            let r = refine_pole(mesh, &model, spec0, p.j, p.k, options)?;
            rows.push(SweepRow {
                z,
                j: p.j,
                sign: p.sign,
                predicted: p.k,
                refined: r.refined_k,
                gap: (r.refined_k - p.k).norm(),
                residual: r.residual,
                iterations: r.iterations,
                c: p.c,
            });
        }
    }
    Ok(rows)
}

/// Largest |k⁺ + conj(k⁻)| over the ± pairs of a sweep.
pub fn conjugate_pair_defect(rows: &[SweepRow]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in rows.iter().filter(|r| r.sign > 0) {
        if let Some(b) = rows.iter().find(|b| b.sign < 0 && b.j == a.j && b.z == a.z) {
            worst = worst.max((a.refined + b.refined.conj()).norm());
        }
    }
    worst
}

/// Sweep rows as CSV; each Z in `empty` gets a warning row because no mode
/// had c_j above the admissibility threshold.
pub fn write_sweep_csv(rows: &[SweepRow], empty: &[f64], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "z,j,sign,re_predicted,im_predicted,re_refined,im_refined,gap,residual,re_c,im_c,note"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.3e},{:.12e},{:.12e},",
            r.z,
            r.j,
            r.sign,
            r.predicted.re,
            r.predicted.im,
            r.refined.re,
            r.refined.im,
            r.gap,
            r.residual,
            r.c.re,
            r.c.im
        )?;
    }
    for z in empty {
        writeln!(out, "{z},,,,,,,,,,,warning: no admissible modes")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularCheck {
    pub smallest: f64,
    pub largest: f64,
}

/// Extreme singular values of I − γ(k) D(k) at a (complex) wavenumber.
pub fn singular_value_check(
    mesh: &SurfaceMesh,
    model: &ImpedanceModel,
    k: c64,
    options: &NtdOptions,
) -> Result<SingularCheck> {
    let d = TraceSystem::new(mesh, Wavenumber::new(k), options)?.ntd_matrix().d;
    let gamma = model.gamma(k);
    let n = d.nrows();
    let m = faer::Mat::<c64>::from_fn(n, n, |i, j| {
        let id = if i == j { c64::new(1.0, 0.0) } else { ZERO };
        id - gamma * d[(i, j)]
    });
    let s = m.singular_values().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(SingularCheck {
        smallest: s.iter().copied().fold(f64::INFINITY, f64::min),
        largest: s.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleClass {
    /// 1/γ(0) is not an eigenvalue of D(0) for this mode.
    Regular,
    /// Resonant, c_j ≠ 0 and the non-degeneracy condition holds: first-order pole.
    SimplePole,
    /// Resonant with c_j ≠ 0 but γ'(0) = i c_j²/(4π ς_j(0)²): the pole order may exceed one.
    HigherOrder,
    /// Resonant but c_j = 0: no pole in the amplitude or cross-section.
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GprReport {
    pub j: usize,
    pub class: PoleClass,
    pub gamma_derivative: c64,
    /// i c_j²/(4π ς_j(0)²).
    pub critical_derivative: c64,
}

/// Classifies each k = 0 mode against 1/γ(0). `tol` is the relative
/// tolerance for both the resonance match and the derivative equality.
pub fn gpr_condition_check(spec0: &SpectrumResult, model: &ImpedanceModel, tol: f64) -> Result<Vec<GprReport>> {
    if spec0.k.value() != ZERO {
        return Err(Error::InvalidArgument("spectrum must be computed at k = 0".into()));
    }
    let g0 = model.gamma(ZERO);
    let dg0 = model.derivative(ZERO);
    let keep = admissible(spec0);
    Ok(spec0
        .pairs
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let s = p.value;
            let critical = c64::new(0.0, 1.0) * p.c * p.c / (4.0 * PI * s * s);
            let resonant = (g0 * s - 1.0).norm() <= tol;
            let class = if !resonant {
                PoleClass::Regular
            } else if !keep[j] {
                PoleClass::Silent
            } else if (dg0 - critical).norm() <= tol * critical.norm() {
                PoleClass::HigherOrder
            } else {
                PoleClass::SimplePole
            };
            GprReport {
                j,
                class,
                gamma_derivative: dg0,
                critical_derivative: critical,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;
    use crate::ntd::{build_ntd, spectrum};

    fn sphere_spec0(level: u32) -> (SurfaceMesh, SpectrumResult) {
        let mesh = make_sphere_mesh(1.0, level).unwrap();
        let spec = spectrum(&build_ntd(&mesh, Wavenumber::zero()).unwrap()).unwrap();
        (mesh, spec)
    }

    #[test]
    fn springy_prediction_uses_only_the_monopole() {
        let (_, spec) = sphere_spec0(2);
        let derivs = derivatives_from_coefficients(&spec);
        let poles = predict_poles_springy(&spec, &derivs, 100.0, 10).unwrap();
        assert_eq!(poles.len(), 2);
        assert!(poles.iter().all(|p| p.j == 0));
        let plus = poles.iter().find(|p| p.sign > 0).unwrap();
        assert!((plus.k - c64::new(0.1, -0.005)).norm() < 2e-3, "{}", plus.k);
        let poles = predict_poles_springy(&spec, &derivs, 400.0, 10).unwrap();
        let plus = poles.iter().find(|p| p.sign > 0).unwrap();
        assert!((plus.k - c64::new(0.05, -0.00125)).norm() < 5e-4);
    }

    #[test]
    fn predicted_pole_formula_on_exact_values() {
        // Exact sphere values: ς₀(0) = −1, ς'₀(0) = −i.
        let s = c64::new(-1.0, 0.0);
        let d = c64::new(0.0, -1.0);
        let k = 1.0 / (100.0 * s.norm()).sqrt() + d / (2.0 * 100.0 * s * s);
        assert!((k - c64::new(0.1, -0.005)).norm() < 1e-15);
    }

    #[test]
    fn refined_springy_pole_is_close_to_the_quadratic_root() {
        let (mesh, spec) = sphere_spec0(2);
        let model = ImpedanceModel::springy(100.0);
        let r = refine_pole(&mesh, &model, &spec, 0, c64::new(0.1, -0.005), &NtdOptions::default()).unwrap();
        let exact = (c64::new(0.0, -1.0) + c64::new(399.0, 0.0).sqrt()) / 200.0;
        assert!(r.residual <= 1e-10);
        assert!((r.refined_k - exact).norm() < 3e-3, "{} vs {exact}", r.refined_k);
        assert!(r.refined_k.im < 0.0);
        let sv = singular_value_check(&mesh, &model, r.refined_k, &NtdOptions::default()).unwrap();
        assert!(sv.smallest <= 1e-6 * sv.largest);
    }

    #[test]
    fn constant_resonant_impedance_has_a_pole_at_the_origin() {
        let (mesh, spec) = sphere_spec0(2);
        let r = refine_pole(
            &mesh,
            &ImpedanceModel::constant(-1.0),
            &spec,
            0,
            c64::new(0.02, 0.0),
            &NtdOptions::default(),
        )
        .unwrap();
        assert!(r.at_origin, "{}", r.refined_k);
    }

    #[test]
    fn gpr_classes_on_the_sphere() {
        let (_, spec) = sphere_spec0(2);
        let classes = |m: ImpedanceModel| -> Vec<PoleClass> {
            gpr_condition_check(&spec, &m, 0.02)
                .unwrap()
                .into_iter()
                .map(|r| r.class)
                .collect()
        };
        let c = classes(ImpedanceModel::constant(-1.0));
        assert_eq!(c[0], PoleClass::SimplePole);
        assert!(c[1..].iter().all(|&x| x == PoleClass::Regular));
        let c = classes(ImpedanceModel::Polynomial {
            coeffs: vec![c64::new(-1.0, 0.0), c64::new(0.0, 1.0)],
        });
        assert_eq!(c[0], PoleClass::HigherOrder);
        let c = classes(ImpedanceModel::constant(-2.0));
        assert_eq!(c[0], PoleClass::Regular);
        assert_eq!(&c[1..4], &[PoleClass::Silent; 3]);
    }
}
