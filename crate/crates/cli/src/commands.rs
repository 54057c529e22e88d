use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use scatterer_core::bie::Wavenumber;
use scatterer_core::geometry::SurfaceMesh;
use scatterer_core::ntd::{build_ntd_with, spectrum as ntd_spectrum, track, SpectrumResult};
use scatterer_core::resonance::{gpr_condition_check, sweep_springy, write_sweep_csv, PoleClass, SweepRow};
use scatterer_core::scatter::{
    cross_section_flux, dirichlet_limit_sweep, solve_dirichlet, write_far_field_csv, write_sigma_csv, FarField,
    FarFieldGrid, ImpedanceSolver, PlaneWave,
};
use scatterer_core::smatrix::{conjugate_defect, far_field_operator, smatrix as build_smatrix};
use scatterer_core::sphere_oracle::{mie_solve, mie_solve_dirichlet, MieSolution};
use scatterer_core::validation::{run_suite, Fixture, SuiteOptions};
use scatterer_core::Complex64;
use serde::Serialize;

use crate::config::{Boundary, MeshSource, RunConfig};
use crate::error::CliError;

/// Spherical-harmonic truncation for the Mie oracle.
const MIE_ORDER: usize = 30;
/// Relative tolerance of the resonance classification in gpr.csv.
const GPR_TOLERANCE: f64 = 1e-3;

fn write_file(dir: &Path, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let path = dir.join(name);
    std::fs::write(&path, buf).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn label(config: &RunConfig) -> String {
    match &config.mesh {
        MeshSource::Sphere { level, .. } => format!("sphere_L{level}"),
        MeshSource::Ellipsoid { level, .. } => format!("ellipsoid_L{level}"),
        MeshSource::Off { path } => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "mesh".into()),
    }
}

pub fn spectrum(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ks = config.require_wavenumbers(false)?;
    let mesh = config.mesh()?;
    let options = config.ntd_options();
    let spectra: Vec<SpectrumResult> = ks
        .par_iter()
        .map(|&k| Ok(ntd_spectrum(&build_ntd_with(&mesh, Wavenumber::real(k), &options)?)?))
        .collect::<Result<_, CliError>>()?;

    // ids[i] is the track id of pair i of the current spectrum.
    let mut ids: Vec<Vec<usize>> = Vec::with_capacity(spectra.len());
    ids.push((0..spectra[0].len()).collect());
    for w in spectra.windows(2) {
        let perm = track(&w[0], &w[1])?;
        let prev = ids.last().expect("ids start non-empty");
        let mut next = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            next[p] = prev[i];
        }
        ids.push(next);
    }

    let rows = |with: fn(&mut Vec<u8>, f64, usize, usize, &scatterer_core::ntd::EigenPair) -> std::io::Result<()>,
                header: &str,
                buf: &mut Vec<u8>|
     -> Result<(), CliError> {
        writeln!(buf, "{header}")?;
        for ((k, spec), id) in ks.iter().zip(&spectra).zip(&ids) {
            let mut order: Vec<usize> = (0..spec.len()).collect();
            order.sort_by_key(|&i| id[i]);
            for i in order {
                with(buf, *k, id[i], i, &spec.pairs[i])?;
            }
        }
        Ok(())
    };
    write_file(out, "spectrum.csv", |buf| {
        rows(
            |b, k, t, j, p| {
                writeln!(
                    b,
                    "{k:.12e},{t},{j},{:.12e},{:.12e},{:.3e}",
                    p.value.re, p.value.im, p.residual
                )
            },
            "k,track_id,j,re_sigma,im_sigma,residual",
            buf,
        )
    })?;
    write_file(out, "coefficients.csv", |buf| {
        rows(
            |b, k, t, j, p| writeln!(b, "{k:.12e},{t},{j},{:.12e},{:.12e}", p.c.re, p.c.im),
            "k,track_id,j,re_c,im_c",
            buf,
        )
    })
}

struct ScatterRow {
    k: f64,
    far_field: FarField,
    sigma_farfield: f64,
    sigma_flux: f64,
    gamma: Option<Complex64>,
}

fn scatter_one(config: &RunConfig, mesh: &SurfaceMesh, grid: &FarFieldGrid, k: f64) -> Result<ScatterRow, CliError> {
    let wave = PlaneWave::new(config.require_direction()?, Wavenumber::real(k))?;
    let options = config.scatter_options();
    match config.boundary {
        Boundary::Impedance => {
            let model = config.require_impedance()?;
            let sol = ImpedanceSolver::new(mesh, k, model, &options)?.solve(&wave, grid)?;
            Ok(ScatterRow {
                k,
                far_field: sol.far_field,
                sigma_farfield: sol.sigma_farfield,
                sigma_flux: sol.sigma_flux,
                gamma: Some(sol.gamma),
            })
        }
        Boundary::Dirichlet => {
            let sol = solve_dirichlet(mesh, &wave, grid, &options)?;
            Ok(ScatterRow {
                k,
                sigma_flux: cross_section_flux(&sol.v, &sol.w, mesh.weights(), k),
                far_field: sol.far_field,
                sigma_farfield: sol.sigma,
                gamma: None,
            })
        }
    }
}

pub fn scatter(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ks = config.require_wavenumbers(true)?;
    let direction = config.require_direction()?;
    if config.boundary == Boundary::Impedance {
        config.require_impedance()?;
    }
    let mesh = config.mesh()?;
    let grid = config.grid();
    let results: Vec<ScatterRow> = ks
        .par_iter()
        .map(|&k| scatter_one(config, &mesh, &grid, k))
        .collect::<Result<_, _>>()?;

    write_file(out, "farfield.csv", |buf| {
        let rows: Vec<(f64, &FarField)> = results.iter().map(|r| (r.k, &r.far_field)).collect();
        Ok(write_far_field_csv(&rows, &grid, buf)?)
    })?;
    write_file(out, "sigma.csv", |buf| {
        let rows: Vec<(f64, f64, f64)> = results.iter().map(|r| (r.k, r.sigma_farfield, r.sigma_flux)).collect();
        Ok(write_sigma_csv(&rows, buf)?)
    })?;
    if !config.is_unit_sphere() {
        return Ok(());
    }
    let oracle: Vec<MieSolution> = results
        .iter()
        .map(|r| match r.gamma {
            Some(g) => mie_solve(r.k, g, MIE_ORDER, &direction, &grid.directions),
            None => mie_solve_dirichlet(r.k, MIE_ORDER, &direction, &grid.directions),
        })
        .collect::<Result<_, _>>()?;
    write_file(out, "sigma_oracle.csv", |buf| {
        writeln!(
            buf,
            "k,sigma_exact,sigma_farfield,sigma_flux,rel_error_farfield,rel_error_flux,rel_error_far_field_l2"
        )?;
        for (r, m) in results.iter().zip(&oracle) {
            let (num, den) = r
                .far_field
                .values
                .iter()
                .zip(&m.far_field)
                .zip(&grid.weights)
                .fold((0.0, 0.0), |(n, d), ((a, b), w)| {
                    (n + w * (a - b).norm_sqr(), d + w * b.norm_sqr())
                });
            writeln!(
                buf,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
                r.k,
                m.sigma,
                r.sigma_farfield,
                r.sigma_flux,
                (r.sigma_farfield - m.sigma).abs() / m.sigma,
                (r.sigma_flux - m.sigma).abs() / m.sigma,
                (num / den).sqrt()
            )?;
        }
        Ok(())
    })
}

fn class_name(c: PoleClass) -> &'static str {
    match c {
        PoleClass::Regular => "regular",
        PoleClass::SimplePole => "simple_pole",
        PoleClass::HigherOrder => "higher_order",
        PoleClass::Silent => "silent",
    }
}

pub fn resonances(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let block = config
        .resonances
        .as_ref()
        .ok_or_else(|| CliError::Config("`resonances` block is required for this command".into()))?;
    if block.z.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
        return Err(CliError::Config("resonances.z values must be positive".into()));
    }
    let mesh = config.mesh()?;
    let options = config.ntd_options();
    let spec0 = ntd_spectrum(&build_ntd_with(&mesh, Wavenumber::zero(), &options)?)?;
    let per_z: Vec<Vec<SweepRow>> = block
        .z
        .par_iter()
        .map(|&z| sweep_springy(&mesh, &spec0, &[z], block.j_max, &options))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut empty = Vec::new();
    for (z, r) in block.z.iter().zip(per_z) {
        if r.is_empty() {
            eprintln!("warning: no admissible modes for Z = {z}");
            empty.push(*z);
        }
        rows.extend(r);
    }
    write_file(out, "resonances.csv", |buf| Ok(write_sweep_csv(&rows, &empty, buf)?))?;

    if let Some(model) = &config.impedance {
        let reports = gpr_condition_check(&spec0, model, GPR_TOLERANCE)?;
        write_file(out, "gpr.csv", |buf| {
            writeln!(
                buf,
                "j,class,re_gamma_derivative,im_gamma_derivative,re_critical,im_critical"
            )?;
            for r in &reports {
                writeln!(
                    buf,
                    "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                    r.j,
                    class_name(r.class),
                    r.gamma_derivative.re,
                    r.gamma_derivative.im,
                    r.critical_derivative.re,
                    r.critical_derivative.im
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SmatrixSummary {
    k: f64,
    re_gamma: f64,
    im_gamma: f64,
    /// ‖SS* − I‖₂.
    unitarity_defect: f64,
    gain_min: f64,
    gain_max: f64,
    reciprocity_residual: f64,
    conjugate_defect: f64,
}

pub fn smatrix(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ks = config.require_wavenumbers(true)?;
    let model = config.require_impedance()?;
    let mesh = config.mesh()?;
    let grid = config.grid();
    let options = config.scatter_options();
    let reflected = (!model.has_real_coefficients()).then(|| model.reflected());
    let results = ks
        .par_iter()
        .map(|&k| {
            let f = far_field_operator(&mesh, k, model, &grid, &options)?;
            let conj = match &reflected {
                Some(m1) => conjugate_defect(&f, &far_field_operator(&mesh, k, m1, &grid, &options)?)?,
                None => conjugate_defect(&f, &f)?,
            };
            let s = build_smatrix(&f);
            let (gain_min, gain_max) = s.gain_bounds()?;
            let summary = SmatrixSummary {
                k,
                re_gamma: f.gamma.re,
                im_gamma: f.gamma.im,
                unitarity_defect: s.unitarity_defect()?,
                gain_min,
                gain_max,
                reciprocity_residual: f.reciprocity_residual()?,
                conjugate_defect: conj,
            };
            Ok((s, summary))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (i, (s, _)) in results.iter().enumerate() {
        write_file(out, &format!("smatrix_{i}.csv"), |buf| Ok(s.write_csv(&grid, buf)?))?;
    }
    let summaries: Vec<&SmatrixSummary> = results.iter().map(|(_, m)| m).collect();
    write_file(out, "smatrix.json", |buf| {
        serde_json::to_writer_pretty(&mut *buf, &summaries).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(buf)?;
        Ok(())
    })
}

pub fn validate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mesh = config.mesh()?;
    let unit_sphere = config.is_unit_sphere();
    let name = label(config);
    let coarse = if config.validation.refinement_check {
        config.coarser_mesh()?
    } else {
        None
    };
    let (fine, coarse) = rayon::join(
        || Fixture::new(mesh, unit_sphere, name.clone()),
        || {
            coarse
                .map(|m| Fixture::new(m, unit_sphere, format!("{name}_coarse")))
                .transpose()
        },
    );
    let (fine, coarse) = (fine?, coarse?);
    let checks = run_suite(
        &fine,
        coarse.as_ref(),
        SuiteOptions {
            include_resonances: config.validation.include_resonances,
        },
    );
    for c in &checks {
        println!("{c}");
    }
    write_file(out, "validation.json", |buf| {
        serde_json::to_writer_pretty(&mut *buf, &checks).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(buf)?;
        Ok(())
    })?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}

pub fn dirichlet_limit(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let block = config
        .dirichlet_limit
        .as_ref()
        .ok_or_else(|| CliError::Config("`dirichlet_limit` block is required for this command".into()))?;
    if block.t.is_empty() || block.deltas.is_empty() {
        return Err(CliError::Config(
            "dirichlet_limit needs at least one delta and one t".into(),
        ));
    }
    let ks = config.require_wavenumbers(true)?;
    let direction = config.require_direction()?;
    let mesh = config.mesh()?;
    let grid = config.grid();
    let options = config.scatter_options();
    let cells: Vec<(f64, f64)> = ks
        .iter()
        .flat_map(|&k| block.deltas.iter().map(move |&d| (k, d)))
        .collect();
    let sweeps = cells
        .par_iter()
        .map(|&(k, delta)| {
            let wave = PlaneWave::new(direction, Wavenumber::real(k))?;
            Ok(dirichlet_limit_sweep(&mesh, &wave, delta, &block.t, &grid, &options)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_file(out, "dirichlet_limit.csv", |buf| {
        writeln!(
            buf,
            "k,delta,t,boundary_error,far_field_error,rel_boundary_error,rel_far_field_error"
        )?;
        for (&(k, _), s) in cells.iter().zip(&sweeps) {
            for r in &s.rows {
                writeln!(
                    buf,
                    "{k:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e}",
                    s.delta,
                    r.t,
                    r.boundary_error,
                    r.far_field_error,
                    r.boundary_error / s.boundary_norm,
                    r.far_field_error / s.far_field_norm
                )?;
            }
        }
        Ok(())
    })
}
