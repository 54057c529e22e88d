//! End-to-end workflows across geometry, ntd, scatter, smatrix and resonance.

use scatterer_core::bie::Wavenumber;
use scatterer_core::geometry::{area, make_ellipsoid_mesh, make_sphere_mesh, write_off, SurfaceMesh, Vec3};
use scatterer_core::impedance::ImpedanceModel;
use scatterer_core::ntd::{build_ntd, spectrum};
use scatterer_core::resonance::{count_within, derivatives_from_coefficients, predict_poles_springy};
use scatterer_core::scatter::{solve_dirichlet, solve_impedance, FarFieldGrid, PlaneWave, ScatterOptions};
use scatterer_core::sphere_oracle::{mie_solve, mie_solve_dirichlet};
use scatterer_core::Complex64;

fn z_axis() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

#[test]
fn off_round_trip_preserves_spectrum() {
    let mesh = make_sphere_mesh(1.0, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.off");
    write_off(&mesh, std::fs::File::create(&path).unwrap()).unwrap();
    let loaded = SurfaceMesh::load_off(&path).unwrap();
    assert_eq!(loaded.panel_count(), mesh.panel_count());
    assert!((area(&loaded) - area(&mesh)).abs() < 1e-12);
    let a = spectrum(&build_ntd(&mesh, Wavenumber::zero()).unwrap()).unwrap();
    let b = spectrum(&build_ntd(&loaded, Wavenumber::zero()).unwrap()).unwrap();
    assert!((a.pairs[0].value - b.pairs[0].value).norm() < 1e-9);
}

#[test]
fn neumann_and_dirichlet_cross_sections_match_mie_at_level_3() {
    let mesh = make_sphere_mesh(1.0, 3).unwrap();
    let grid = FarFieldGrid::default();
    let k = 0.5;
    let wave = PlaneWave::new(z_axis(), Wavenumber::real(k)).unwrap();

    let neumann = solve_impedance(&mesh, k, &ImpedanceModel::constant(0.0), &wave, &grid).unwrap();
    let exact = mie_solve(k, Complex64::new(0.0, 0.0), 20, &z_axis(), &grid.directions).unwrap();
    assert!(
        (neumann.sigma_farfield / exact.sigma - 1.0).abs() < 0.02,
        "{} vs {}",
        neumann.sigma_farfield,
        exact.sigma
    );

    let soft = solve_dirichlet(&mesh, &wave, &grid, &ScatterOptions::default()).unwrap();
    let exact = mie_solve_dirichlet(k, 20, &z_axis(), &grid.directions).unwrap();
    assert!(
        (soft.sigma / exact.sigma - 1.0).abs() < 0.02,
        "{} vs {}",
        soft.sigma,
        exact.sigma
    );
}

#[test]
fn ellipsoid_coefficients_and_pole_counts() {
    let mesh = make_ellipsoid_mesh([1.0, 1.0, 0.5], 2).unwrap();
    let s = area(&mesh);
    let spec0 = spectrum(&build_ntd(&mesh, Wavenumber::zero()).unwrap()).unwrap();
    let partial: f64 = spec0.pairs.iter().take(31).map(|p| p.c.norm_sqr()).sum();
    assert!(partial > 0.9 * s && partial <= s * (1.0 + 1e-9), "{partial} vs {s}");

    let derivs = derivatives_from_coefficients(&spec0);
    let counts: Vec<usize> = [100.0, 1e3, 1e4, 1e5]
        .iter()
        .map(|&z| count_within(&predict_poles_springy(&spec0, &derivs, z, spec0.len()).unwrap(), 0.2))
        .collect();
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
    assert!(counts[3] > counts[0], "{counts:?}");

    // The sphere keeps a single admissible family.
    let sphere = make_sphere_mesh(1.0, 2).unwrap();
    let spec0 = spectrum(&build_ntd(&sphere, Wavenumber::zero()).unwrap()).unwrap();
    let derivs = derivatives_from_coefficients(&spec0);
    for z in [100.0, 1e4] {
        let poles = predict_poles_springy(&spec0, &derivs, z, spec0.len()).unwrap();
        assert!(poles.iter().all(|p| p.j == 0), "Z = {z}");
        assert_eq!(poles.len(), 2);
    }
}
