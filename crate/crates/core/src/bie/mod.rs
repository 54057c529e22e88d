//! Helmholtz layer potentials on flat-triangle meshes with centroid
//! collocation and piecewise-constant densities.
//!
//! Conventions: normals point out of the obstacle, into the exterior
//! domain. The double-layer operator K has kernel ∂G_k(x, s)/∂n(s), so that
//! on a closed surface K·1 = −½ at k = 0 and the exterior trace of the
//! Green representation reads (½I − K)u = −S v.

pub mod panel;

use std::f64::consts::PI;

use faer::{c64, Mat};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SurfaceMesh, Vec3};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex wavenumber k, in inverse length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber(pub Complex64);

impl Wavenumber {
    pub fn new(k: Complex64) -> Self {
        Self(k)
    }

    pub fn real(k: f64) -> Self {
        Self(Complex64::new(k, 0.0))
    }

    pub fn zero() -> Self {
        Self(Complex64::new(0.0, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.im == 0.0
    }
}

impl From<f64> for Wavenumber {
    fn from(k: f64) -> Self {
        Self::real(k)
    }
}

impl From<Complex64> for Wavenumber {
    fn from(k: Complex64) -> Self {
        Self(k)
    }
}

/// Admissible wavenumbers, in units of 1/diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityWindow {
    /// Bound on |k|·diameter.
    pub k_max: f64,
    /// Bound on |Im k|·diameter.
    pub im_k_max: f64,
}

impl Default for ValidityWindow {
    fn default() -> Self {
        Self {
            k_max: 1.0,
            im_k_max: 0.5,
        }
    }
}

impl ValidityWindow {
    pub fn check_imaginary(&self, k: Wavenumber, diameter: f64) -> Result<()> {
        if k.0.im.abs() * diameter > self.im_k_max {
            return Err(Error::WavenumberOutOfRange {
                k: k.0,
                reason: format!("|Im k|·diameter must not exceed {}", self.im_k_max),
            });
        }
        Ok(())
    }

    pub fn check(&self, k: Wavenumber, diameter: f64) -> Result<()> {
        self.check_imaginary(k, diameter)?;
        if k.0.norm() * diameter > self.k_max * (1.0 + 1e-12) {
            return Err(Error::WavenumberOutOfRange {
                k: k.0,
                reason: format!("|k|·diameter must not exceed {}", self.k_max),
            });
        }
        Ok(())
    }
}

/// Which layer potential a matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Single,
    Double,
}

/// Dense collocation matrix of a layer operator.
#[derive(Debug, Clone)]
pub struct LayerMatrix {
    entries: Mat<c64>,
    kind: LayerKind,
    k: Wavenumber,
}

impl LayerMatrix {
    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<c64> {
        self.entries
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }
}

/// Quadrature controls for assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Source panels whose centroid lies within `near_factor` × (longest
    /// mesh edge) of the collocation node get closed-form static integrals
    /// and a seven-point remainder rule; farther panels use the centroid
    /// rule.
    pub near_factor: f64,
    pub window: ValidityWindow,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            near_factor: 3.0,
            window: ValidityWindow::default(),
        }
    }
}

/// Free-space Helmholtz Green's function e^{ik|r−s|}/(4π|r−s|).
pub fn greens(k: Wavenumber, r: &Vec3, s: &Vec3) -> Result<Complex64> {
    let d = (r - s).norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(panel::greens_value(k.0, d))
}

/// ∂/∂k of [`greens`]: i e^{ik|r−s|}/4π.
pub fn greens_dk(k: Wavenumber, r: &Vec3, s: &Vec3) -> Result<Complex64> {
    let d = (r - s).norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(I * (I * k.0 * d).exp() / (4.0 * PI))
}

/// Pointwise double-layer kernel ∂G_k(x, s)/∂n(s).
pub fn double_layer_kernel(k: Wavenumber, x: &Vec3, s: &Vec3, n_s: &Vec3) -> Result<Complex64> {
    let d = x - s;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let k = k.0;
    Ok(d.dot(n_s) * (1.0 - I * k * r) * (I * k * r).exp() / (4.0 * PI * r * r * r))
}

pub fn assemble_single_layer(mesh: &SurfaceMesh, k: Wavenumber) -> Result<LayerMatrix> {
    let (s, _) = assemble(mesh, k, true, false, &AssemblyOptions::default())?;
    Ok(LayerMatrix {
        entries: s.expect("single layer requested"),
        kind: LayerKind::Single,
        k,
    })
}

pub fn assemble_double_layer(mesh: &SurfaceMesh, k: Wavenumber) -> Result<LayerMatrix> {
    let (_, d) = assemble(mesh, k, false, true, &AssemblyOptions::default())?;
    Ok(LayerMatrix {
        entries: d.expect("double layer requested"),
        kind: LayerKind::Double,
        k,
    })
}

/// Single- and double-layer matrices at one wavenumber.
#[derive(Debug, Clone)]
pub struct LayerPair {
    pub single: Mat<c64>,
    pub double: Mat<c64>,
    pub k: Wavenumber,
}

pub fn assemble_layers(mesh: &SurfaceMesh, k: Wavenumber, options: &AssemblyOptions) -> Result<LayerPair> {
    let (s, d) = assemble(mesh, k, true, true, options)?;
    Ok(LayerPair {
        single: s.expect("single layer requested"),
        double: d.expect("double layer requested"),
        k,
    })
}

type LayerParts = (Option<Mat<c64>>, Option<Mat<c64>>);

fn assemble(
    mesh: &SurfaceMesh,
    k: Wavenumber,
    want_single: bool,
    want_double: bool,
    options: &AssemblyOptions,
) -> Result<LayerParts> {
    options.window.check_imaginary(k, mesh.characteristic_diameter())?;
    let n = mesh.panel_count();
    let near_radius = options.near_factor * mesh.max_panel_size();
    let kv = k.0;
    let centroids = mesh.centroids();
    let normals = mesh.normals();
    let areas = mesh.areas();
    let zero = c64::new(0.0, 0.0);

    // Columns are source panels; each one is filled independently.
    let fill = |j: usize, single: Option<&mut [c64]>, double: Option<&mut [c64]>| {
        let tri = mesh.panel_vertices(j);
        let (cj, nj, aj) = (centroids[j], normals[j], areas[j]);
        let mut single = single;
        let mut double = double;
        for i in 0..n {
            let x = centroids[i];
            if i == j {
                if let Some(col) = single.as_deref_mut() {
                    col[i] = panel::self_single(kv, &tri, &nj) / (4.0 * PI);
                }
                if let Some(col) = double.as_deref_mut() {
                    col[i] = zero;
                }
                continue;
            }
            let d = x - cj;
            let r = d.norm();
            let near = r < near_radius;
            if let Some(col) = single.as_deref_mut() {
                col[i] = if near {
                    (panel::laplace_single_static(&x, &tri, &nj) + panel::single_remainder_quadrature(kv, &x, &tri, aj))
                        / (4.0 * PI)
                } else {
                    panel::greens_value(kv, r) * aj
                };
            }
            if let Some(col) = double.as_deref_mut() {
                let static_part = -panel::solid_angle(&x, &tri) / (4.0 * PI);
                let remainder = if kv == zero {
                    zero
                } else if near {
                    panel::double_remainder_quadrature(kv, &x, &tri, &nj, aj) / (4.0 * PI)
                } else {
                    kv * kv * panel::double_layer_defect(kv * r) * (d.dot(&nj) / r) * aj / (4.0 * PI)
                };
                col[i] = static_part + remainder;
            }
        }
    };

    let mut single = want_single.then(|| Mat::<c64>::zeros(n, n));
    let mut double = want_double.then(|| Mat::<c64>::zeros(n, n));
    match (single.as_mut(), double.as_mut()) {
        (Some(s), Some(d)) => {
            s.par_col_iter_mut()
                .zip(d.par_col_iter_mut())
                .enumerate()
                .for_each(|(j, (mut cs, mut cd))| {
                    let cs = cs.as_mut().try_as_col_major_mut().expect("contiguous column");
                    let cd = cd.as_mut().try_as_col_major_mut().expect("contiguous column");
                    fill(j, Some(cs.as_slice_mut()), Some(cd.as_slice_mut()));
                });
        }
        (Some(m), None) | (None, Some(m)) => {
            let is_single = want_single;
            m.par_col_iter_mut().enumerate().for_each(|(j, mut c)| {
                let c = c.as_mut().try_as_col_major_mut().expect("contiguous column");
                if is_single {
                    fill(j, Some(c.as_slice_mut()), None);
                } else {
                    fill(j, None, Some(c.as_slice_mut()));
                }
            });
        }
        (None, None) => {}
    }
    Ok((single, double))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn greens_is_exactly_symmetric(
            r in prop::array::uniform3(-2.0f64..2.0),
            s in prop::array::uniform3(-2.0f64..2.0),
            kr in -1.0f64..1.0,
            ki in 0.0f64..1.0,
        ) {
            let (r, s) = (Vec3::from(r), Vec3::from(s));
            prop_assume!((r - s).norm() > 1e-6);
            let k = Wavenumber::new(Complex64::new(kr, ki));
            prop_assert_eq!(greens(k, &r, &s).unwrap(), greens(k, &s, &r).unwrap());
        }
    }

    #[test]
    fn greens_values() {
        let o = Vec3::zeros();
        let g = greens(Wavenumber::zero(), &o, &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((g.re - 1.0 / (4.0 * PI)).abs() < 1e-15 && g.im == 0.0);
        let g = greens(Wavenumber::real(1.0), &o, &Vec3::new(0.0, PI, 0.0)).unwrap();
        assert!((g - Complex64::new(-1.0 / (4.0 * PI * PI), 0.0)).norm() < 1e-15);
        let g = greens(Wavenumber::new(I), &o, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((g - Complex64::new((-1f64).exp() / (4.0 * PI), 0.0)).norm() < 1e-15);
        assert!(matches!(
            greens(Wavenumber::zero(), &o, &o),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn greens_is_symmetric() {
        let r = Vec3::new(0.3, -0.2, 1.1);
        let s = Vec3::new(-0.7, 0.4, 0.2);
        let k = Wavenumber::new(Complex64::new(0.7, -0.2));
        assert_eq!(greens(k, &r, &s).unwrap(), greens(k, &s, &r).unwrap());
    }

    #[test]
    fn greens_derivative_matches_central_difference() {
        let r = Vec3::new(0.3, -0.2, 1.1);
        let s = Vec3::new(-0.7, 0.4, 0.2);
        let h = 1e-4;
        for k in [Complex64::new(0.5, 0.0), Complex64::new(0.2, -0.1)] {
            let fd = (greens(Wavenumber::new(k + h), &r, &s).unwrap()
                - greens(Wavenumber::new(k - h), &r, &s).unwrap())
                / (2.0 * h);
            let exact = greens_dk(Wavenumber::new(k), &r, &s).unwrap();
            assert!((fd - exact).norm() < 1e-6 * exact.norm());
        }
    }

    fn row_sums(m: &Mat<c64>) -> Vec<c64> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).sum())
            .collect()
    }

    #[test]
    fn single_layer_of_constant_on_unit_sphere() {
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let s = assemble_single_layer(&mesh, Wavenumber::zero()).unwrap();
        for v in row_sums(s.entries()) {
            assert!((v.re - 1.0).abs() < 0.01 && v.im == 0.0, "{v}");
        }
    }

    #[test]
    fn single_layer_of_constant_at_half_wavenumber() {
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let k = c64::new(0.5, 0.0);
        let f = crate::sphere_oracle::SphericalFunctions::new(1, k).unwrap();
        let exact = c64::new(0.0, 1.0) * k * f.j[0] * f.h(0);
        let s = assemble_single_layer(&mesh, Wavenumber::new(k)).unwrap();
        for v in row_sums(s.entries()) {
            assert!((v - exact).norm() < 0.01 * exact.norm(), "{v} vs {exact}");
        }
    }

    #[test]
    fn double_layer_gauss_identity() {
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let d = assemble_double_layer(&mesh, Wavenumber::zero()).unwrap();
        for v in row_sums(d.entries()) {
            assert!((v.re + 0.5).abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn far_entries_match_point_kernels() {
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let c = mesh.centroids();
        let (i, j) = (
            0,
            (0..mesh.panel_count())
                .max_by(|&a, &b| (c[a] - c[0]).norm().partial_cmp(&(c[b] - c[0]).norm()).unwrap())
                .unwrap(),
        );
        let k = Wavenumber::real(0.5);
        let s0 = assemble_single_layer(&mesh, Wavenumber::zero()).unwrap();
        let d = (c[i] - c[j]).norm();
        let point = mesh.areas()[j] / (4.0 * PI * d);
        assert!((s0.entries()[(i, j)].re - point).abs() < 0.01 * point);

        let kd = assemble_double_layer(&mesh, k).unwrap();
        let point = double_layer_kernel(k, &c[i], &c[j], &mesh.normals()[j]).unwrap() * mesh.areas()[j];
        assert!((kd.entries()[(i, j)] - point).norm() < 0.01 * point.norm());
    }

    #[test]
    fn weighted_single_layer_is_symmetric_at_zero() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let s = assemble_single_layer(&mesh, Wavenumber::zero()).unwrap();
        let w = mesh.weights();
        let n = mesh.panel_count();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let a = w[i] * s.entries()[(i, j)];
                let b = w[j] * s.entries()[(j, i)];
                num += (a - b).norm_sqr();
                den += a.norm_sqr();
            }
        }
        assert!((num / den).sqrt() < 0.02);
    }

    #[test]
    fn imaginary_part_guard() {
        let mesh = make_sphere_mesh(1.0, 0).unwrap();
        let k = Wavenumber::new(Complex64::new(0.1, -1.0));
        assert!(matches!(
            assemble_single_layer(&mesh, k),
            Err(Error::WavenumberOutOfRange { .. })
        ));
    }
}
