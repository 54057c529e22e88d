use std::path::{Path, PathBuf};

use scatterer_core::bie::ValidityWindow;
use scatterer_core::geometry::{make_ellipsoid_mesh, make_sphere_mesh, SurfaceMesh, Vec3};
use scatterer_core::impedance::ImpedanceModel;
use scatterer_core::ntd::NtdOptions;
use scatterer_core::scatter::{FarFieldGrid, ScatterOptions};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    #[serde(default)]
    pub wavenumbers: Vec<f64>,
    pub impedance: Option<ImpedanceModel>,
    #[serde(default)]
    pub boundary: Boundary,
    pub incident_direction: Option<[f64; 3]>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub far_field_grid: GridConfig,
    pub resonances: Option<ResonanceConfig>,
    pub dirichlet_limit: Option<LimitConfig>,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    Sphere { radius: f64, level: u32 },
    Ellipsoid { axes: [f64; 3], level: u32 },
    Off { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Impedance,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted condition estimate of ½I − K.
    pub trace_condition: f64,
    /// Condition estimate of I − γD beyond which a solve aborts as resonant.
    pub resonance_condition: f64,
    /// Validity window: |k|·diameter ≤ k_max and |Im k|·diameter ≤ im_k_max.
    pub k_max: f64,
    pub im_k_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let window = ValidityWindow::default();
        Self {
            trace_condition: NtdOptions::default().max_condition,
            resonance_condition: ScatterOptions::default().max_condition,
            k_max: window.k_max,
            im_k_max: window.im_k_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub polar: usize,
    pub azimuth: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { polar: 16, azimuth: 32 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    /// Springy-coating stiffness values Z.
    pub z: Vec<f64>,
    /// Modes j < j_max are considered.
    pub j_max: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub deltas: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Compare the unitarity defect with the next coarser generated mesh.
    pub refinement_check: bool,
    pub include_resonances: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            refinement_check: true,
            include_resonances: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let MeshSource::Off { path: mesh_path } = &mut config.mesh {
            if mesh_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh_path = dir.join(&*mesh_path);
                }
            }
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(k) = self.wavenumbers.iter().find(|k| !k.is_finite() || **k < 0.0) {
            return bad(format!("wavenumbers must be finite and nonnegative, got {k}"));
        }
        if let Some(model) = &self.impedance {
            model
                .validate()
                .map_err(|e| CliError::Config(format!("impedance: {e}")))?;
        }
        let t = &self.tolerances;
        if !(t.trace_condition > 1.0 && t.resonance_condition > 1.0 && t.k_max > 0.0 && t.im_k_max >= 0.0) {
            return bad("tolerances must be positive (condition limits > 1)".into());
        }
        if self.far_field_grid.polar == 0 || self.far_field_grid.azimuth == 0 {
            return bad("far_field_grid needs at least one node in each direction".into());
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<SurfaceMesh, CliError> {
        let mesh = match &self.mesh {
            MeshSource::Sphere { radius, level } => make_sphere_mesh(*radius, *level),
            MeshSource::Ellipsoid { axes, level } => make_ellipsoid_mesh(*axes, *level),
            MeshSource::Off { path } => SurfaceMesh::load_off(path),
        };
        mesh.map_err(|e| CliError::Config(format!("mesh: {e}")))
    }

    /// The next coarser generated mesh, for refinement comparisons.
    pub fn coarser_mesh(&self) -> Result<Option<SurfaceMesh>, CliError> {
        let mesh = match &self.mesh {
            MeshSource::Sphere { radius, level } if *level > 0 => Some(make_sphere_mesh(*radius, level - 1)),
            MeshSource::Ellipsoid { axes, level } if *level > 0 => Some(make_ellipsoid_mesh(*axes, level - 1)),
            _ => None,
        };
        mesh.transpose().map_err(|e| CliError::Config(format!("mesh: {e}")))
    }

    pub fn is_unit_sphere(&self) -> bool {
        matches!(self.mesh, MeshSource::Sphere { radius, .. } if radius == 1.0)
    }

    pub fn ntd_options(&self) -> NtdOptions {
        let mut o = NtdOptions::with_window(ValidityWindow {
            k_max: self.tolerances.k_max,
            im_k_max: self.tolerances.im_k_max,
        });
        o.max_condition = self.tolerances.trace_condition;
        o
    }

    pub fn scatter_options(&self) -> ScatterOptions {
        ScatterOptions {
            ntd: self.ntd_options(),
            max_condition: self.tolerances.resonance_condition,
        }
    }

    pub fn grid(&self) -> FarFieldGrid {
        FarFieldGrid::new(self.far_field_grid.polar, self.far_field_grid.azimuth)
    }

    pub fn require_wavenumbers(&self, positive: bool) -> Result<&[f64], CliError> {
        if self.wavenumbers.is_empty() {
            return Err(CliError::Config("`wavenumbers` must list at least one value".into()));
        }
        if positive && self.wavenumbers.iter().any(|&k| k <= 0.0) {
            return Err(CliError::Config("this command needs wavenumbers k > 0".into()));
        }
        Ok(&self.wavenumbers)
    }

    pub fn require_impedance(&self) -> Result<&ImpedanceModel, CliError> {
        self.impedance
            .as_ref()
            .ok_or_else(|| CliError::Config("`impedance` block is required for this command".into()))
    }

    pub fn require_direction(&self) -> Result<Vec3, CliError> {
        let d = self
            .incident_direction
            .ok_or_else(|| CliError::Config("`incident_direction` is required for this command".into()))?;
        let v = Vec3::new(d[0], d[1], d[2]);
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(CliError::Config(format!(
                "incident_direction must be a unit vector, |α| = {}",
                v.norm()
            )));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, String> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.check().map_err(|e| e.to_string())?;
        Ok(c)
    }

    #[test]
    fn minimal_config() {
        let c = parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}}"#).unwrap();
        assert!(c.is_unit_sphere());
        assert!(c.impedance.is_none());
        assert_eq!(c.boundary, Boundary::Impedance);
        assert_eq!(c.grid().len(), 512);
    }

    #[test]
    fn full_config() {
        let c = parse(
            r#"{
                "mesh": {"type": "ellipsoid", "axes": [1.0, 1.0, 0.5], "level": 1},
                "wavenumbers": [0.1, 0.5],
                "impedance": {"type": "constant", "gamma": [1.0, 0.5]},
                "incident_direction": [0.0, 0.0, 1.0],
                "tolerances": {"k_max": 1.2},
                "far_field_grid": {"polar": 8, "azimuth": 16},
                "resonances": {"z": [100.0], "j_max": 4},
                "dirichlet_limit": {"deltas": [0.0], "t": [10.0, 100.0]},
                "validation": {"include_resonances": false}
            }"#,
        )
        .unwrap();
        assert!(!c.is_unit_sphere());
        assert_eq!(c.tolerances.k_max, 1.2);
        assert_eq!(c.tolerances.im_k_max, 0.5);
        assert!(c.validation.refinement_check);
        assert_eq!(c.require_direction().unwrap(), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}, "gamma": 1.0}"#).is_err());
        assert!(parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2, "extra": 1}}"#).is_err());
        assert!(parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}, "tolerances": {"tol": 1}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}, "wavenumbers": [-1.0]}"#).is_err());
        assert!(parse(
            r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}, "impedance": {"type": "springy", "Z": -1.0}}"#
        )
        .is_err());
        let c = parse(r#"{"mesh": {"type": "sphere", "radius": 1.0, "level": 2}, "incident_direction": [1, 1, 0]}"#)
            .unwrap();
        assert!(c.require_direction().is_err());
        assert!(c.require_impedance().is_err());
    }
}
