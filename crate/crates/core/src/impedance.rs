//! Impedance models γ(k) for the Robin condition ∂u/∂n − γu = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficient of −h k² quoted for the air/water springy coating.
pub const QUOTED_AIR_WATER_COEFFICIENT: f64 = 25800.0;

/// Spatially constant impedance as a function of the wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpedanceModel {
    Constant {
        #[serde(with = "crate::complex_serde")]
        gamma: Complex64,
    },
    /// γ(k) = Σ_m coeffs[m] k^m.
    Polynomial {
        #[serde(with = "crate::complex_serde::vec")]
        coeffs: Vec<Complex64>,
    },
    /// γ(k) = −Z k².
    Springy {
        #[serde(rename = "Z")]
        z: f64,
    },
    /// Gas layer of thickness `h` under a membrane, in a liquid.
    SpringyPhysical {
        rho_g: f64,
        c_g: f64,
        gamma_g: f64,
        h: f64,
        rho_l: f64,
        c_l: f64,
    },
    /// Springy coating with friction ε; ω = k c_l and
    /// γ = −βρ_l ω² (1 + iεωβ)/(1 + (εωβ)²).
    Friction {
        beta: f64,
        rho_l: f64,
        epsilon: f64,
        c_l: f64,
    },
}

impl ImpedanceModel {
    pub fn constant(gamma: impl Into<Complex64>) -> Self {
        Self::Constant { gamma: gamma.into() }
    }

    pub fn springy(z: f64) -> Self {
        Self::Springy { z }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::Constant { gamma } if !(gamma.re.is_finite() && gamma.im.is_finite()) => {
                Err(Error::InvalidArgument("impedance must be finite".into()))
            }
            Self::Constant { .. } => Ok(()),
            Self::Polynomial { coeffs } if coeffs.is_empty() => Err(Error::InvalidArgument(
                "polynomial impedance needs at least one coefficient".into(),
            )),
            Self::Polynomial { .. } => Ok(()),
            Self::Springy { z } => positive("Z", *z),
            Self::SpringyPhysical {
                rho_g,
                c_g,
                gamma_g,
                h,
                rho_l,
                c_l,
            } => {
                for (n, v) in [
                    ("rho_g", rho_g),
                    ("c_g", c_g),
                    ("gamma_g", gamma_g),
                    ("h", h),
                    ("rho_l", rho_l),
                    ("c_l", c_l),
                ] {
                    positive(n, *v)?;
                }
                Ok(())
            }
            Self::Friction {
                beta,
                rho_l,
                epsilon,
                c_l,
            } => {
                positive("beta", *beta)?;
                positive("rho_l", *rho_l)?;
                positive("c_l", *c_l)?;
                if epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("epsilon must be finite".into()))
                }
            }
        }
    }

    pub fn gamma(&self, k: Complex64) -> Complex64 {
        match self {
            Self::Constant { gamma } => *gamma,
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * k + c),
            Self::Springy { z } => -*z * k * k,
            Self::SpringyPhysical { .. } => -self.springy_z() * k * k,
            Self::Friction {
                beta,
                rho_l,
                epsilon,
                c_l,
            } => {
                let omega = k * c_l;
                let a = epsilon * beta;
                // (1 + iaω)/(1 + a²ω²) = 1/(1 − iaω)
                -beta * rho_l * omega * omega / (1.0 - I * a * omega)
            }
        }
    }

    /// dγ/dk.
    pub fn derivative(&self, k: Complex64) -> Complex64 {
        match self {
            Self::Constant { .. } => Complex64::new(0.0, 0.0),
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, (m, c)| acc * k + c * m as f64),
            Self::Springy { z } => -2.0 * z * k,
            Self::SpringyPhysical { .. } => -2.0 * self.springy_z() * k,
            Self::Friction {
                beta,
                rho_l,
                epsilon,
                c_l,
            } => {
                let omega = k * c_l;
                let a = epsilon * beta;
                let q = 1.0 - I * a * omega;
                -beta * rho_l * omega * (2.0 - I * a * omega) / (q * q) * c_l
            }
        }
    }

    /// The Schwarz reflection γ₁(k) = conj(γ(conj k)).
    pub fn reflected(&self) -> Self {
        match self {
            Self::Constant { gamma } => Self::Constant { gamma: gamma.conj() },
            Self::Polynomial { coeffs } => Self::Polynomial {
                coeffs: coeffs.iter().map(|c| c.conj()).collect(),
            },
            Self::Friction {
                beta,
                rho_l,
                epsilon,
                c_l,
            } => Self::Friction {
                beta: *beta,
                rho_l: *rho_l,
                epsilon: -epsilon,
                c_l: *c_l,
            },
            other => other.clone(),
        }
    }

    /// Whether γ(k) has real Taylor coefficients, so that γ₁ = γ.
    pub fn has_real_coefficients(&self) -> bool {
        match self {
            Self::Constant { gamma } => gamma.im == 0.0,
            Self::Polynomial { coeffs } => coeffs.iter().all(|c| c.im == 0.0),
            Self::Springy { .. } | Self::SpringyPhysical { .. } => true,
            Self::Friction { epsilon, .. } => *epsilon == 0.0,
        }
    }

    fn springy_z(&self) -> f64 {
        match self {
            Self::Springy { z } => *z,
            Self::SpringyPhysical {
                rho_g,
                c_g,
                gamma_g,
                h,
                rho_l,
                c_l,
            } => springy_from_physical(*rho_g, *c_g, *gamma_g, *h, *rho_l, *c_l).z,
            _ => unreachable!("not a springy model"),
        }
    }
}

/// Springy-coating parameters derived from the gas layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpringyParameters {
    /// Layer compressibility β = γ_g h/(ρ_g c_g²).
    pub beta: f64,
    /// Z = β ρ_l c_l², so that γ = −Z k².
    pub z: f64,
    /// Z/h = γ_g (ρ_l/ρ_g)(c_l/c_g)².
    pub coefficient: f64,
    /// The figure 25800 quoted for air over water, for comparison.
    pub quoted_coefficient: f64,
    /// quoted_coefficient / coefficient.
    pub quoted_ratio: f64,
}

pub fn springy_from_physical(rho_g: f64, c_g: f64, gamma_g: f64, h: f64, rho_l: f64, c_l: f64) -> SpringyParameters {
    let beta = gamma_g * h / (rho_g * c_g * c_g);
    let coefficient = gamma_g * (rho_l / rho_g) * (c_l / c_g).powi(2);
    SpringyParameters {
        beta,
        z: beta * rho_l * c_l * c_l,
        coefficient,
        quoted_coefficient: QUOTED_AIR_WATER_COEFFICIENT,
        quoted_ratio: QUOTED_AIR_WATER_COEFFICIENT / coefficient,
    }
}

impl std::fmt::Display for SpringyParameters {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "beta = {:.6e}, Z = {:.6e}, gamma = -{:.0} h k^2 by formula; quoted -{:.0} h k^2 (ratio {:.4})",
            self.beta, self.z, self.coefficient, self.quoted_coefficient, self.quoted_ratio
        )
    }
}
