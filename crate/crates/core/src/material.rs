//! Near-incompressible neo-Hookean material written in reduced invariants:
//!
//! `W(J₁, J₃) = μ/2 (J₁ − 3) + K/2 (J₃ − 1)²`
//!
//! with `J₁ = I₁ I₃^(−1/3)`, `J₂ = I₂ I₃^(−2/3)`, `J₃ = I₃^(1/2) = det F`.
//! Planar problems pass a zero-padded gradient, which gives `F₃₃ = 1`
//! (plane strain).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Mat3;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("invalid material: {0}")]
    Invalid(String),
    /// `det F ≤ 0`; the caller attaches the cell id.
    #[error("inverted deformation (det F = {det:e})")]
    Inversion { det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Reference mass density (kg/m³)
    pub rho0: f64,
    /// Young's modulus (Pa)
    pub young: f64,
    /// Poisson's ratio
    pub nu: f64,
}

impl MaterialParams {
    pub fn new(rho0: f64, young: f64, nu: f64) -> Result<Self, MaterialError> {
        let m = MaterialParams { rho0, young, nu };
        m.validate()?;
        Ok(m)
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            v.push(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.young > 0.0 && self.young.is_finite()) {
            v.push(format!("young must be positive, got {}", self.young));
        }
        if !(0.0..0.5).contains(&self.nu) {
            v.push(format!("nu must lie in [0, 0.5), got {}", self.nu));
        }
        v
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self.violations().as_slice() {
            [] => Ok(()),
            v => Err(MaterialError::Invalid(v.join("; "))),
        }
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.nu))
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.young / (3.0 * (1.0 - 2.0 * self.nu))
    }

    pub fn lame_lambda(&self) -> f64 {
        self.young * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    /// Dilatational wave speed `√((λ + 2μ)/ρ₀)`.
    pub fn wave_speed(&self) -> f64 {
        ((self.lame_lambda() + 2.0 * self.shear_modulus()) / self.rho0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    /// Deformation gradient `I + ∇₀u`
    pub f: Mat3,
    /// Right Cauchy–Green `FᵀF`
    pub c: Mat3,
    /// Green–Lagrange `½(C − I)`
    pub e: Mat3,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

impl KinematicState {
    pub fn from_deformation_gradient(f: Mat3) -> Result<Self, MaterialError> {
        let det = f.determinant();
        if !(det > 0.0) {
            return Err(MaterialError::Inversion { det });
        }
        let c = f.transpose() * f;
        let i1 = c.trace();
        let i2 = 0.5 * (i1 * i1 - (c * c).trace());
        let i3 = det * det;
        Ok(KinematicState {
            f,
            c,
            e: 0.5 * (c - Mat3::identity()),
            i1,
            i2,
            i3,
            j1: i1 * i3.powf(-1.0 / 3.0),
            j2: i2 * i3.powf(-2.0 / 3.0),
            j3: det,
        })
    }
}

pub fn kinematics(grad_u: &Mat3) -> Result<KinematicState, MaterialError> {
    KinematicState::from_deformation_gradient(Mat3::identity() + grad_u)
}

pub fn strain_energy(state: &KinematicState, mat: &MaterialParams) -> f64 {
    0.5 * mat.shear_modulus() * (state.j1 - 3.0)
        + 0.5 * mat.bulk_modulus() * (state.j3 - 1.0).powi(2)
}

/// `S = μ I₃^(−1/3) (I − I₁/3 C⁻¹) + K (J₃ − 1) J₃ C⁻¹`
pub fn second_pk_stress(
    state: &KinematicState,
    mat: &MaterialParams,
) -> Result<Mat3, MaterialError> {
    let c_inv = state
        .c
        .try_inverse()
        .ok_or(MaterialError::Inversion { det: state.j3 })?;
    let mu = mat.shear_modulus();
    let k = mat.bulk_modulus();
    let s = (Mat3::identity() - c_inv * (state.i1 / 3.0)) * (mu * state.i3.powf(-1.0 / 3.0))
        + c_inv * (k * (state.j3 - 1.0) * state.j3);
    // C⁻¹ is symmetric up to round-off
    Ok(0.5 * (s + s.transpose()))
}

/// First Piola–Kirchhoff stress in the `P = F S` convention.
pub fn first_pk_stress(
    state: &KinematicState,
    mat: &MaterialParams,
) -> Result<Mat3, MaterialError> {
    Ok(state.f * second_pk_stress(state, mat)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> MaterialParams {
        MaterialParams::new(1.0, 1.0, 0.125).unwrap()
    }

    #[test]
    fn reference_state() {
        let s = kinematics(&Mat3::zeros()).unwrap();
        assert_eq!(s.f, Mat3::identity());
        assert_relative_eq!(s.j1, 3.0);
        assert_relative_eq!(s.j3, 1.0);
        assert_eq!(s.e, Mat3::zeros());
        let m = MaterialParams::new(1000.0, 3000.0, 0.45).unwrap();
        assert_relative_eq!(strain_energy(&s, &m), 0.0);
        assert_relative_eq!(
            second_pk_stress(&s, &m).unwrap(),
            Mat3::zeros(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn uniform_dilation() {
        let s = kinematics(&Mat3::identity()).unwrap();
        assert_relative_eq!(s.j3, 8.0, epsilon = 1e-14);
        assert_relative_eq!(s.j1, 3.0, epsilon = 1e-14);
        // nu = 0.125 gives mu = 4/9, K = 4/9; rescale to mu = K = 1
        let m = unit();
        let w = strain_energy(&s, &m) / m.bulk_modulus();
        assert_relative_eq!(w, 24.5, epsilon = 1e-12);
    }

    #[test]
    fn volumetric_stress_is_spherical_in_c_inverse() {
        let s = kinematics(&(Mat3::identity() * 0.3)).unwrap();
        let m = MaterialParams::new(1.0, 10.0, 0.3).unwrap();
        let stress = second_pk_stress(&s, &m).unwrap();
        let c_inv = s.c.try_inverse().unwrap();
        let ratio = stress[(0, 0)] / c_inv[(0, 0)];
        assert_relative_eq!(stress, c_inv * ratio, epsilon = 1e-12);
    }

    #[test]
    fn inversion_signalled() {
        let mut g = Mat3::zeros();
        g[(0, 0)] = -2.0;
        assert!(matches!(
            kinematics(&g),
            Err(MaterialError::Inversion { .. })
        ));
    }

    #[test]
    fn derived_moduli() {
        let m = MaterialParams::new(1000.0, 3000.0, 0.45).unwrap();
        assert_relative_eq!(m.shear_modulus(), 3000.0 / 2.9);
        assert_relative_eq!(m.bulk_modulus(), 10000.0, epsilon = 1e-9);
        assert_relative_eq!(
            m.lame_lambda(),
            m.bulk_modulus() - 2.0 * m.shear_modulus() / 3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn invalid_params_listed() {
        let m = MaterialParams {
            rho0: -1.0,
            young: 0.0,
            nu: 0.5,
        };
        assert_eq!(m.violations().len(), 3);
    }
}
