//! Problem parameters: the quantum parameter, equilibrium scale, kernel
//! exponents, and the spatial domain mode.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Angular factor of the collision kernel.
///
/// The kernel is `|v - u|^gamma * b(theta)` with `cos(theta)` the angle
/// between the relative velocity and the scattering direction. The cutoff
/// law uses `b(theta) = coeff * |cos(theta)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularLaw {
    CosineCutoff { coeff: f64 },
}

impl Default for AngularLaw {
    fn default() -> Self {
        AngularLaw::CosineCutoff { coeff: 1.0 }
    }
}

impl AngularLaw {
    /// Evaluate `b` as a function of `cos(theta)`.
    #[inline]
    pub fn eval(&self, cos_theta: f64) -> f64 {
        match *self {
            AngularLaw::CosineCutoff { coeff } => coeff * cos_theta.abs(),
        }
    }

    pub fn coeff(&self) -> f64 {
        match *self {
            AngularLaw::CosineCutoff { coeff } => coeff,
        }
    }
}

/// Spatial domain selector: space-homogeneous or a periodic 1-D interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    Homogeneous,
    Torus1d,
}

impl Default for DomainMode {
    fn default() -> Self {
        DomainMode::Homogeneous
    }
}

/// Physical and quantum parameters of one problem instance.
///
/// `delta` interpolates between the classical gas (`delta = 0`) and the
/// exclusion-saturated gas (`delta = 1`); states are capped by `1/delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Quantum parameter in `[0, 1]`.
    pub delta: f64,
    /// Equilibrium scale, positive.
    pub rho: f64,
    /// Soft-potential exponent in `(-3, 0)`.
    pub gamma: f64,
    /// Weight exponent for the `(1 + |v|)^beta` velocity weight, positive.
    pub beta: f64,
    /// Angular law of the kernel.
    pub angular_law: AngularLaw,
    /// Spatial domain mode.
    pub domain_mode: DomainMode,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("delta must lie in [0, 1], got {0}")]
    DeltaOutOfRange(f64),
    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("gamma must lie in (-3, 0), got {0}")]
    GammaOutOfRange(f64),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("angular coefficient must be nonnegative and finite, got {0}")]
    BadAngularCoeff(f64),
}

impl ModelParams {
    pub fn new(delta: f64, rho: f64, gamma: f64, beta: f64) -> Result<Self, ParamsError> {
        let p = ModelParams {
            delta,
            rho,
            gamma,
            beta,
            angular_law: AngularLaw::default(),
            domain_mode: DomainMode::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(0.0..=1.0).contains(&self.delta) || !self.delta.is_finite() {
            return Err(ParamsError::DeltaOutOfRange(self.delta));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(ParamsError::NonPositiveRho(self.rho));
        }
        if !(-3.0 < self.gamma && self.gamma < 0.0) {
            return Err(ParamsError::GammaOutOfRange(self.gamma));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(ParamsError::NonPositiveBeta(self.beta));
        }
        let c = self.angular_law.coeff();
        if !(c >= 0.0) || !c.is_finite() {
            return Err(ParamsError::BadAngularCoeff(c));
        }
        Ok(())
    }

    /// Upper admissible value for a distribution, `1/delta` (infinite for
    /// the classical gas).
    #[inline]
    pub fn pauli_cap(&self) -> f64 {
        if self.delta > 0.0 {
            1.0 / self.delta
        } else {
            f64::INFINITY
        }
    }
}

/// The velocity weight `(1 + |v|)^beta`.
#[inline]
pub fn velocity_weight(v: [f64; 3], beta: f64) -> f64 {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (1.0 + r).powf(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_ranges() {
        assert!(ModelParams::new(0.5, 1.0, -1.0, 6.0).is_ok());
        assert_eq!(
            ModelParams::new(1.5, 1.0, -1.0, 6.0).unwrap_err(),
            ParamsError::DeltaOutOfRange(1.5)
        );
        assert_eq!(
            ModelParams::new(0.5, 0.0, -1.0, 6.0).unwrap_err(),
            ParamsError::NonPositiveRho(0.0)
        );
        assert_eq!(
            ModelParams::new(0.5, 1.0, -3.0, 6.0).unwrap_err(),
            ParamsError::GammaOutOfRange(-3.0)
        );
        assert_eq!(
            ModelParams::new(0.5, 1.0, 0.0, 6.0).unwrap_err(),
            ParamsError::GammaOutOfRange(0.0)
        );
        assert_eq!(
            ModelParams::new(0.5, 1.0, -1.0, 0.0).unwrap_err(),
            ParamsError::NonPositiveBeta(0.0)
        );
    }

    #[test]
    fn weight_values() {
        assert_eq!(velocity_weight([0.0, 0.0, 0.0], 6.0), 1.0);
        assert_eq!(velocity_weight([1.0, 0.0, 0.0], 6.0), 64.0);
        assert!((velocity_weight([3.0, 4.0, 0.0], 2.0) - 36.0).abs() < 1e-13);
    }

    #[test]
    fn pauli_cap_values() {
        let p = ModelParams::new(0.5, 1.0, -1.0, 6.0).unwrap();
        assert_eq!(p.pauli_cap(), 2.0);
        let p0 = ModelParams::new(0.0, 1.0, -1.0, 6.0).unwrap();
        assert_eq!(p0.pauli_cap(), f64::INFINITY);
    }
}
