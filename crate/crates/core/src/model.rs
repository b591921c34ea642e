//! Reduced Bloch-circle dynamics of a qubit under continuous σ_z measurement.
//!
//! With angular velocity `α` and measurement strength `γ` as controls the
//! polar angle follows
//!
//! ```text
//! dθ = (α − 2γ sin 2θ) dt + 2√(2γ) sin θ dW
//! ```
//!
//! Angles are plain reals on an interval. They are never wrapped mod 2π.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical control bounds and the cost discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Maximum angular speed Ω.
    pub omega: f64,
    /// Maximum measurement strength Γ.
    pub gamma_max: f64,
    /// Discount rate β.
    pub beta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega: 5.0,
            gamma_max: 1.0,
            beta: 0.1,
        }
    }
}

impl ModelParams {
    pub fn new(omega: f64, gamma_max: f64, beta: f64) -> Result<Self> {
        let params = Self {
            omega,
            gamma_max,
            beta,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || self.omega <= 0.0 {
            return Err(Error::InvalidParam {
                field: "omega",
                reason: format!("must be finite and > 0, got {}", self.omega),
            });
        }
        if !self.gamma_max.is_finite() || self.gamma_max < 0.0 {
            return Err(Error::InvalidParam {
                field: "gamma_max",
                reason: format!("must be finite and >= 0, got {}", self.gamma_max),
            });
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidParam {
                field: "beta",
                reason: format!("must be finite and > 0, got {}", self.beta),
            });
        }
        Ok(())
    }

    /// Upper bound 1/β on any discounted cost.
    pub fn cost_ceiling(&self) -> f64 {
        1.0 / self.beta
    }
}

/// One admissible control pair η = (α, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub alpha: f64,
    pub gamma: f64,
}

impl ControlAction {
    pub const fn new(alpha: f64, gamma: f64) -> Self {
        Self { alpha, gamma }
    }

    pub fn is_admissible(&self, params: &ModelParams) -> bool {
        self.alpha.is_finite()
            && self.gamma.is_finite()
            && self.alpha.abs() <= params.omega
            && (0.0..=params.gamma_max).contains(&self.gamma)
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.is_admissible(params) {
            Ok(())
        } else {
            Err(Error::InadmissibleAction {
                alpha: self.alpha,
                gamma: self.gamma,
            })
        }
    }
}

/// Drift `b(θ, α, γ) = α − 2γ sin 2θ`.
#[inline]
pub fn drift(theta: f64, action: ControlAction) -> f64 {
    action.alpha - 2.0 * action.gamma * (2.0 * theta).sin()
}

/// Diffusion coefficient `σ(θ, γ) = 2√(2γ) sin θ`.
#[inline]
pub fn diffusion(theta: f64, action: ControlAction) -> f64 {
    2.0 * (2.0 * action.gamma).sqrt() * theta.sin()
}

/// `σ²(θ, γ) = 8γ sin²θ`, evaluated without the square root.
#[inline]
pub fn diffusion_sq(theta: f64, action: ControlAction) -> f64 {
    let s = theta.sin();
    8.0 * action.gamma * s * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn drift_examples() {
        assert!((drift(FRAC_PI_4, ControlAction::new(0.0, 1.0)) + 2.0).abs() < 1e-15);
        assert!((drift(FRAC_PI_2, ControlAction::new(5.0, 1.0)) - 5.0).abs() < 1e-14);
        assert_eq!(drift(0.0, ControlAction::new(3.0, 0.7)), 3.0);
    }

    #[test]
    fn diffusion_examples() {
        assert_eq!(diffusion(0.0, ControlAction::new(0.0, 1.0)), 0.0);
        let top = diffusion(FRAC_PI_2, ControlAction::new(0.0, 1.0));
        assert!((top - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((top - 2.828427).abs() < 1e-6);
        assert_eq!(diffusion(FRAC_PI_2, ControlAction::new(0.0, 0.0)), 0.0);
        // backaction vanishes at the σ_z eigenstates
        assert!(diffusion(PI, ControlAction::new(0.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn validate_examples() {
        assert!(ModelParams::new(5.0, 1.0, 0.1).is_ok());
        match ModelParams::new(0.0, 1.0, 0.1) {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "omega"),
            other => panic!("unexpected {other:?}"),
        }
        match ModelParams::new(5.0, 1.0, 0.0) {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("unexpected {other:?}"),
        }
        match ModelParams::new(5.0, -0.5, 0.1) {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "gamma_max"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ModelParams::new(f64::NAN, 1.0, 0.1).is_err());
        assert!(ModelParams::new(5.0, f64::INFINITY, 0.1).is_err());
        assert!(ModelParams::new(5.0, 0.0, 0.1).is_ok());
    }

    #[test]
    fn admissibility() {
        let p = ModelParams::default();
        assert!(ControlAction::new(-5.0, 1.0).is_admissible(&p));
        assert!(!ControlAction::new(5.1, 0.0).is_admissible(&p));
        assert!(!ControlAction::new(0.0, -0.1).is_admissible(&p));
        assert!(!ControlAction::new(0.0, 1.5).is_admissible(&p));
        assert!(ControlAction::new(0.0, 1.5).check(&p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn backaction_parity(theta in -4.0f64..4.0, alpha in -5.0f64..5.0, gamma in 0.0f64..1.0) {
                let a = ControlAction::new(alpha, gamma);
                let m = ControlAction::new(-alpha, gamma);
                prop_assert!((diffusion(-theta, a) + diffusion(theta, a)).abs() < 1e-14);
                prop_assert!((drift(-theta, m) + drift(theta, a)).abs() < 1e-13);
            }

            #[test]
            fn coefficient_envelopes(theta in -4.0f64..4.0, alpha in -5.0f64..5.0, gamma in 0.0f64..1.0) {
                let p = ModelParams::default();
                let a = ControlAction::new(alpha, gamma);
                let s = theta.sin();
                let sig = diffusion(theta, a);
                prop_assert!((sig * sig - 8.0 * gamma * s * s).abs() < 1e-12);
                prop_assert!(sig * sig <= 8.0 * p.gamma_max * s * s + 1e-12);
                let bound = p.omega + 2.0 * p.gamma_max * (2.0 * theta).sin().abs();
                prop_assert!(drift(theta, a).abs() <= bound + 1e-12);
            }
        }
    }
}
