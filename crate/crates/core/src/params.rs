use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs;

/// Model parameters `(n, b, γ, α)` and the interaction strength `x = n^{-α}`.
///
/// The interaction is derived from `α` unless overridden with
/// [`ModelParams::with_interaction`], which is how the non-interacting limit
/// `x = 0` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    b: f64,
    gamma: f64,
    alpha: f64,
    interaction: f64,
}

impl ModelParams {
    pub fn new(n: usize, b: f64, gamma: f64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "lattice size must be positive".into(),
            ));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be positive"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("b = {b} must be finite")));
        }
        let params = ModelParams {
            n,
            b,
            gamma,
            alpha,
            interaction: (n as f64).powf(-alpha),
        };
        if params.asymmetry().abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "|b| n^-gamma = {} exceeds 1, so p or q would be negative",
                params.asymmetry().abs()
            )));
        }
        Ok(params)
    }

    /// Same parameters with the interaction `x` set directly.
    pub fn with_interaction(mut self, x: f64) -> Result<Self> {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interaction {x} must be finite and >= 0"
            )));
        }
        self.interaction = x;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `x`, the inverse temperature of the stationary measure.
    pub fn interaction(&self) -> f64 {
        self.interaction
    }

    /// `p - q = b n^{-γ}`.
    pub fn asymmetry(&self) -> f64 {
        self.b * (self.n as f64).powf(-self.gamma)
    }

    pub fn p(&self) -> f64 {
        0.5 + 0.5 * self.asymmetry()
    }

    pub fn q(&self) -> f64 {
        0.5 - 0.5 * self.asymmetry()
    }

    /// `ε = (1 - e^{-x}) / (1 + e^{-x}) = tanh(x / 2)`.
    pub fn eps(&self) -> f64 {
        (0.5 * self.interaction).tanh()
    }

    pub fn kappa(&self) -> f64 {
        -1.0
    }

    /// Exponent of the diffusive time acceleration.
    pub fn time_scale_exponent(&self) -> f64 {
        2.0
    }

    /// Exact stationary density.
    pub fn rho_bar(&self) -> f64 {
        gibbs::mean_density(self)
    }

    /// `v = 2 b n^{2-γ} ρ̄ (2 - 3ρ̄)`.
    pub fn transport_velocity(&self) -> f64 {
        let rho = self.rho_bar();
        2.0 * self.b * (self.n as f64).powf(2.0 - self.gamma) * rho * (2.0 - 3.0 * rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(4, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(4, 0.0, 1.0, -1.0).is_err());
        assert!(ModelParams::new(4, 3.0, 0.5, 1.0).is_err());
        assert!(ModelParams::new(4, 2.0, 0.5, 1.0).is_ok());
        let p = ModelParams::new(4, 0.0, 1.0, 1.0).unwrap();
        assert!(p.with_interaction(-0.1).is_err());
    }

    #[test]
    fn velocity_at_half_density() {
        let p = ModelParams::new(64, 1.0, 0.75, 1.5)
            .unwrap()
            .with_interaction(0.0)
            .unwrap();
        let expect = 64f64.powf(1.25) / 2.0;
        assert!((p.transport_velocity() - expect).abs() <= 1e-12 * expect);
        let m = ModelParams::new(64, -1.0, 0.75, 1.5).unwrap();
        let pl = ModelParams::new(64, 1.0, 0.75, 1.5).unwrap();
        assert_eq!(m.transport_velocity(), -pl.transport_velocity());
        assert_eq!(
            ModelParams::new(64, 0.0, 0.75, 1.5)
                .unwrap()
                .transport_velocity(),
            0.0
        );
    }

    proptest! {
        #[test]
        fn derived_identities(n in 1usize..5000, b in -1.0f64..1.0, gamma in 0.1f64..2.0, alpha in 0.1f64..3.0) {
            let p = ModelParams::new(n, b, gamma, alpha).unwrap();
            prop_assert!((p.p() + p.q() - 1.0).abs() <= 1e-15);
            prop_assert!((p.p() - p.q() - b * (n as f64).powf(-gamma)).abs() <= 1e-15);
            prop_assert!(p.p() >= 0.0 && p.q() >= 0.0);
            let x = p.interaction();
            let direct = -(-x).exp_m1() / (1.0 + (-x).exp());
            prop_assert!((p.eps() - direct).abs() <= 4e-15 * direct + 1e-300);
            prop_assert!(p.eps() >= 0.0 && p.eps() < 1.0);
            prop_assert_eq!(p.kappa(), -1.0);
        }
    }
}
