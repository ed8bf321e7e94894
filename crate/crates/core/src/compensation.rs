//! Robustifying compensation terms sigma(t, x, u) entering the safety
//! constraint dh_n/dt - sigma >= -alpha(h).
//!
//! All implemented variants depend only on the nominal barrier and its
//! gradient. The input argument is kept in the evaluation signature so that
//! input-dependent designs can slot in behind the same interface.

use thiserror::Error;

use crate::barrier::{QuadraticBarrier, State};
use crate::dynamics::Input;

#[derive(Debug, Error)]
pub enum CompensationError {
    #[error("robust bound p_hat must be finite and nonnegative, got {0}")]
    BadBound(f64),
    #[error("issf gain eps0 must be positive, got {0}")]
    BadEps0(f64),
    #[error("issf exponent lambda must be nonnegative, got {0}")]
    BadLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompensationTerm {
    /// sigma = 0: the plain CBF filter with no robustification.
    None,
    /// sigma = ||grad h(x)|| p_hat for a bounded additive uncertainty.
    RobustBound { p_hat: f64 },
    /// sigma = ||grad h(x)||^2 / eps(h(x)) with eps(r) = eps0 e^(lambda r),
    /// the tunable input-to-state safety design.
    Issf { eps0: f64, lambda: f64 },
}

impl CompensationTerm {
    pub fn none() -> Self {
        Self::None
    }

    pub fn robust_bound(p_hat: f64) -> Result<Self, CompensationError> {
        if !p_hat.is_finite() || p_hat < 0.0 {
            return Err(CompensationError::BadBound(p_hat));
        }
        Ok(Self::RobustBound { p_hat })
    }

    pub fn issf(eps0: f64, lambda: f64) -> Result<Self, CompensationError> {
        if !eps0.is_finite() || eps0 <= 0.0 {
            return Err(CompensationError::BadEps0(eps0));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(CompensationError::BadLambda(lambda));
        }
        Ok(Self::Issf { eps0, lambda })
    }

    /// True when sigma does not depend on the input, which makes the filter
    /// constraint affine in u. Holds for every implemented variant.
    pub fn input_independent(&self) -> bool {
        true
    }

    /// eps(r) = eps0 e^(lambda r) for the ISSf variant.
    pub fn epsilon(&self, r: f64) -> Option<f64> {
        match self {
            Self::Issf { eps0, lambda } => Some(eps0 * (lambda * r).exp()),
            _ => None,
        }
    }

    pub fn evaluate(
        &self,
        barrier: &QuadraticBarrier,
        _t: f64,
        x: &State,
        _u: Option<&Input>,
    ) -> f64 {
        match self {
            Self::None => 0.0,
            Self::RobustBound { p_hat } => barrier.gradient_norm(x) * p_hat,
            Self::Issf { .. } => {
                let g = barrier.gradient_norm(x);
                g * g / self.epsilon(barrier.eval(x)).unwrap()
            }
        }
    }
}
