use serde::Serialize;

use crate::error::{Error, Result};

/// Age penalty `g`, nondecreasing on `[0, ∞)` with `g(0) ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgePenalty {
    /// `g(x) = x`
    Linear,
    /// `g(x) = x^p`, `p ≥ 1`
    Power { p: f64 },
    /// `g(x) = e^{αx} − 1`, `α > 0`
    ExponentialPenalty { alpha: f64 },
}

impl AgePenalty {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Linear => Ok(()),
            Self::Power { p } if p.is_finite() && p >= 1.0 => Ok(()),
            Self::Power { p } => Err(Error::InvalidParameter(format!("power penalty needs p >= 1, got {p}"))),
            Self::ExponentialPenalty { alpha } if alpha.is_finite() && alpha > 0.0 => Ok(()),
            Self::ExponentialPenalty { alpha } => Err(Error::InvalidParameter(format!(
                "exponential penalty needs alpha > 0, got {alpha}"
            ))),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }

    /// `g(x)`, defined for `x ≥ 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("age penalty evaluated at {x}")));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => x,
            Self::Power { p } => x.powf(p),
            Self::ExponentialPenalty { alpha } => (alpha * x).exp_m1(),
        }
    }

    /// `H(y) = ∫₀^y g(s) ds`.
    pub fn antiderivative(&self, y: f64) -> f64 {
        match *self {
            Self::Linear => 0.5 * y * y,
            Self::Power { p } => y.powf(p + 1.0) / (p + 1.0),
            Self::ExponentialPenalty { alpha } => (alpha * y).exp_m1() / alpha - y,
        }
    }

    /// `∫₀^len g(start + t) dt`.
    pub fn integral(&self, start: f64, len: f64) -> f64 {
        match *self {
            Self::Linear => start * len + 0.5 * len * len,
            Self::Power { .. } => self.antiderivative(start + len) - self.antiderivative(start),
            Self::ExponentialPenalty { alpha } => (alpha * start).exp() * (alpha * len).exp_m1() / alpha - len,
        }
    }
}
