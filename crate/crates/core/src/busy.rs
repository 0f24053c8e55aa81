use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng::RandomSource;

/// Absolute tolerance used whenever an expectation needs quadrature.
pub const EXPECTATION_TOL: f64 = 1e-10;

/// Law of a single channel busy time.
#[derive(Debug, Clone, PartialEq)]
pub enum BusyTimeDistribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Empirical { samples: Arc<[f64]> },
}

impl BusyTimeDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Self::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = Self::Deterministic { value };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(samples: impl Into<Vec<f64>>) -> Result<Self> {
        let d = Self::Empirical {
            samples: samples.into().into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => Err(
                Error::InvalidDistribution(format!("exponential rate must be positive, got {rate}")),
            ),
            Self::Deterministic { value } if !(value.is_finite() && *value > 0.0) => Err(
                Error::InvalidDistribution(format!("deterministic value must be positive, got {value}")),
            ),
            Self::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidDistribution("empirical sample list is empty".into()));
                }
                if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                    return Err(Error::InvalidDistribution(format!(
                        "empirical samples must be positive and finite, got {bad}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `E[b]`.
    pub fn mean(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { value } => *value,
            Self::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        })
    }

    /// `E[b²]`.
    pub fn second_moment(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            Self::Exponential { rate } => {
                let m = 1.0 / rate;
                2.0 * m * m
            }
            Self::Deterministic { value } => value * value,
            Self::Empirical { samples } => {
                samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
            }
        })
    }

    pub fn variance(&self) -> Result<f64> {
        let m = self.mean()?;
        Ok((self.second_moment()? - m * m).max(0.0))
    }

    /// Smallest value in the support (0 for the exponential law).
    pub fn support_min(&self) -> f64 {
        match self {
            Self::Exponential { .. } => 0.0,
            Self::Deterministic { value } => *value,
            Self::Empirical { samples } => samples.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// One draw. Deterministic laws do not consume randomness.
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            Self::Exponential { rate } => rng.exp1() / rate,
            Self::Deterministic { value } => *value,
            Self::Empirical { samples } => samples[rng.index(samples.len())],
        }
    }

    /// `E[f(b)]`; `Ok(None)` when the expectation diverges.
    ///
    /// Point masses are evaluated directly, empirical laws are averaged, and
    /// the exponential law goes through adaptive Gauss–Kronrod quadrature with
    /// `breaks` marking kinks of `f`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<Option<f64>> {
        self.validate()?;
        let value = match self {
            Self::Exponential { rate } => {
                match quadrature::exp_expectation(&f, *rate, breaks, EXPECTATION_TOL)? {
                    Some(v) => v,
                    None => return Ok(None),
                }
            }
            Self::Deterministic { value } => f(*value),
            Self::Empirical { samples } => samples.iter().map(|&s| f(s)).sum::<f64>() / samples.len() as f64,
        };
        Ok(value.is_finite().then_some(value))
    }
}
