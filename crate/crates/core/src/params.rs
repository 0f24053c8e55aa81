use crate::busy::BusyTimeDistribution;
use crate::error::{Error, Result};
use crate::leakage::LeakageModel;
use crate::penalty::AgePenalty;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Erasure probability of each transmission attempt.
    pub epsilon: f64,
    /// Transmission attempts allowed per sample before it is discarded.
    pub k_max: u32,
    /// Leakage budget.
    pub delta: f64,
    pub busy: BusyTimeDistribution,
    pub leakage: LeakageModel,
    pub penalty: AgePenalty,
}

impl SystemParams {
    pub fn new(
        epsilon: f64,
        k_max: u32,
        delta: f64,
        busy: BusyTimeDistribution,
        leakage: LeakageModel,
        penalty: AgePenalty,
    ) -> Result<Self> {
        let p = Self { epsilon, k_max, delta, busy, leakage, penalty };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_channel(self.epsilon, self.k_max)?;
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("leakage budget must be >= 0, got {}", self.delta)));
        }
        self.busy.validate()?;
        self.leakage.validate()?;
        self.penalty.validate()
    }

    pub fn with_k(&self, k_max: u32) -> Self {
        Self { k_max, ..self.clone() }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }
}

pub(crate) fn check_channel(epsilon: f64, k_max: u32) -> Result<()> {
    if epsilon == 1.0 {
        return Err(Error::DegenerateChannel);
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("erasure probability must lie in [0, 1), got {epsilon}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidParameter("retransmission cap must be at least 1".into()));
    }
    Ok(())
}
