//! Leakage as a function of the age of the most recent delivery, and the
//! smallest post-sampling wait that keeps the expected peak leakage within a
//! budget.

use serde::Serialize;

use crate::busy::BusyTimeDistribution;
use crate::error::{Error, Result};

/// Absolute tolerance on the post-sampling wait returned by [`solve_zeta`].
pub const ZETA_TOL: f64 = 1e-9;
/// Bound on `|E[ρ(ζ+b)] − Δ|` at a binding solution.
pub const RESIDUAL_TOL: f64 = 1e-9;
const MAX_BRACKET: f64 = (1u64 << 60) as f64;

/// Nonincreasing leakage-versus-age model `ρ(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeakageModel {
    /// Mutual information between the delivered samples of an OU process with
    /// parameters `(σ², θ)` and the process observed in `N(0, σ₀²)` noise.
    OuMutualInfo { sigma2: f64, theta: f64, sigma02: f64 },
    /// Accuracy ratio of an estimating adversary, `1 + σ₀²/a`.
    WienerEstimation { sigma02: f64 },
    /// `s·e^{-a}`; a smooth model with hand-computable expectations.
    SyntheticExp { scale: f64 },
}

impl LeakageModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Self::OuMutualInfo { sigma2, theta, sigma02 } => ok(sigma2) && ok(theta) && ok(sigma02),
            Self::WienerEstimation { sigma02 } => ok(sigma02),
            Self::SyntheticExp { scale } => ok(scale),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("leakage parameters must be positive: {self:?}")))
        }
    }

    /// `ρ(age)`.
    pub fn eval(&self, age: f64) -> Result<f64> {
        if !(age >= 0.0) {
            return Err(Error::Domain(format!("leakage evaluated at age {age}")));
        }
        if age == 0.0 && matches!(self, Self::WienerEstimation { .. }) {
            return Err(Error::DivergentLeakage("estimation leakage is unbounded at age 0".into()));
        }
        Ok(self.eval_unchecked(age))
    }

    fn eval_unchecked(&self, age: f64) -> f64 {
        match *self {
            Self::OuMutualInfo { sigma2, theta, sigma02 } => {
                let stationary = sigma2 / (2.0 * theta);
                // 1 - e^{-2θa} via expm1 to keep precision at small ages.
                let decorrelated = -(-2.0 * theta * age).exp_m1();
                0.5 * ((stationary + sigma02) / (stationary * decorrelated + sigma02)).ln()
            }
            Self::WienerEstimation { sigma02 } => 1.0 + sigma02 / age,
            Self::SyntheticExp { scale } => scale * (-age).exp(),
        }
    }

    /// `inf_a ρ(a)`, approached as the age grows.
    pub fn floor(&self) -> f64 {
        match self {
            Self::WienerEstimation { .. } => 1.0,
            _ => 0.0,
        }
    }
}

/// `E[ρ(shift + b)]`.
pub fn expected_leakage(model: &LeakageModel, dist: &BusyTimeDistribution, shift: f64) -> Result<f64> {
    model.validate()?;
    if !(shift >= 0.0) {
        return Err(Error::Domain(format!("negative shift {shift}")));
    }
    if matches!(model, LeakageModel::WienerEstimation { .. }) && shift + dist.support_min() == 0.0 {
        return Err(Error::DivergentLeakage(
            "estimation leakage is not integrable against busy times reaching 0 without a post-sampling wait".into(),
        ));
    }
    dist.expect(|b| model.eval_unchecked(shift + b), &[])?
        .ok_or_else(|| Error::DivergentLeakage(format!("E[rho({shift} + b)] diverges")))
}

/// Post-sampling wait meeting `E[ρ(ζ + b)] ≤ Δ` at the smallest `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaSolution {
    pub zeta: f64,
    /// The busy time alone already keeps leakage within budget.
    pub natural_cover: bool,
    /// `|E[ρ(ζ + b)] − Δ|` when the budget binds, 0 otherwise.
    pub residual: f64,
}

pub fn solve_zeta(model: &LeakageModel, dist: &BusyTimeDistribution, delta: f64) -> Result<ZetaSolution> {
    model.validate()?;
    dist.validate()?;
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidParameter(format!("leakage budget must be a nonnegative number, got {delta}")));
    }
    // Every shipped model is strictly above its floor.
    let floor = model.floor();
    if delta <= floor {
        return Err(Error::InfeasibleBudget { delta, floor });
    }

    let at = |shift: f64| -> Result<f64> {
        match expected_leakage(model, dist, shift) {
            Err(Error::DivergentLeakage(_)) if shift == 0.0 => Ok(f64::INFINITY),
            other => other,
        }
    };

    if at(0.0)? <= delta {
        return Ok(ZetaSolution { zeta: 0.0, natural_cover: true, residual: 0.0 });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        if at(hi)? < delta {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(Error::InfeasibleBudget { delta, floor });
        }
    }

    let mut best = (hi, at(hi)? - delta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = at(mid)? - delta;
        if r.abs() < best.1.abs() {
            best = (mid, r);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= ZETA_TOL && best.1.abs() <= RESIDUAL_TOL * 0.1 {
            break;
        }
    }
    Ok(ZetaSolution { zeta: best.0, natural_cover: false, residual: best.1.abs() })
}
