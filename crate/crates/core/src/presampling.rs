//! Threshold pre-sampling policy for the error-free channel.
//!
//! With the post-sampling wait folded into an effective busy time
//! `b̃ = ζ + b`, the expected penalty at the end of an epoch that starts at age
//! `t` and waits `x` is `G_t(x) = E[g(t + x + b̃)]`. Since `G_t(x)` only depends
//! on `t + x`, inverting it once per threshold `γ` yields a target age `y*` and
//! the policy waits `[y* − t]⁺`. The optimal `γ` is the root of
//!
//! ```text
//! F(γ) = E[∫₀^{w(b̃') + b̃} g(b̃' + s) ds] − γ·E[w(b̃') + b̃]
//! ```
//!
//! over independent copies `b̃'`, `b̃`. At the root, `γ` equals the optimal
//! long-term average penalty.

use serde::Serialize;

use crate::busy::BusyTimeDistribution;
use crate::error::{Error, Result};
use crate::penalty::AgePenalty;

pub const INVERSE_TOL: f64 = 1e-9;
pub const GAMMA_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyContext {
    pub busy: BusyTimeDistribution,
    pub zeta: f64,
    pub penalty: AgePenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPolicy {
    pub gamma: f64,
    /// Age below which the source idles before sampling.
    pub threshold_age: f64,
    pub zeta: f64,
    pub penalty: AgePenalty,
    /// `|F(γ)|` at the returned threshold; `None` when `γ` was supplied directly.
    pub residual: Option<f64>,
}

impl ThresholdPolicy {
    /// Pre-sampling wait for an epoch that starts at `starting_age`.
    pub fn wait_time(&self, starting_age: f64) -> f64 {
        (self.threshold_age - starting_age).max(0.0)
    }
}

impl PolicyContext {
    pub fn new(busy: BusyTimeDistribution, zeta: f64, penalty: AgePenalty) -> Result<Self> {
        busy.validate()?;
        penalty.validate()?;
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::InvalidParameter(format!("post-sampling wait must be >= 0, got {zeta}")));
        }
        Ok(Self { busy, zeta, penalty })
    }

    fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        self.busy
            .expect(f, breaks)?
            .ok_or_else(|| Error::DivergentPenalty(format!("{:?} against {:?}", self.penalty, self.busy)))
    }

    /// `E[g(y + b̃)]` for `y ≥ 0`.
    fn phi(&self, y: f64) -> Result<f64> {
        let g = self.penalty;
        let z = self.zeta;
        self.expect(|b| g.eval_unchecked(y + z + b), &[])
    }

    /// `G_t(x) = E[g(t + x + b̃)]`.
    pub fn g_bar(&self, t: f64, x: f64) -> Result<f64> {
        if !(t >= 0.0 && x >= 0.0) {
            return Err(Error::Domain(format!("G_t(x) needs t, x >= 0, got t = {t}, x = {x}")));
        }
        self.phi(t + x)
    }

    /// Closed-form target age where one exists (possibly negative).
    fn closed_inverse(&self, gamma: f64) -> Result<Option<f64>> {
        let det = match self.busy {
            BusyTimeDistribution::Deterministic { value } => Some(value + self.zeta),
            _ => None,
        };
        Ok(match (self.penalty, det) {
            (AgePenalty::Linear, _) => Some(gamma - self.zeta - self.busy.mean()?),
            (AgePenalty::Power { p }, Some(c)) if gamma >= 0.0 => Some(gamma.powf(1.0 / p) - c),
            (AgePenalty::ExponentialPenalty { alpha }, Some(c)) if gamma > -1.0 => Some(gamma.ln_1p() / alpha - c),
            _ => None,
        })
    }

    /// `y` with `E[g(y + b̃)] = γ`, searched on `y ≥ 0`.
    fn search_inverse(&self, gamma: f64) -> Result<f64> {
        let floor = self.phi(0.0)?;
        if gamma < floor {
            return Err(Error::BracketFailure(format!(
                "threshold {gamma} is below G_0(0) = {floor} and {:?} has no closed-form inverse here",
                self.penalty
            )));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.phi(hi)? < gamma {
            lo = hi;
            hi *= 2.0;
            if hi > 1e18 {
                return Err(Error::BracketFailure(format!("G never reaches {gamma}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= INVERSE_TOL * 1e-3 * hi.max(1.0) || mid <= lo || mid >= hi {
                break;
            }
            if self.phi(mid)? < gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `x` with `G_t(x) = γ`; may be negative, the policy clamps it.
    pub fn inverse_g(&self, t: f64, gamma: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("starting age must be >= 0, got {t}")));
        }
        let y = match self.closed_inverse(gamma)? {
            Some(y) => y,
            None => self.search_inverse(gamma)?,
        };
        Ok(y - t)
    }

    /// Target age for threshold `γ`, clamped at 0 (below it the policy never waits).
    fn target_age(&self, gamma: f64) -> Result<f64> {
        if let Some(y) = self.closed_inverse(gamma)? {
            return Ok(y.max(0.0));
        }
        if gamma <= self.phi(0.0)? {
            return Ok(0.0);
        }
        self.search_inverse(gamma)
    }

    pub fn policy_for(&self, gamma: f64) -> Result<ThresholdPolicy> {
        Ok(ThresholdPolicy {
            gamma,
            threshold_age: self.target_age(gamma)?,
            zeta: self.zeta,
            penalty: self.penalty,
            residual: None,
        })
    }

    /// `F(γ)`; nested quadrature, outer over `b̃'`, inner over `b̃`.
    pub fn gamma_residual(&self, gamma: f64) -> Result<f64> {
        let y = self.target_age(gamma)?;
        let g = self.penalty;
        let z = self.zeta;
        // Ψ(u) = E[H(u + b̃)]
        let psi = |u: f64| self.expect(|b| g.antiderivative(u + z + b), &[]);
        let psi_at_target = psi(y)?;
        let outer = |b_prev: f64| {
            let start = z + b_prev;
            let wait = (y - start).max(0.0);
            let end_inner = if start < y { Ok(psi_at_target) } else { psi(start) };
            match end_inner {
                Ok(v) => v - g.antiderivative(start) - gamma * wait,
                Err(_) => f64::NAN,
            }
        };
        let outer_mean = self.expect(outer, &[y - z])?;
        Ok(outer_mean - gamma * (z + self.busy.mean()?))
    }

    /// Threshold `γ*` with `|F(γ*)| ≤ 1e-8`, by bisection.
    pub fn solve_gamma(&self) -> Result<ThresholdPolicy> {
        let mut lo = 0.0;
        let f_lo = self.gamma_residual(lo)?;
        if !(f_lo > 0.0) {
            return Err(Error::BracketFailure(format!("F(0) = {f_lo} is not positive")));
        }
        let mut hi = self.phi(0.0)?.max(1.0);
        let mut f_hi = self.gamma_residual(hi)?;
        let mut doublings = 0;
        while f_hi >= 0.0 {
            lo = hi;
            hi *= 2.0;
            f_hi = self.gamma_residual(hi)?;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::BracketFailure("F(γ) never turns negative".into()));
            }
        }
        let mut best = (hi, f_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-14 * hi {
                break;
            }
            let f = self.gamma_residual(mid)?;
            if f.abs() < best.1.abs() {
                best = (mid, f);
            }
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (gamma, residual) = best;
        if residual.abs() > GAMMA_RESIDUAL_TOL {
            return Err(Error::BracketFailure(format!("|F(γ)| = {} at γ = {gamma}", residual.abs())));
        }
        let mut policy = self.policy_for(gamma)?;
        policy.residual = Some(residual.abs());
        Ok(policy)
    }
}
