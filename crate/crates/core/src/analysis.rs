//! Renewal analysis of the erasure channel with zero pre-sampling wait.
//!
//! Within an epoch the source draws `R` samples, `R ~ geometric(1 − ε^K)`.
//! Each of the first `R − 1` samples burns all `K` attempts; the last one is
//! delivered on attempt `ψ`, a geometric(1 − ε) law truncated to `{1..K}`.
//! With `N = R − 1`, the epoch length is
//!
//! ```text
//! L = R·ζ + Σ_{N·K busy times} + Σ_{ψ busy times}
//! ```
//!
//! and the long-term average age under `g(x) = x` is
//! `ζ + E[ψ]E[b] + E[L²] / (2 E[L])`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{check_channel, SystemParams};

/// First and second moments of the per-epoch sample count `R` and of the
/// delivering attempt index `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetransMoments {
    pub e_r: f64,
    pub e_r2: f64,
    pub e_psi: f64,
    pub e_psi2: f64,
    /// `E[(R − 1)²]`
    pub e_n2: f64,
}

/// `(E[R], E[R²])` for `R ~ geometric(1 − ε^K)` on `{1, 2, …}`.
pub fn moments_r(epsilon: f64, k_max: u32) -> Result<(f64, f64)> {
    check_channel(epsilon, k_max)?;
    let q = epsilon.powi(k_max as i32);
    let p = 1.0 - q;
    Ok((1.0 / p, (1.0 + q) / (p * p)))
}

/// `(E[ψ], E[ψ²])` for `P(ψ = k) = ε^{k−1}(1 − ε)/(1 − ε^K)`, `1 ≤ k ≤ K`.
pub fn moments_psi(epsilon: f64, k_max: u32) -> Result<(f64, f64)> {
    check_channel(epsilon, k_max)?;
    if k_max == 1 || epsilon == 0.0 {
        // Delivered on the first attempt.
        return Ok((1.0, 1.0));
    }
    let k = k_max as f64;
    let e = epsilon;
    let ek = e.powi(k_max as i32);
    let ek1 = ek * e;
    let ek2 = ek1 * e;
    let norm = 1.0 - ek;
    let om = 1.0 - e;
    let m1 = (1.0 - (k + 1.0) * ek + k * ek1) / (norm * om);
    let m2 = (1.0 + e - (k + 1.0) * (k + 1.0) * ek + (2.0 * k * k + 2.0 * k - 1.0) * ek1 - k * k * ek2)
        / (norm * om * om);
    Ok((m1, m2))
}

pub fn retrans_moments(epsilon: f64, k_max: u32) -> Result<RetransMoments> {
    let (e_r, e_r2) = moments_r(epsilon, k_max)?;
    let (e_psi, e_psi2) = moments_psi(epsilon, k_max)?;
    Ok(RetransMoments { e_r, e_r2, e_psi, e_psi2, e_n2: e_r2 - 2.0 * e_r + 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMoments {
    pub e_l: f64,
    pub e_l2: f64,
    /// `E[L²]` with the failed-sample busy-time term taken as
    /// `E[N]·K·Var[b] + (E[N])²·K²·E[b]²`, which drops `Var[N]`. Audit only.
    pub e_l2_paper_variant: f64,
}

/// Epoch-length moments from the busy-time moments directly.
///
/// Unlike [`epoch_moments`] this does not require a valid busy-time law, so
/// limiting cases such as a zero busy time can be evaluated.
pub fn epoch_moments_from(
    epsilon: f64,
    k_max: u32,
    zeta: f64,
    busy_mean: f64,
    busy_second_moment: f64,
) -> Result<EpochMoments> {
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!("post-sampling wait must be >= 0, got {zeta}")));
    }
    let m = retrans_moments(epsilon, k_max)?;
    let k = k_max as f64;
    let b1 = busy_mean;
    let var = busy_second_moment - b1 * b1;
    let e_n = m.e_r - 1.0;

    // Failed samples: R·ζ plus N·K i.i.d. busy times.
    let failed_mean = m.e_r * zeta + e_n * k * b1;
    let cross_wait = m.e_r2 * zeta * zeta + 2.0 * (m.e_r2 - m.e_r) * zeta * k * b1;
    let failed_busy_sq = e_n * k * var + m.e_n2 * k * k * b1 * b1;
    let failed_busy_sq_variant = e_n * k * var + e_n * e_n * k * k * b1 * b1;
    // Delivered sample: ψ i.i.d. busy times.
    let delivered_mean = m.e_psi * b1;
    let delivered_sq = m.e_psi * var + m.e_psi2 * b1 * b1;

    let shared = delivered_sq + 2.0 * failed_mean * delivered_mean + cross_wait;
    Ok(EpochMoments {
        e_l: failed_mean + delivered_mean,
        e_l2: shared + failed_busy_sq,
        e_l2_paper_variant: shared + failed_busy_sq_variant,
    })
}

pub fn epoch_moments(params: &SystemParams, zeta: f64) -> Result<EpochMoments> {
    params.validate()?;
    epoch_moments_from(
        params.epsilon,
        params.k_max,
        zeta,
        params.busy.mean()?,
        params.busy.second_moment()?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub epsilon: f64,
    pub k_max: u32,
    pub zeta: f64,
    pub moments: RetransMoments,
    pub e_l: f64,
    pub e_l2: f64,
    pub avg_age: f64,
    pub variant_paper_e_l2: f64,
    pub avg_age_paper_variant: f64,
}

/// Long-term average age for `g(x) = x` and no pre-sampling wait.
pub fn average_age(params: &SystemParams, zeta: f64) -> Result<AnalyticReport> {
    if !params.penalty.is_linear() {
        return Err(Error::UnsupportedClosedForm(
            "the average-age closed form needs a linear penalty; use the simulator".into(),
        ));
    }
    let em = epoch_moments(params, zeta)?;
    let moments = retrans_moments(params.epsilon, params.k_max)?;
    let base = zeta + moments.e_psi * params.busy.mean()?;
    Ok(AnalyticReport {
        epsilon: params.epsilon,
        k_max: params.k_max,
        zeta,
        moments,
        e_l: em.e_l,
        e_l2: em.e_l2,
        avg_age: base + 0.5 * em.e_l2 / em.e_l,
        variant_paper_e_l2: em.e_l2_paper_variant,
        avg_age_paper_variant: base + 0.5 * em.e_l2_paper_variant / em.e_l,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSearch {
    pub k_star: u32,
    /// One report per `K = 1..=k_search_max`.
    pub curve: Vec<AnalyticReport>,
}

pub const DEFAULT_K_SEARCH_MAX: u32 = 50;

/// Best retransmission cap for a fixed post-sampling wait; ties go to the smaller `K`.
pub fn optimal_k(params: &SystemParams, zeta: f64, k_search_max: u32) -> Result<KSearch> {
    optimal_k_over(params, zeta, 1..=k_search_max)
}

/// Like [`optimal_k`] but over an arbitrary list of caps.
pub fn optimal_k_over(params: &SystemParams, zeta: f64, ks: impl IntoIterator<Item = u32>) -> Result<KSearch> {
    let curve = ks
        .into_iter()
        .map(|k| average_age(&params.with_k(k), zeta))
        .collect::<Result<Vec<_>>>()?;
    let best = curve
        .iter()
        .reduce(|best, r| {
            if r.avg_age < best.avg_age || (r.avg_age == best.avg_age && r.k_max < best.k_max) {
                r
            } else {
                best
            }
        })
        .ok_or_else(|| Error::InvalidParameter("empty retransmission-cap search range".into()))?;
    Ok(KSearch { k_star: best.k_max, curve })
}
