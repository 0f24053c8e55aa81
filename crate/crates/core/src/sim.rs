//! Epoch-by-epoch Monte Carlo simulation of the full system.
//!
//! An epoch runs from one delivery to the next: an optional pre-sampling wait,
//! then samples drawn one after another, each held for `ζ` and then sent up to
//! `K` times. Every attempt occupies the channel for a fresh busy time and is
//! erased independently with probability `ε`; a sample whose `K` attempts are
//! all erased is discarded. The age at the start of the next epoch is the age
//! of the delivered sample at its delivery.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::params::SystemParams;
use crate::presampling::ThresholdPolicy;
use crate::rng::RandomSource;
use crate::stats::batch_stderr;

pub const BATCHES: usize = 30;
pub const DEFAULT_BURN_IN: u64 = 1_000;
pub const MAX_SAMPLES_PER_EPOCH: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_epochs: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Rebuild absolute event times from a per-epoch draw log and check the
    /// channel timing constraints. Slow.
    pub debug_checks: bool,
}

impl SimConfig {
    pub fn new(n_epochs: u64, seed: u64) -> Self {
        Self { n_epochs, burn_in: DEFAULT_BURN_IN, seed, debug_checks: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub n_samples: u64,
    pub n_attempts_final: u32,
    pub pre_wait: f64,
    pub length: f64,
    pub starting_age: f64,
    pub delivered_age: f64,
    /// `∫₀^length g(starting_age + t) dt`
    pub penalty_integral: f64,
}

impl EpochRecord {
    /// Tab-separated trace line (without newline): epoch index, samples,
    /// final attempts, length, starting age, delivered age, penalty integral.
    pub fn trace_line(&self, epoch_index: u64) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            epoch_index,
            self.n_samples,
            self.n_attempts_final,
            sig9(self.length),
            sig9(self.starting_age),
            sig9(self.delivered_age),
            sig9(self.penalty_integral)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Time average of `g(a(t))` over the measured epochs (ratio of sums).
    pub avg_penalty: f64,
    pub avg_penalty_stderr: f64,
    /// Mean of `ρ(delivered age)`.
    pub mean_peak_leakage: f64,
    pub mean_peak_leakage_stderr: f64,
    pub mean_epoch_length: f64,
    pub mean_r: f64,
    pub mean_psi: f64,
    pub n_epochs: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Simulated clock after the last epoch (burn-in included).
    pub final_clock: f64,
    /// `r_histogram[i]` counts epochs with `i + 1` samples.
    pub r_histogram: Vec<u64>,
    /// `psi_histogram[i]` counts deliveries on attempt `i + 1`.
    pub psi_histogram: Vec<u64>,
    /// A pre-sampling policy was applied on a lossy channel, outside the
    /// setting it was derived for.
    pub heuristic_policy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub satisfied: bool,
    /// `Δ − mean peak leakage`
    pub slack: f64,
    pub stderr: f64,
}

/// Leakage budget check with a three-standard-error allowance.
pub fn leakage_feasibility(result: &SimulationResult, delta: f64) -> Feasibility {
    let stderr = result.mean_peak_leakage_stderr;
    Feasibility {
        satisfied: result.mean_peak_leakage <= delta + 3.0 * stderr,
        slack: delta - result.mean_peak_leakage,
        stderr,
    }
}

#[derive(Debug, Clone, Copy)]
enum Draw {
    PreWait(f64),
    Sample(f64),
    Attempt { busy: f64, erased: bool },
}

#[derive(Default, Clone, Copy)]
struct Batch {
    penalty: f64,
    length: f64,
    /// Running mean, so identical draws average to themselves exactly.
    leakage_mean: f64,
    epochs: u64,
}

pub fn simulate(
    params: &SystemParams,
    zeta: f64,
    policy: Option<&ThresholdPolicy>,
    cfg: &SimConfig,
) -> Result<SimulationResult> {
    simulate_with(params, zeta, policy, cfg, |_, _| {})
}

/// Writes the trace of the measured epochs to `out`, one line per epoch.
pub fn simulate_traced<W: Write>(
    params: &SystemParams,
    zeta: f64,
    policy: Option<&ThresholdPolicy>,
    cfg: &SimConfig,
    out: &mut W,
) -> io::Result<Result<SimulationResult>> {
    let mut io_err = None;
    let burn_in = cfg.burn_in;
    let result = simulate_with(params, zeta, policy, cfg, |i, rec| {
        if i >= burn_in && io_err.is_none() {
            if let Err(e) = writeln!(out, "{}", rec.trace_line(i - burn_in)) {
                io_err = Some(e);
            }
        }
    });
    match io_err {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

/// Like [`simulate`], calling `on_epoch(index, record)` for every epoch,
/// burn-in included (indices below `cfg.burn_in`).
pub fn simulate_with<F>(
    params: &SystemParams,
    zeta: f64,
    policy: Option<&ThresholdPolicy>,
    cfg: &SimConfig,
    mut on_epoch: F,
) -> Result<SimulationResult>
where
    F: FnMut(u64, &EpochRecord),
{
    params.validate()?;
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter(format!("post-sampling wait must be >= 0, got {zeta}")));
    }
    if cfg.n_epochs == 0 {
        return Err(Error::InvalidParameter("need at least one measured epoch".into()));
    }

    let eps = params.epsilon;
    let k_max = params.k_max;
    let busy = &params.busy;
    let mut rng = RandomSource::new(cfg.seed);

    // Virtual delivery at time 0: the age carried by a sample that got through.
    let mut starting_age = loop {
        let mut age = zeta;
        let mut delivered = false;
        for _ in 0..k_max {
            age += busy.sample(&mut rng);
            if !rng.bernoulli(eps) {
                delivered = true;
                break;
            }
        }
        if delivered {
            break age;
        }
    };

    let n = cfg.n_epochs;
    let n_batches = (BATCHES as u64).min(n);
    let per_batch = n / n_batches;
    let mut batches = vec![Batch::default(); n_batches as usize];
    let mut r_histogram: Vec<u64> = Vec::new();
    let mut psi_histogram = vec![0u64; k_max as usize];
    let mut sum_r = 0u64;
    let mut sum_psi = 0u64;
    let mut leakage_mean = 0.0;
    let mut clock = 0.0;
    let mut log: Vec<Draw> = Vec::new();

    for epoch in 0..cfg.burn_in + n {
        log.clear();
        let pre_wait = policy.map_or(0.0, |p| p.wait_time(starting_age));
        let mut length = pre_wait;
        if cfg.debug_checks {
            log.push(Draw::PreWait(pre_wait));
        }

        let mut n_samples = 0u64;
        let (psi, delivered_age) = 'samples: loop {
            n_samples += 1;
            if n_samples > MAX_SAMPLES_PER_EPOCH {
                return Err(Error::Overflow(format!("epoch {epoch} exceeded {MAX_SAMPLES_PER_EPOCH} samples")));
            }
            length += zeta;
            let mut age = zeta;
            if cfg.debug_checks {
                log.push(Draw::Sample(zeta));
            }
            for attempt in 1..=k_max {
                let b = busy.sample(&mut rng);
                length += b;
                age += b;
                let erased = rng.bernoulli(eps);
                if cfg.debug_checks {
                    log.push(Draw::Attempt { busy: b, erased });
                }
                if !erased {
                    break 'samples (attempt, age);
                }
            }
        };

        let record = EpochRecord {
            n_samples,
            n_attempts_final: psi,
            pre_wait,
            length,
            starting_age,
            delivered_age,
            penalty_integral: params.penalty.integral(starting_age, length),
        };
        if cfg.debug_checks {
            check_epoch(&log, &record, k_max, clock)?;
        }
        clock += length;
        on_epoch(epoch, &record);

        if epoch >= cfg.burn_in {
            let i = epoch - cfg.burn_in;
            let b = &mut batches[(i / per_batch).min(n_batches - 1) as usize];
            b.penalty += record.penalty_integral;
            b.length += length;
            let leak = params.leakage.eval(delivered_age)?;
            b.epochs += 1;
            b.leakage_mean += (leak - b.leakage_mean) / b.epochs as f64;
            leakage_mean += (leak - leakage_mean) / (i + 1) as f64;

            let r = n_samples as usize;
            if r_histogram.len() < r {
                r_histogram.resize(r, 0);
            }
            r_histogram[r - 1] += 1;
            psi_histogram[psi as usize - 1] += 1;
            sum_r += n_samples;
            sum_psi += psi as u64;
        }
        starting_age = delivered_age;
    }

    let total_penalty: f64 = batches.iter().map(|b| b.penalty).sum();
    let total_length: f64 = batches.iter().map(|b| b.length).sum();
    let ratios: Vec<f64> = batches.iter().map(|b| b.penalty / b.length).collect();
    let leaks: Vec<f64> = batches.iter().map(|b| b.leakage_mean).collect();
    let nf = n as f64;

    Ok(SimulationResult {
        avg_penalty: total_penalty / total_length,
        avg_penalty_stderr: batch_stderr(&ratios),
        mean_peak_leakage: leakage_mean,
        mean_peak_leakage_stderr: batch_stderr(&leaks),
        mean_epoch_length: total_length / nf,
        mean_r: sum_r as f64 / nf,
        mean_psi: sum_psi as f64 / nf,
        n_epochs: n,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        final_clock: clock,
        r_histogram,
        psi_histogram,
        heuristic_policy: policy.is_some() && eps > 0.0,
    })
}

/// Rebuilds sampling times `S_j`, transmission times `T_{j,k}` and the
/// delivery time from the draw log of one epoch and checks
/// `T_{j,1} ≥ S_j`, `T_{j,k+1} ≥ T_{j,k} + b_{j,k}`, `S_{j+1} ≥ T_{j,k_j} + b_{j,k_j}`.
fn check_epoch(log: &[Draw], rec: &EpochRecord, k_max: u32, epoch_start: f64) -> Result<()> {
    let fail = |msg: String| Err(Error::ConstraintViolation(format!("epoch starting at {epoch_start}: {msg}")));
    // Offsets from the previous delivery, accumulated in draw order.
    let mut t = 0.0;
    let mut samples: Vec<(f64, Vec<(f64, f64, bool)>)> = Vec::new();
    for d in log {
        match *d {
            Draw::PreWait(w) => t += w,
            Draw::Sample(z) => {
                let s = t;
                t += z;
                samples.push((s, Vec::new()));
            }
            Draw::Attempt { busy, erased } => {
                let Some((_, attempts)) = samples.last_mut() else {
                    return fail("attempt before any sample".into());
                };
                attempts.push((t, busy, erased));
                t += busy;
            }
        }
    }
    if t != rec.length {
        return fail(format!("reconstructed length {t} != recorded {}", rec.length));
    }
    if samples.len() as u64 != rec.n_samples {
        return fail(format!("{} samples in log, {} recorded", samples.len(), rec.n_samples));
    }

    let mut prev_end = 0.0;
    for (j, (s, attempts)) in samples.iter().enumerate() {
        let last_sample = j + 1 == samples.len();
        if *s < prev_end {
            return fail(format!("sample {j} generated at {s} before channel freed at {prev_end}"));
        }
        if attempts.is_empty() || attempts.len() > k_max as usize {
            return fail(format!("sample {j} has {} attempts (cap {k_max})", attempts.len()));
        }
        if attempts[0].0 < *s {
            return fail(format!("sample {j} transmitted before it was generated"));
        }
        for w in attempts.windows(2) {
            if w[1].0 < w[0].0 + w[0].1 {
                return fail(format!("sample {j} retransmitted while the channel was busy"));
            }
        }
        for (k, a) in attempts.iter().enumerate() {
            let is_delivery = last_sample && k + 1 == attempts.len();
            if a.2 == is_delivery {
                return fail(format!("sample {j} attempt {} has the wrong erasure outcome", k + 1));
            }
        }
        if !last_sample && attempts.len() != k_max as usize {
            return fail(format!("sample {j} discarded after {} attempts", attempts.len()));
        }
        let (tk, bk, _) = *attempts.last().expect("non-empty");
        prev_end = tk + bk;
        if last_sample {
            if attempts.len() as u32 != rec.n_attempts_final {
                return fail("final attempt count mismatch".into());
            }
            let age = prev_end - s;
            let tol = 1e-9 * rec.length.max(1.0);
            if (age - rec.delivered_age).abs() > tol {
                return fail(format!("delivered age {} vs reconstructed {age}", rec.delivered_age));
            }
            if rec.delivered_age > rec.length + tol {
                return fail("delivered sample predates the epoch".into());
            }
        }
    }
    Ok(())
}
