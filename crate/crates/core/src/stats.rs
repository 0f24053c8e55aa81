//! Small statistics helpers for the Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Standard error of the grand mean from batch values, `sd / sqrt(n)`.
/// Zero when fewer than two batches exist.
pub fn batch_stderr(batches: &[f64]) -> f64 {
    let n = batches.len();
    if n < 2 {
        return 0.0;
    }
    let mean = batches.iter().sum::<f64>() / n as f64;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson goodness-of-fit of `observed` counts against bin probabilities.
///
/// `probs` must sum to 1 with any unbounded tail already folded into the last
/// bin. Bins are merged from the right until each expects at least five counts.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), probs.len(), "one probability per bin");
    let total: u64 = observed.iter().sum();
    let n = total as f64;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs).rev() {
        acc.0 += o as f64;
        acc.1 += p * n;
        if acc.1 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }

    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if statistic.is_finite() {
        ChiSquared::new(dof as f64).expect("dof > 0").sf(statistic)
    } else {
        0.0
    };
    ChiSquareTest { statistic, dof, p_value }
}
