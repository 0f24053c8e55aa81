//! Monte Carlo and brute-force oracles for the closed forms and the simulator.

use aoi_core::analysis::{epoch_moments_from, moments_psi, moments_r};
use aoi_core::rng::RandomSource;
use aoi_core::sim::{simulate, SimConfig};
use aoi_core::stats::chi_square_gof;
use aoi_core::{expected_leakage, AgePenalty, BusyTimeDistribution, LeakageModel, SystemParams};

fn mean_and_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

#[test]
fn expected_leakage_agrees_with_sampling() {
    let models = [
        LeakageModel::OuMutualInfo { sigma2: 2.0, theta: 1.0, sigma02: 1.0 },
        LeakageModel::WienerEstimation { sigma02: 1.0 },
        LeakageModel::SyntheticExp { scale: 1.0 },
    ];
    let dists = [
        BusyTimeDistribution::exponential(1.0).unwrap(),
        BusyTimeDistribution::deterministic(0.7).unwrap(),
        BusyTimeDistribution::empirical(vec![0.1, 0.4, 0.4, 2.5]).unwrap(),
    ];
    for (i, m) in models.iter().enumerate() {
        for (j, d) in dists.iter().enumerate() {
            let shift = 0.5;
            let exact = expected_leakage(m, d, shift).unwrap();
            let mut rng = RandomSource::new(1000 + (i * 3 + j) as u64);
            let (mc, se) = mean_and_stderr((0..10_000_000).map(|_| m.eval(shift + d.sample(&mut rng)).unwrap()));
            assert!((mc - exact).abs() <= 3.0 * se.max(1e-15), "{m:?} {d:?}: {exact} vs {mc} ± {se}");
        }
    }
}

/// Samples `L` directly from its definition, with no shared code beyond the RNG.
fn sample_epoch_length(rng: &mut RandomSource, eps: f64, k: u32, zeta: f64, rate: f64) -> f64 {
    let mut len = 0.0;
    loop {
        len += zeta;
        for _ in 0..k {
            len += -rng.open01().ln() / rate;
            if rng.uniform() >= eps {
                return len;
            }
        }
    }
}

#[test]
fn epoch_second_moment_matches_sampling() {
    for (eps, k, zeta, rate) in [(0.5, 2, 0.0, 1.0), (0.8, 3, 0.2, 2.0), (0.3, 1, 0.5, 10.0)] {
        let em = epoch_moments_from(eps, k, zeta, 1.0 / rate, 2.0 / (rate * rate)).unwrap();
        let mut rng = RandomSource::new(77);
        let ls: Vec<f64> = (0..10_000_000).map(|_| sample_epoch_length(&mut rng, eps, k, zeta, rate)).collect();
        let (m1, s1) = mean_and_stderr(ls.iter().copied());
        let (m2, s2) = mean_and_stderr(ls.iter().map(|l| l * l));
        assert!((m1 - em.e_l).abs() <= 3.0 * s1, "{eps} {k}: E[L] {m1} vs {}", em.e_l);
        assert!((m2 - em.e_l2).abs() <= 3.0 * s2, "{eps} {k}: E[L²] {m2} ± {s2} vs {}", em.e_l2);
    }
}

fn params(eps: f64, k: u32, rate: f64) -> SystemParams {
    SystemParams::new(
        eps,
        k,
        0.2,
        BusyTimeDistribution::exponential(rate).unwrap(),
        LeakageModel::SyntheticExp { scale: 1.0 },
        AgePenalty::Linear,
    )
    .unwrap()
}

#[test]
fn simulated_counts_match_closed_moments() {
    for (idx, (eps, k)) in [(0.1, 1), (0.3, 2), (0.5, 4), (0.8, 3), (0.9, 10)].into_iter().enumerate() {
        let r = simulate(&params(eps, k, 1.0), 0.1, None, &SimConfig::new(1_000_000, idx as u64)).unwrap();
        let (er, er2) = moments_r(eps, k).unwrap();
        let (ep, ep2) = moments_psi(eps, k).unwrap();
        let n = r.n_epochs as f64;
        let se_r = ((er2 - er * er) / n).sqrt();
        let se_p = ((ep2 - ep * ep) / n).sqrt();
        assert!((r.mean_r - er).abs() <= 3.0 * se_r.max(1e-12), "{eps} {k}: R {} vs {er}", r.mean_r);
        assert!((r.mean_psi - ep).abs() <= 3.0 * se_p.max(1e-12), "{eps} {k}: psi {} vs {ep}", r.mean_psi);
    }
}

pub fn r_pmf(eps: f64, k: u32, bins: usize) -> Vec<f64> {
    let q = eps.powi(k as i32);
    let mut p: Vec<f64> = (0..bins - 1).map(|i| q.powi(i as i32) * (1.0 - q)).collect();
    p.push(q.powi(bins as i32 - 1));
    p
}

#[test]
fn chi_square_on_sample_counts() {
    for (idx, (eps, k)) in [(0.3, 2), (0.5, 4), (0.8, 3)].into_iter().enumerate() {
        let r = simulate(&params(eps, k, 1.0), 0.0, None, &SimConfig::new(1_000_000, 40 + idx as u64)).unwrap();
        let bins = r.r_histogram.len();
        let t = chi_square_gof(&r.r_histogram, &r_pmf(eps, k, bins));
        assert!(t.passes(1e-3), "R at {eps},{k}: {t:?}");
        let norm = 1.0 - eps.powi(k as i32);
        let psi: Vec<f64> = (0..k).map(|j| eps.powi(j as i32) * (1.0 - eps) / norm).collect();
        let t = chi_square_gof(&r.psi_histogram, &psi);
        assert!(t.passes(1e-3), "psi at {eps},{k}: {t:?}");
    }
}

#[test]
fn chi_square_rejects_a_wrong_cap() {
    // Counts from K = 3 tested against the K = 2 law.
    let r = simulate(&params(0.5, 3, 1.0), 0.0, None, &SimConfig::new(200_000, 3)).unwrap();
    let bins = r.r_histogram.len();
    assert!(!chi_square_gof(&r.r_histogram, &r_pmf(0.5, 2, bins)).passes(1e-3));
}

/// Asymptotic Kolmogorov–Smirnov p-value of `xs` against U(0, 1).
fn ks_uniform_p(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    let t = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let p: f64 = (1..=100).map(|j| 2.0 * (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64 * t * t).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn chi_square_p_values_are_uniform_across_seeds() {
    for (eps, k) in [(0.3, 2), (0.5, 4), (0.8, 3)] {
        let (mut r_p, mut psi_p) = (Vec::new(), Vec::new());
        for seed in 0..120u64 {
            let r = simulate(&params(eps, k, 1.0), 0.0, None, &SimConfig::new(100_000, 1_000 + seed)).unwrap();
            r_p.push(chi_square_gof(&r.r_histogram, &r_pmf(eps, k, r.r_histogram.len())).p_value);
            let norm = 1.0 - eps.powi(k as i32);
            let psi: Vec<f64> = (0..k).map(|j| eps.powi(j as i32) * (1.0 - eps) / norm).collect();
            psi_p.push(chi_square_gof(&r.psi_histogram, &psi).p_value);
        }
        assert!(ks_uniform_p(r_p) > 1e-3, "R p-values not uniform at {eps},{k}");
        assert!(ks_uniform_p(psi_p) > 1e-3, "psi p-values not uniform at {eps},{k}");
    }
}
