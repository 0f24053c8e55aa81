//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use aoi_core::analysis::{moments_psi, moments_r};
use aoi_core::rng::derive_seed;
use aoi_core::sim::{simulate_with, SimConfig};
use aoi_core::stats::chi_square_gof;
use aoi_core::{
    average_age, expected_leakage, simulate, solve_zeta, AgePenalty, BusyTimeDistribution, LeakageModel,
    PolicyContext, SystemParams,
};
use aoi_lab::commands::{validate_grid, Verdict};
use aoi_lab::config::{Cli, ExperimentConfig};
use clap::Parser;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config(args: &[&str]) -> ExperimentConfig {
    let mut argv = vec!["aoi-lab"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).expect("flags parse");
    ExperimentConfig::from_flags(cli.command.flags(), None).expect("config valid")
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut argv = vec!["aoi-lab".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = aoi_lab::run(argv, None, &mut out, &mut err);
    (code, out)
}

fn params(eps: f64, k: u32, busy: BusyTimeDistribution, penalty: AgePenalty) -> SystemParams {
    SystemParams::new(eps, k, f64::INFINITY, busy, LeakageModel::SyntheticExp { scale: 1.0 }, penalty).unwrap()
}

/// Compensated sum of `f(n)` for n = 1, 2, ... until the terms stay below 1e-300.
fn series(f: impl Fn(u64) -> f64) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut n = 1u64;
    loop {
        let t = f(n);
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        if t < 1e-300 && n > 10 {
            return sum;
        }
        n += 1;
    }
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for step in 1..=19 {
        let eps = 0.05 * step as f64;
        for k in 1..=20u32 {
            let q = eps.powi(k as i32);
            let r_pmf = |r: u64| q.powi(r as i32 - 1) * (1.0 - q);
            let er = series(|r| r as f64 * r_pmf(r));
            let er2 = series(|r| (r * r) as f64 * r_pmf(r));
            let norm: f64 = (1..=k).map(|j| eps.powi(j as i32 - 1) * (1.0 - eps)).sum();
            let psi_pmf = |j: u32| eps.powi(j as i32 - 1) * (1.0 - eps) / norm;
            let ep: f64 = (1..=k).map(|j| j as f64 * psi_pmf(j)).sum();
            let ep2: f64 = (1..=k).map(|j| (j * j) as f64 * psi_pmf(j)).sum();
            let (cr, cr2) = moments_r(eps, k).map_err(|e| e.to_string())?;
            let (cp, cp2) = moments_psi(eps, k).map_err(|e| e.to_string())?;
            for (a, b) in [(cr, er), (cr2, er2), (cp, ep), (cp2, ep2)] {
                worst = worst.max((a - b).abs());
            }
            count += 1;
        }
    }
    check(worst <= 1e-10, format!("max |closed - brute force| = {worst:e}"))?;
    Ok(format!("{count} (eps, K) pairs, max deviation {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let model = LeakageModel::SyntheticExp { scale: 1.0 };
    let exp1 = BusyTimeDistribution::exponential(1.0).unwrap();
    let s = solve_zeta(&model, &exp1, 0.25).map_err(|e| e.to_string())?;
    let err = (s.zeta - std::f64::consts::LN_2).abs();
    check(!s.natural_cover && err <= 1e-6, format!("zeta(0.25) = {} (|err| {err:e})", s.zeta))?;
    let cover = solve_zeta(&model, &exp1, 0.75).map_err(|e| e.to_string())?;
    check(cover.zeta == 0.0 && cover.natural_cover, format!("Delta=0.75 gave {cover:?}"))?;

    let ou = LeakageModel::OuMutualInfo { sigma2: 2.0, theta: 1.0, sigma02: 1.0 };
    let wiener = LeakageModel::WienerEstimation { sigma02: 1.0 };
    let cases = [
        (model, exp1.clone(), 0.25),
        (model, exp1.clone(), 0.05),
        (model, BusyTimeDistribution::deterministic(0.5).unwrap(), 0.3),
        (ou, BusyTimeDistribution::exponential(10.0).unwrap(), 0.2),
        (ou, BusyTimeDistribution::empirical(vec![0.05, 0.1, 0.4]).unwrap(), 0.15),
        (wiener, exp1, 1.5),
    ];
    let mut worst = 0.0f64;
    for (m, d, delta) in &cases {
        let s = solve_zeta(m, d, *delta).map_err(|e| e.to_string())?;
        check(!s.natural_cover, format!("{m:?} at {delta} unexpectedly not binding"))?;
        let back = expected_leakage(m, d, s.zeta).map_err(|e| e.to_string())?;
        worst = worst.max((back - delta).abs());
    }
    check(worst <= 1e-9, format!("re-evaluated leakage off by {worst:e}"))?;

    let (code, out) = run_cli(&["zeta", "--leakage", "synth-exp", "--scale", "1", "--busy", "exp", "--rate", "1", "--delta", "0.25"]);
    check(code == 0 && String::from_utf8_lossy(&out).contains("zeta: 0.693147181"), "cli zeta output")?;
    Ok(format!("zeta = {:.12}, natural cover at 0.75, binding residual <= {worst:.1e}", s.zeta))
}

fn criterion_3() -> Outcome {
    for rate in [0.5, 1.0, 2.0, 10.0] {
        let r = average_age(&params(0.0, 1, BusyTimeDistribution::exponential(rate).unwrap(), AgePenalty::Linear), 0.0)
            .map_err(|e| e.to_string())?;
        check(r.avg_age == 2.0 / rate, format!("closed form at rate {rate}: {} != {}", r.avg_age, 2.0 / rate))?;
    }
    let p = params(0.0, 1, BusyTimeDistribution::exponential(1.0).unwrap(), AgePenalty::Linear);
    let r = simulate(&p, 0.0, None, &SimConfig::new(1_000_000, 3)).map_err(|e| e.to_string())?;
    let z = (r.avg_penalty - 2.0) / r.avg_penalty_stderr;
    check(z.abs() <= 3.0, format!("simulated {} +/- {}", r.avg_penalty, r.avg_penalty_stderr))?;
    Ok(format!("closed form exact; simulated {:.5} +/- {:.5} (z = {z:+.2})", r.avg_penalty, r.avg_penalty_stderr))
}

fn show(v: &Verdict) -> String {
    format!(
        "eps={} K={} rate={} zeta={}: sim {:.5} +/- {:.5}, corrected {:.5} (z {:+.2}), paper variant {:.5} (z {:+.2})",
        v.eps,
        v.k,
        v.param,
        v.zeta,
        v.simulated,
        v.stderr,
        v.corrected,
        v.z_corrected(),
        v.paper_variant,
        v.z_paper_variant()
    )
}

fn criterion_4() -> Outcome {
    let named = average_age(&params(0.5, 2, BusyTimeDistribution::exponential(1.0).unwrap(), AgePenalty::Linear), 0.0)
        .map_err(|e| e.to_string())?;
    check((named.avg_age - 10.0 / 3.0).abs() < 1e-12, format!("corrected at named point {}", named.avg_age))?;
    check(
        (named.avg_age_paper_variant - 26.0 / 9.0).abs() < 1e-12,
        format!("paper variant at named point {}", named.avg_age_paper_variant),
    )?;

    let epochs = "10000000";
    let mut verdicts = validate_grid(&config(&[
        "validate", "--eps", "0.2,0.5,0.8", "--k", "1,2,5", "--rate", "1", "--zeta", "0", "--epochs", epochs, "--seed", "4",
    ]))
    .map_err(|e| e.message)?;
    verdicts.extend(
        validate_grid(&config(&[
            "validate", "--eps", "0.5", "--k", "2", "--rate", "10", "--zeta", "0.1", "--epochs", epochs, "--seed", "5",
        ]))
        .map_err(|e| e.message)?,
    );
    let mut failures = Vec::new();
    let mut material = 0;
    for v in &verdicts {
        println!("    {}", show(v));
        if v.z_corrected().abs() > 3.0 {
            failures.push(format!("corrected form rejected at {}", show(v)));
        }
        if (v.corrected - v.paper_variant).abs() > 6.0 * v.stderr {
            material += 1;
            if v.z_paper_variant().abs() <= 3.0 {
                failures.push(format!("paper variant not rejected at {}", show(v)));
            }
        }
    }
    check(verdicts.len() >= 9, "grid too small")?;
    check(failures.is_empty(), failures.join("; "))?;
    Ok(format!("{} points agree with the corrected form; paper variant rejected at all {material} points where the forms differ", verdicts.len()))
}

fn criterion_5() -> Outcome {
    let grids: [&[&str]; 2] = [
        &["validate", "--leakage", "ou", "--sigma2", "2", "--theta", "1", "--sigma02", "1", "--rate", "10", "--delta", "0.2"],
        &["validate", "--leakage", "synth-exp", "--scale", "1", "--busy", "exp", "--rate", "1", "--delta", "0.25"],
    ];
    let mut lines = Vec::new();
    for (i, g) in grids.iter().enumerate() {
        let seed = (50 + i).to_string();
        let mut args = g.to_vec();
        args.extend_from_slice(&["--eps", "0,0.5", "--k", "1,4", "--epochs", "1000000", "--seed", &seed]);
        let cfg = config(&args);
        let delta = cfg.wait_values()[0];
        for v in validate_grid(&cfg).map_err(|e| e.message)? {
            check(v.zeta > 0.0, format!("budget {delta} not binding"))?;
            let slack = delta - v.mean_peak_leakage;
            check(
                v.mean_peak_leakage <= delta + 3.0 * v.leakage_stderr,
                format!("leakage {} > {delta} + 3 x {}", v.mean_peak_leakage, v.leakage_stderr),
            )?;
            if v.eps == 0.0 {
                check(slack.abs() <= 3.0 * v.leakage_stderr, format!("slack {slack} at eps=0 exceeds 3 stderr"))?;
            }
            lines.push(format!("Δ={delta} eps={} K={}: slack {slack:+.2e} ({:.1} se)", v.eps, v.k, slack / v.leakage_stderr));
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    Ok(format!("{} runs within budget, tight at eps = 0", lines.len()))
}

fn sweep_rows(args: &[&str]) -> Result<Vec<Vec<String>>, String> {
    let (code, out) = run_cli(args);
    check(code == 0, format!("sweep exited {code}"))?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    Ok(text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

/// K* per ε (ascending) for one busy rate.
fn kstar(rows: &[Vec<String>], rate: &str) -> Vec<u32> {
    rows.iter().filter(|r| r[2] == rate && r[10] == "true").map(|r| r[0].parse().unwrap()).collect()
}

fn curve(rows: &[Vec<String>], rate: &str, zeta: &str) -> Vec<f64> {
    rows.iter().filter(|r| r[2] == rate && r[3] == zeta).map(|r| r[8].parse().unwrap()).collect()
}

fn criterion_6() -> Outcome {
    let eps = "0.1,0.3,0.5,0.7";
    let lam = sweep_rows(&["sweep", "--eps", eps, "--rate", "1,10,20", "--zeta", "0.122"])?;
    let (k1, k10, k20) = (kstar(&lam, "1"), kstar(&lam, "10"), kstar(&lam, "20"));
    check(k1 == [1, 1, 1, 1], format!("lambda=1 K* = {k1:?}"))?;
    check(k10.windows(2).all(|w| w[0] <= w[1]), format!("lambda=10 K* not nondecreasing: {k10:?}"))?;
    check(k20.iter().zip(&k10).all(|(a, b)| a >= b), format!("lambda=20 {k20:?} below lambda=10 {k10:?}"))?;

    let tight = sweep_rows(&["sweep", "--eps", eps, "--rate", "10", "--zeta", "0.122,0.24"])?;
    let high: Vec<u32> = tight
        .iter()
        .filter(|r| r[3] == "0.24" && r[10] == "true")
        .map(|r| r[0].parse().unwrap())
        .collect();
    check(high.iter().zip(&k10).all(|(a, b)| a >= b), format!("zeta=0.24 K* {high:?} below {k10:?}"))?;
    let (lo, hi) = (curve(&tight, "10", "0.122"), curve(&tight, "10", "0.24"));
    check(lo.len() == 200 && hi.len() == lo.len(), "curve sizes")?;
    check(hi.iter().zip(&lo).all(|(h, l)| h > l), "zeta=0.24 curve not strictly above zeta=0.122")?;
    Ok(format!("K*: lambda=1 {k1:?}, lambda=10 {k10:?}, lambda=20 {k20:?}, lambda=10 zeta=0.24 {high:?}"))
}

fn criterion_7() -> Outcome {
    for c in [0.5, 1.0, 2.0] {
        let busy = BusyTimeDistribution::deterministic(c).unwrap();
        let policy = PolicyContext::new(busy.clone(), 0.0, AgePenalty::Linear)
            .and_then(|ctx| ctx.solve_gamma())
            .map_err(|e| e.to_string())?;
        check((policy.gamma - 1.5 * c).abs() <= 1e-8, format!("det {c}: gamma {}", policy.gamma))?;
        let mut max_wait = 0.0f64;
        let cfg = SimConfig::new(10_000, 1);
        simulate_with(&params(0.0, 1, busy, AgePenalty::Linear), 0.0, Some(&policy), &cfg, |i, rec| {
            if i >= cfg.burn_in {
                max_wait = max_wait.max(rec.pre_wait);
            }
        })
        .map_err(|e| e.to_string())?;
        check(max_wait == 0.0, format!("det {c}: steady-state wait {max_wait}"))?;
    }

    let mut lines = Vec::new();
    for (i, g) in [AgePenalty::Linear, AgePenalty::Power { p: 2.0 }, AgePenalty::ExponentialPenalty { alpha: 0.25 }]
        .into_iter()
        .enumerate()
    {
        let busy = BusyTimeDistribution::exponential(1.0).unwrap();
        let policy = PolicyContext::new(busy.clone(), 0.0, g)
            .and_then(|ctx| ctx.solve_gamma())
            .map_err(|e| e.to_string())?;
        let p = params(0.0, 1, busy, g);
        let cfg = SimConfig::new(1_000_000, derive_seed(70, i as u64));
        let zero = simulate(&p, 0.0, None, &cfg).map_err(|e| e.to_string())?;
        let thr = simulate(&p, 0.0, Some(&policy), &cfg).map_err(|e| e.to_string())?;
        check(
            thr.avg_penalty <= zero.avg_penalty + 3.0 * zero.avg_penalty_stderr,
            format!("{g:?}: threshold {} vs zero-wait {} +/- {}", thr.avg_penalty, zero.avg_penalty, zero.avg_penalty_stderr),
        )?;
        lines.push(format!(
            "{g:?}: gamma* {:.6}, threshold {:.5} +/- {:.5}, zero-wait {:.5} +/- {:.5}",
            policy.gamma, thr.avg_penalty, thr.avg_penalty_stderr, zero.avg_penalty, zero.avg_penalty_stderr
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    Ok("gamma* = 1.5c with no steady-state wait; threshold never worse than zero-wait".into())
}

fn criterion_8() -> Outcome {
    let mut worst_p = 1.0f64;
    for (i, (eps, k)) in [(0.3, 2u32), (0.5, 4), (0.8, 3)].into_iter().enumerate() {
        let p = params(eps, k, BusyTimeDistribution::exponential(1.0).unwrap(), AgePenalty::Linear);
        let r = simulate(&p, 0.0, None, &SimConfig::new(1_000_000, 40 + i as u64)).map_err(|e| e.to_string())?;
        let q = eps.powi(k as i32);
        let bins = r.r_histogram.len();
        let mut r_probs: Vec<f64> = (0..bins - 1).map(|n| q.powi(n as i32) * (1.0 - q)).collect();
        r_probs.push(q.powi(bins as i32 - 1));
        let norm = 1.0 - q;
        let psi_probs: Vec<f64> = (0..k).map(|j| eps.powi(j as i32) * (1.0 - eps) / norm).collect();
        for (name, t) in [("R", chi_square_gof(&r.r_histogram, &r_probs)), ("psi", chi_square_gof(&r.psi_histogram, &psi_probs))] {
            check(t.passes(1e-3), format!("{name} at ({eps}, {k}): p = {}", t.p_value))?;
            worst_p = worst_p.min(t.p_value);
        }
    }
    Ok(format!("all six tests pass, smallest p-value {worst_p:.3}"))
}

fn criterion_9() -> Outcome {
    let dir = std::env::temp_dir().join(format!("aoi-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..3 {
        let path = dir.join(format!("sweep{i}.csv"));
        let p = path.to_str().unwrap();
        let (code, _) = run_cli(&[
            "sweep", "--eps", "0.7,0.1,0.3", "--rate", "20,1,10", "--zeta", "0.24,0.122", "--seed", "9", "--out", p,
        ]);
        check(code == 0, format!("sweep exited {code}"))?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(outputs.windows(2).all(|w| w[0] == w[1]), "sweep CSV differs between runs")?;
    Ok(format!("3 runs, {} bytes each, identical", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "moment oracle equivalence", Duration::from_secs(1), criterion_1),
        (2, "post-sampling wait solver", Duration::from_secs(1), criterion_2),
        (3, "zero-wait classic value", Duration::from_secs(10), criterion_3),
        (4, "second-moment adjudication", Duration::from_secs(300), criterion_4),
        (5, "leakage feasibility", Duration::from_secs(120), criterion_5),
        (6, "optimal-K trends", Duration::from_secs(10), criterion_6),
        (7, "threshold pre-sampling", Duration::from_secs(60), criterion_7),
        (8, "distribution conformance", Duration::from_secs(30), criterion_8),
        (9, "sweep determinism", Duration::from_secs(10), criterion_9),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("[PASS] criterion {n} ({name}, {elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {n} ({name}, {elapsed:.2?}): {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
