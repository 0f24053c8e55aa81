//! The five subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};

use aoi_core::analysis::optimal_k_over;
use aoi_core::rng::derive_seed;
use aoi_core::sim::simulate_traced;
use aoi_core::{
    average_age, leakage_feasibility, simulate, solve_zeta, BusyTimeDistribution, PolicyContext, SimConfig, SystemParams,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Format, PostWait, Presample};
use crate::output::{curve_row, emit, Cell, Table, CURVE_COLUMNS};
use crate::CliError;

/// One operating point of a grid, with its post-sampling wait resolved.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub eps: f64,
    /// Rate, deterministic value, or empirical mean.
    pub param: f64,
    pub busy: BusyTimeDistribution,
    pub delta: Option<f64>,
    pub zeta: f64,
    pub natural_cover: bool,
}

impl GridPoint {
    pub fn params(&self, cfg: &ExperimentConfig, k: u32) -> Result<SystemParams, CliError> {
        let delta = self.delta.unwrap_or(f64::INFINITY);
        Ok(SystemParams::new(self.eps, k, delta, self.busy.clone(), cfg.leakage, cfg.penalty)?)
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Cross product of the ε, busy-parameter and budget/wait axes, each ascending.
pub fn grid(cfg: &ExperimentConfig) -> Result<Vec<GridPoint>, CliError> {
    cfg.check_axes()?;
    let mut busy = cfg.busy.clone();
    busy.sort_by(|a, b| a.0.total_cmp(&b.0));
    busy.dedup_by(|a, b| a.0 == b.0);
    let waits = sorted(cfg.wait_values());

    // ζ depends on the busy law and the budget only.
    let mut resolved = Vec::with_capacity(busy.len() * waits.len());
    for (param, dist) in &busy {
        for &w in &waits {
            let (delta, zeta, natural_cover) = match cfg.post_wait {
                PostWait::Delta(_) => {
                    let z = solve_zeta(&cfg.leakage, dist, w)?;
                    (Some(w), z.zeta, z.natural_cover)
                }
                PostWait::Zeta(_) => (None, w, false),
            };
            resolved.push((*param, dist.clone(), delta, zeta, natural_cover));
        }
    }
    let mut points = Vec::new();
    for eps in sorted(&cfg.eps) {
        for (param, busy, delta, zeta, natural_cover) in &resolved {
            points.push(GridPoint {
                eps,
                param: *param,
                busy: busy.clone(),
                delta: *delta,
                zeta: *zeta,
                natural_cover: *natural_cover,
            });
        }
    }
    Ok(points)
}

/// Closed-form curves, one row per (grid point, K), K* flagged.
pub fn curve_table(cfg: &ExperimentConfig, points: &[GridPoint]) -> Result<Table, CliError> {
    let ks = cfg.k_values();
    let blocks = points
        .par_iter()
        .map(|p| {
            let search = optimal_k_over(&p.params(cfg, 1)?, p.zeta, ks.iter().copied())?;
            Ok(search.curve.iter().map(|r| curve_row(r, p.param, r.k_max == search.k_star)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(&CURVE_COLUMNS);
    table.rows = blocks.into_iter().flatten().collect();
    Ok(table)
}

fn table_bytes(table: &Table, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => Ok(table.to_json()),
    }
}

/// A single record: `key: value` lines by default, or a one-row table.
fn emit_record(cfg: &ExperimentConfig, stdout: &mut dyn Write, fields: Vec<(&str, Cell)>) -> Result<(), CliError> {
    let bytes = match cfg.format {
        None => fields.iter().map(|(k, v)| format!("{k}: {}\n", v.render())).collect::<String>().into_bytes(),
        Some(format) => {
            let mut t = Table::new(&fields.iter().map(|(k, _)| *k).collect::<Vec<_>>());
            t.rows.push(fields.into_iter().map(|(_, v)| v).collect());
            table_bytes(&t, format)?
        }
    };
    emit(cfg.out.as_deref(), stdout, &bytes)
}

pub fn cmd_zeta(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    cfg.single_point(false)?;
    let PostWait::Delta(deltas) = &cfg.post_wait else {
        return Err(CliError::config("zeta solves for a leakage budget; pass --delta"));
    };
    let (_, dist) = &cfg.busy[0];
    let sol = solve_zeta(&cfg.leakage, dist, deltas[0])?;
    let mut fields = vec![
        ("zeta", Cell::Num(sol.zeta)),
        ("natural_cover", Cell::Bool(sol.natural_cover)),
        ("residual", Cell::Num(sol.residual)),
    ];
    if sol.natural_cover && cfg.format.is_none() {
        fields.push(("note", Cell::Text("natural cover: the busy time alone meets the budget".into())));
    }
    emit_record(cfg, stdout, fields)
}

pub fn cmd_analyze(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    cfg.single_point(true)?;
    let table = curve_table(cfg, &grid(cfg)?)?;
    emit(cfg.out.as_deref(), stdout, &table_bytes(&table, cfg.format.unwrap_or(Format::Csv))?)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let table = curve_table(cfg, &grid(cfg)?)?;
    emit(cfg.out.as_deref(), stdout, &table_bytes(&table, cfg.format.unwrap_or(Format::Csv))?)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    cfg.single_point(false)?;
    let point = grid(cfg)?.remove(0);
    let k = cfg.k.first().copied().unwrap_or(1);
    let params = point.params(cfg, k)?;
    let policy = match cfg.presample {
        Presample::None => None,
        Presample::Threshold => Some(PolicyContext::new(point.busy.clone(), point.zeta, cfg.penalty)?.solve_gamma()?),
    };
    let sim_cfg = SimConfig { n_epochs: cfg.n_epochs, burn_in: cfg.burn_in, seed: cfg.seed, debug_checks: false };
    let result = match &cfg.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let r = simulate_traced(&params, point.zeta, policy.as_ref(), &sim_cfg, &mut w)??;
            w.flush()?;
            r
        }
        None => simulate(&params, point.zeta, policy.as_ref(), &sim_cfg)?,
    };
    if result.heuristic_policy {
        let _ = writeln!(stderr, "warning: threshold pre-sampling applied on a lossy channel is a heuristic");
    }

    let mut fields = vec![
        ("eps", Cell::Num(point.eps)),
        ("K", Cell::Int(k.into())),
        ("lambda_or_param", Cell::Num(point.param)),
        ("zeta", Cell::Num(point.zeta)),
    ];
    if let Some(p) = &policy {
        fields.push(("gamma", Cell::Num(p.gamma)));
        fields.push(("threshold_age", Cell::Num(p.threshold_age)));
    }
    fields.extend([
        ("avg_penalty", Cell::Num(result.avg_penalty)),
        ("avg_penalty_stderr", Cell::Num(result.avg_penalty_stderr)),
        ("mean_peak_leakage", Cell::Num(result.mean_peak_leakage)),
        ("mean_peak_leakage_stderr", Cell::Num(result.mean_peak_leakage_stderr)),
    ]);
    if let Some(delta) = point.delta {
        let f = leakage_feasibility(&result, delta);
        fields.push(("delta", Cell::Num(delta)));
        fields.push(("feasibility", Cell::Text(if f.satisfied { "satisfied" } else { "violated" }.into())));
        fields.push(("slack", Cell::Num(f.slack)));
    }
    fields.extend([
        ("mean_epoch_length", Cell::Num(result.mean_epoch_length)),
        ("mean_r", Cell::Num(result.mean_r)),
        ("mean_psi", Cell::Num(result.mean_psi)),
        ("epochs", Cell::Int(result.n_epochs)),
        ("burn_in", Cell::Int(result.burn_in)),
        ("seed", Cell::Int(result.seed)),
    ]);
    emit_record(cfg, stdout, fields)
}

/// Simulated-versus-closed-form comparison at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub eps: f64,
    pub k: u32,
    pub param: f64,
    pub zeta: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub corrected: f64,
    pub paper_variant: f64,
    pub delta: Option<f64>,
    pub mean_peak_leakage: f64,
    pub leakage_stderr: f64,
    pub leakage_ok: bool,
}

impl Verdict {
    pub fn z_corrected(&self) -> f64 {
        (self.simulated - self.corrected) / self.stderr
    }

    pub fn z_paper_variant(&self) -> f64 {
        (self.simulated - self.paper_variant) / self.stderr
    }

    pub fn pass(&self) -> bool {
        self.z_corrected().abs() <= 3.0 && self.leakage_ok
    }
}

/// Runs the validation grid; point `i` is simulated with seed `derive_seed(seed, i)`.
pub fn validate_grid(cfg: &ExperimentConfig) -> Result<Vec<Verdict>, CliError> {
    let ks = if cfg.k.is_empty() { vec![1] } else { cfg.k_values() };
    let jobs: Vec<(GridPoint, u32)> =
        grid(cfg)?.into_iter().flat_map(|p| ks.iter().map(move |&k| (p.clone(), k))).collect();
    jobs.par_iter()
        .enumerate()
        .map(|(i, (p, k))| {
            let params = p.params(cfg, *k)?;
            let report = average_age(&params, p.zeta)?;
            let sim_cfg = SimConfig {
                n_epochs: cfg.n_epochs,
                burn_in: cfg.burn_in,
                seed: derive_seed(cfg.seed, i as u64),
                debug_checks: false,
            };
            let r = simulate(&params, p.zeta, None, &sim_cfg)?;
            let leakage_ok = p.delta.is_none_or(|d| leakage_feasibility(&r, d).satisfied);
            Ok(Verdict {
                eps: p.eps,
                k: *k,
                param: p.param,
                zeta: p.zeta,
                simulated: r.avg_penalty,
                stderr: r.avg_penalty_stderr,
                corrected: report.avg_age,
                paper_variant: report.avg_age_paper_variant,
                delta: p.delta,
                mean_peak_leakage: r.mean_peak_leakage,
                leakage_stderr: r.mean_peak_leakage_stderr,
                leakage_ok,
            })
        })
        .collect()
}

pub fn cmd_validate(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !cfg.penalty.is_linear() {
        return Err(aoi_core::Error::UnsupportedClosedForm("validation compares against the linear-age closed form".into()).into());
    }
    let verdicts = validate_grid(cfg)?;
    let mut table = Table::new(&[
        "eps",
        "K",
        "lambda_or_param",
        "zeta",
        "simulated",
        "stderr",
        "corrected",
        "z_corrected",
        "paper_variant",
        "z_paper_variant",
        "delta",
        "mean_peak_leakage",
        "leakage_stderr",
        "verdict",
    ]);
    for v in &verdicts {
        table.rows.push(vec![
            Cell::Num(v.eps),
            Cell::Int(v.k.into()),
            Cell::Num(v.param),
            Cell::Num(v.zeta),
            Cell::Num(v.simulated),
            Cell::Num(v.stderr),
            Cell::Num(v.corrected),
            Cell::Num(v.z_corrected()),
            Cell::Num(v.paper_variant),
            Cell::Num(v.z_paper_variant()),
            v.delta.map_or_else(|| Cell::Text(String::new()), Cell::Num),
            Cell::Num(v.mean_peak_leakage),
            Cell::Num(v.leakage_stderr),
            Cell::Text(if v.pass() { "PASS" } else { "FAIL" }.into()),
        ]);
    }
    let bytes = match cfg.format {
        None => table.to_text().into_bytes(),
        Some(f) => table_bytes(&table, f)?,
    };
    emit(cfg.out.as_deref(), stdout, &bytes)?;

    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.pass())
        .map(|v| format!("eps={} K={} param={} zeta={}", v.eps, v.k, v.param, v.zeta))
        .collect();
    let deviating = verdicts.iter().filter(|v| v.z_paper_variant().abs() > 3.0).count();
    if cfg.out.is_some() || cfg.format.is_none() {
        writeln!(
            stdout,
            "{} of {} grid points PASS; paper-variant value off by more than 3 stderr at {deviating}",
            verdicts.len() - failed.len(),
            verdicts.len()
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!("validation failed at {}", failed.join("; "))))
    }
}
