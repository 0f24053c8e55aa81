//! Command-line flags, config files, and the resolved experiment description.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aoi_core::analysis::DEFAULT_K_SEARCH_MAX;
use aoi_core::sim::DEFAULT_BURN_IN;
use aoi_core::{AgePenalty, BusyTimeDistribution, LeakageModel};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

pub const SEED_ENV: &str = "AOI_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "aoi-lab", version, about = "Age of information under a leakage budget over an erasure channel")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the post-sampling wait for a leakage budget.
    Zeta(Flags),
    /// Closed-form average age for K = 1..k-max.
    Analyze(Flags),
    /// Run the epoch simulator.
    Simulate(Flags),
    /// Compare simulated and closed-form average age over a grid.
    Validate(Flags),
    /// Closed-form curves over the cross product of the sweep axes.
    Sweep(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Self::Zeta(f) | Self::Analyze(f) | Self::Simulate(f) | Self::Validate(f) | Self::Sweep(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BusyKind {
    Exp,
    Det,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeakageKind {
    Ou,
    Wiener,
    SynthExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyKind {
    Linear,
    Power,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Presample {
    None,
    Threshold,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct Flags {
    /// Flat `key = value` file mirroring these flags; flags on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "exp")]
    pub busy: BusyKind,
    /// Exponential busy-time rate(s).
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "1")]
    pub rate: Vec<f64>,
    /// Deterministic busy-time value(s).
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "1")]
    pub value: Vec<f64>,
    /// Whitespace- or comma-separated busy-time samples.
    #[arg(long)]
    pub samples_file: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "ou")]
    pub leakage: LeakageKind,
    #[arg(long, default_value_t = 2.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma02: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    #[arg(long, value_enum, default_value = "linear")]
    pub penalty: PenaltyKind,
    /// Exponent of the power penalty.
    #[arg(long, default_value_t = 2.0)]
    pub power: f64,
    /// Rate of the exponential penalty.
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,

    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0")]
    pub eps: Vec<f64>,
    /// Retransmission cap(s); analyze and sweep default to 1..k-max.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub k: Vec<u32>,
    #[arg(long, default_value_t = DEFAULT_K_SEARCH_MAX)]
    pub k_max: u32,

    /// Leakage budget(s); the post-sampling wait is solved from it.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Post-sampling wait(s) used directly.
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    pub zeta: Vec<f64>,

    #[arg(long, default_value_t = 1_000_000)]
    pub epochs: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: u64,
    /// Master seed; defaults to $AOI_LAB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "none")]
    pub presample: Presample,

    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Per-epoch trace file (simulate only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Reads a config file into `--key value` tokens.
pub fn config_tokens(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

fn parse_config(text: &str) -> Result<Vec<String>, CliError> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(char::is_whitespace))
            .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key == "config" {
            return Err(CliError::config("config files cannot include other config files"));
        }
        entries.insert(key, value.trim().to_string());
    }
    Ok(entries.into_iter().flat_map(|(k, v)| [format!("--{k}"), v]).collect())
}

/// Splices config-file values in front of the command-line flags so the
/// latter override them.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = config else { return Ok(args) };
    let tokens = config_tokens(&path)?;
    // argv[0] is the program, argv[1] the subcommand.
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PostWait {
    Delta(Vec<f64>),
    Zeta(Vec<f64>),
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// `(axis value, law)` pairs: rate, value, or sample mean for empirical laws.
    pub busy: Vec<(f64, BusyTimeDistribution)>,
    pub leakage: LeakageModel,
    pub penalty: AgePenalty,
    pub eps: Vec<f64>,
    pub k: Vec<u32>,
    pub k_search_max: u32,
    pub post_wait: PostWait,
    pub n_epochs: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub presample: Presample,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub trace: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_flags(f: &Flags, env_seed: Option<&str>) -> Result<Self, CliError> {
        let busy = match f.busy {
            BusyKind::Exp => f
                .rate
                .iter()
                .map(|&r| Ok((r, BusyTimeDistribution::exponential(r)?)))
                .collect::<Result<Vec<_>, aoi_core::Error>>(),
            BusyKind::Det => f
                .value
                .iter()
                .map(|&c| Ok((c, BusyTimeDistribution::deterministic(c)?)))
                .collect(),
            BusyKind::Empirical => {
                let path = f
                    .samples_file
                    .as_ref()
                    .ok_or_else(|| CliError::config("--busy empirical needs --samples-file"))?;
                let samples = read_samples(path)?;
                BusyTimeDistribution::empirical(samples).and_then(|d| Ok(vec![(d.mean()?, d)]))
            }
        }
        .map_err(CliError::from)?;

        let leakage = match f.leakage {
            LeakageKind::Ou => LeakageModel::OuMutualInfo { sigma2: f.sigma2, theta: f.theta, sigma02: f.sigma02 },
            LeakageKind::Wiener => LeakageModel::WienerEstimation { sigma02: f.sigma02 },
            LeakageKind::SynthExp => LeakageModel::SyntheticExp { scale: f.scale },
        };
        leakage.validate()?;
        let penalty = match f.penalty {
            PenaltyKind::Linear => AgePenalty::Linear,
            PenaltyKind::Power => AgePenalty::Power { p: f.power },
            PenaltyKind::Exp => AgePenalty::ExponentialPenalty { alpha: f.alpha },
        };
        penalty.validate()?;

        let post_wait = match (f.delta.is_empty(), f.zeta.is_empty()) {
            (false, true) => PostWait::Delta(f.delta.clone()),
            (true, false) => PostWait::Zeta(f.zeta.clone()),
            (true, true) => return Err(CliError::config("one of --delta or --zeta is required")),
            (false, false) => return Err(CliError::config("--delta and --zeta are mutually exclusive")),
        };
        if let PostWait::Zeta(z) = &post_wait {
            if let Some(bad) = z.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
                return Err(CliError::config(format!("--zeta must be >= 0, got {bad}")));
            }
        }
        if f.k_max == 0 {
            return Err(CliError::config("--k-max must be at least 1"));
        }
        if f.epochs == 0 {
            return Err(CliError::config("--epochs must be at least 1"));
        }
        let seed = match (f.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(s)) => s
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{SEED_ENV}={s} is not an unsigned integer")))?,
            (None, None) => 0,
        };

        Ok(Self {
            busy,
            leakage,
            penalty,
            eps: f.eps.clone(),
            k: f.k.clone(),
            k_search_max: f.k_max,
            post_wait,
            n_epochs: f.epochs,
            burn_in: f.burn_in,
            seed,
            presample: f.presample,
            out: f.out.clone(),
            format: f.format,
            trace: f.trace.clone(),
        })
    }

    pub fn wait_values(&self) -> &[f64] {
        match &self.post_wait {
            PostWait::Delta(v) | PostWait::Zeta(v) => v,
        }
    }

    /// Every sweep axis must have at least one value.
    pub fn check_axes(&self) -> Result<(), CliError> {
        if self.busy.is_empty() || self.eps.is_empty() || self.wait_values().is_empty() {
            return Err(CliError::config("sweep axes must be non-empty"));
        }
        Ok(())
    }

    /// Rejects lists on commands that take a single operating point.
    pub fn single_point(&self, k_list_ok: bool) -> Result<(), CliError> {
        let multi = self.busy.len() > 1
            || self.eps.len() > 1
            || (!k_list_ok && self.k.len() > 1)
            || self.wait_values().len() > 1;
        if multi {
            return Err(CliError::config("this command takes single values; use `sweep` or `validate` for grids"));
        }
        Ok(())
    }

    /// Caps evaluated by analyze/sweep.
    pub fn k_values(&self) -> Vec<u32> {
        if self.k.is_empty() {
            (1..=self.k_search_max).collect()
        } else {
            let mut k = self.k.clone();
            k.sort_unstable();
            k.dedup();
            k
        }
    }
}

fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read samples {}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::config(format!("bad sample `{t}` in {}", path.display()))))
        .collect()
}
