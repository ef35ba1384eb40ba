//! Run configuration: TOML file plus flag overrides, flags winning.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// `[data]` section: where the interactions come from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Combined TSV with rows `user<TAB>item<TAB>behavior<TAB>timestamp`.
    pub input: Option<PathBuf>,
    /// One TSV per behavior with rows `user<TAB>item<TAB>timestamp`.
    #[serde(default)]
    pub behavior_files: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub has_header: bool,
}

/// `[run]` section: everything else.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub sequence: Option<Vec<String>>,
    pub target: Option<String>,
    /// Declared behavior set; defaults to the sequence labels.
    pub behaviors: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub scheme: Option<String>,
    pub k: Option<Vec<usize>>,
    pub jobs: Option<usize>,
    pub variant: Option<String>,
    pub single_behavior: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub users: Option<Vec<String>>,
    pub topk: Option<usize>,
    pub grid_step: Option<f64>,
    pub holdout: Option<String>,
    pub fractions: Option<Vec<f64>>,
    pub queries_per_point: Option<usize>,
    pub repeats: Option<usize>,
    pub prefix: Option<bool>,
}

/// Declarative run configuration (config file shape).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag overrides shared by every subcommand. `None` means "not given".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonFlags {
    /// Declarative config file (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Combined interactions TSV: `user<TAB>item<TAB>behavior<TAB>timestamp`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Per-behavior TSV as label=path (rows `user<TAB>item<TAB>timestamp`).
    #[arg(long = "behavior-file", value_name = "LABEL=PATH", global = true)]
    pub behavior_files: Vec<String>,

    /// First input row is a header.
    #[arg(long, global = true)]
    pub has_header: bool,

    /// Cascading behavior sequence, e.g. view,cart,buy (target last).
    #[arg(long, value_delimiter = ',', global = true)]
    pub sequence: Option<Vec<String>>,

    /// Target behavior; defaults to the last sequence element.
    #[arg(long, global = true)]
    pub target: Option<String>,

    /// Declared behavior set; defaults to the sequence labels.
    #[arg(long, value_delimiter = ',', global = true)]
    pub behaviors: Option<Vec<String>>,

    /// Query-fitting strength (also supplies lambda for baseline variants).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    /// Cascading-alignment strength.
    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// Convergence threshold on the summed L1 residual.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Iteration cap per behavior.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,

    /// Normalization scheme: sym or col.
    #[arg(long, global = true)]
    pub scheme: Option<String>,

    /// Metric cutoffs, e.g. 10,30,50,100,200.
    #[arg(long, value_delimiter = ',', global = true)]
    pub k: Option<Vec<usize>>,

    /// Worker threads for per-user evaluation (0 = rayon default).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Ranking variant: cascading, birank, cohits, or rwr.
    #[arg(long, global = true)]
    pub variant: Option<String>,

    /// Rank baselines on the target behavior's graph instead of the union.
    #[arg(long, global = true)]
    pub single_behavior: bool,

    /// Seed for the bench slicing permutation and query sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings after merging defaults, config file, and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub input: Option<PathBuf>,
    pub behavior_files: Vec<(String, PathBuf)>,
    pub has_header: bool,
    pub sequence: Vec<String>,
    pub target: String,
    pub behaviors: Vec<String>,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub scheme: String,
    pub k: Vec<usize>,
    pub jobs: usize,
    pub variant: String,
    pub single_behavior: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub users: Vec<String>,
    pub topk: usize,
    pub grid_step: f64,
    pub holdout: String,
    pub fractions: Vec<f64>,
    pub queries_per_point: usize,
    pub repeats: usize,
    pub prefix: bool,
}

fn parse_behavior_file(spec: &str) -> Result<(String, PathBuf), CliError> {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_string(), PathBuf::from(path)))
        }
        _ => Err(CliError::Config(format!(
            "--behavior-file expects LABEL=PATH, got '{spec}'"
        ))),
    }
}

/// Merge precedence: flags > config file > defaults.
pub fn resolve(flags: &CommonFlags) -> Result<Resolved, CliError> {
    let cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };

    let input = flags.input.clone().or(cfg.data.input);
    let behavior_files: Vec<(String, PathBuf)> = if flags.behavior_files.is_empty() {
        cfg.data.behavior_files.into_iter().collect()
    } else {
        flags
            .behavior_files
            .iter()
            .map(|s| parse_behavior_file(s))
            .collect::<Result<_, _>>()?
    };
    let has_header = flags.has_header || cfg.data.has_header;

    let sequence = flags
        .sequence
        .clone()
        .or(cfg.run.sequence)
        .unwrap_or_else(|| behavior_files.iter().map(|(l, _)| l.clone()).collect());
    if sequence.is_empty() {
        return Err(CliError::Config(
            "no behavior sequence: pass --sequence or configure [run].sequence".into(),
        ));
    }
    let target = flags
        .target
        .clone()
        .or(cfg.run.target)
        .unwrap_or_else(|| sequence.last().unwrap().clone());
    if sequence.last() != Some(&target) {
        return Err(CliError::Config(format!(
            "target '{target}' must be the last element of the sequence {sequence:?}"
        )));
    }
    let behaviors = flags
        .behaviors
        .clone()
        .or(cfg.run.behaviors)
        .unwrap_or_else(|| sequence.clone());
    for label in &sequence {
        if !behaviors.contains(label) {
            return Err(CliError::Config(format!(
                "sequence label '{label}' missing from the declared behavior set {behaviors:?}"
            )));
        }
    }

    let resolved = Resolved {
        input,
        behavior_files,
        has_header,
        sequence,
        target,
        behaviors,
        alpha: flags.alpha.or(cfg.run.alpha).unwrap_or(0.2),
        beta: flags.beta.or(cfg.run.beta).unwrap_or(0.3),
        epsilon: flags.epsilon.or(cfg.run.epsilon).unwrap_or(1e-5),
        max_iters: flags.max_iters.or(cfg.run.max_iters).unwrap_or(200),
        scheme: flags
            .scheme
            .clone()
            .or(cfg.run.scheme)
            .unwrap_or_else(|| "sym".into()),
        k: flags
            .k
            .clone()
            .or(cfg.run.k)
            .unwrap_or_else(|| vec![10, 30, 50, 100, 200]),
        jobs: flags.jobs.or(cfg.run.jobs).unwrap_or(0),
        variant: flags
            .variant
            .clone()
            .or(cfg.run.variant)
            .unwrap_or_else(|| "cascading".into()),
        single_behavior: flags.single_behavior || cfg.run.single_behavior.unwrap_or(false),
        seed: flags.seed.or(cfg.run.seed).unwrap_or(42),
        out: flags
            .out
            .clone()
            .or(cfg.run.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        users: cfg.run.users.unwrap_or_default(),
        topk: cfg.run.topk.unwrap_or(10),
        grid_step: cfg.run.grid_step.unwrap_or(0.1),
        holdout: cfg.run.holdout.unwrap_or_else(|| "test".into()),
        fractions: cfg.run.fractions.unwrap_or_default(),
        queries_per_point: cfg.run.queries_per_point.unwrap_or(12),
        repeats: cfg.run.repeats.unwrap_or(1),
        prefix: cfg.run.prefix.unwrap_or(false),
    };

    if resolved.input.is_none() && resolved.behavior_files.is_empty() {
        return Err(CliError::Config(
            "no input: pass --input or --behavior-file, or configure [data]".into(),
        ));
    }
    if resolved.input.is_some() && !resolved.behavior_files.is_empty() {
        return Err(CliError::Config(
            "pass either a combined --input or per-behavior files, not both".into(),
        ));
    }
    if let Some(path) = &resolved.input {
        if !path.exists() {
            return Err(CliError::Config(format!(
                "input file {} does not exist",
                path.display()
            )));
        }
    }
    for (label, path) in &resolved.behavior_files {
        if !path.exists() {
            return Err(CliError::Config(format!(
                "behavior file for '{label}' ({}) does not exist",
                path.display()
            )));
        }
    }
    Ok(resolved)
}
