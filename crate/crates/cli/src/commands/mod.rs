pub mod compare;
pub mod cv;
pub mod evaluate;
pub mod fit;
pub mod measures;
pub mod simulate;

use std::path::{Path, PathBuf};

use clap::Args;
use jdag_core::{GroupedDataset, PenaltyParams, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::config::{check_inputs, read_config, ConfigSource};
use crate::error::{CliError, Result};
use crate::io::{default_group_names, load_dataset};
use crate::manifest::{InputDigest, RunManifest};

pub const OUT_DIR_ENV: &str = "JDAG_OUT_DIR";

/// Flags shared by every subcommand that are not part of the recorded
/// configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat TOML/JSON settings file, or a manifest from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $JDAG_OUT_DIR, else the current directory].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel fits [default: available parallelism].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl Common {
    pub fn source(&self, command: &str) -> Result<ConfigSource> {
        match &self.config {
            Some(p) => read_config(p, command),
            None => Ok(ConfigSource::default()),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Solver flags; every field overrides the config file when given.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolverFlags {
    /// Smoothing constant inside the group-L2 square root.
    #[arg(long)]
    pub group_eps: Option<f64>,
    #[arg(long)]
    pub rho_init: Option<f64>,
    #[arg(long)]
    pub rho_mult: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    /// Acyclicity tolerance on max_k h(W_k).
    #[arg(long)]
    pub h_tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub inner_max_iters: Option<usize>,
    /// Stored L-BFGS curvature pairs.
    #[arg(long)]
    pub memory: Option<usize>,
    #[arg(long)]
    pub progress_factor: Option<f64>,
    /// Edge threshold on |W_ij| when extracting graphs.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub inner_grad_tol: Option<f64>,
    #[arg(long)]
    pub inner_ftol: Option<f64>,
    #[arg(long)]
    pub cd_sweeps: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub active_set: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SolverSettings {
    pub group_eps: f64,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub rho_max: f64,
    pub h_tol: f64,
    pub max_outer: usize,
    pub inner_max_iters: usize,
    pub memory: usize,
    pub progress_factor: f64,
    pub omega: f64,
    pub inner_grad_tol: f64,
    pub inner_ftol: f64,
    pub cd_sweeps: usize,
    pub active_set: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            group_eps: c.penalty.group_smoothing_eps,
            rho_init: c.rho_init,
            rho_mult: c.rho_mult,
            rho_max: c.rho_max,
            h_tol: c.h_tol,
            max_outer: c.max_outer_iters,
            inner_max_iters: c.inner_max_iters,
            memory: c.lbfgs_memory,
            progress_factor: c.progress_factor,
            omega: c.threshold_omega,
            inner_grad_tol: c.inner_grad_tol,
            inner_ftol: c.inner_ftol,
            cd_sweeps: c.cd_sweeps,
            active_set: c.active_set,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self, lambda1: f64, lambda2: f64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            penalty: PenaltyParams {
                lambda1,
                lambda2,
                group_smoothing_eps: self.group_eps,
            },
            rho_init: self.rho_init,
            rho_mult: self.rho_mult,
            rho_max: self.rho_max,
            h_tol: self.h_tol,
            max_outer_iters: self.max_outer,
            inner_max_iters: self.inner_max_iters,
            lbfgs_memory: self.memory,
            progress_factor: self.progress_factor,
            threshold_omega: self.omega,
            inner_grad_tol: self.inner_grad_tol,
            inner_ftol: self.inner_ftol,
            cd_sweeps: self.cd_sweeps,
            active_set: self.active_set,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Absolute paths, so a manifest stays valid from any working directory.
pub fn canonical_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    paths
        .iter()
        .map(|p| {
            p.canonicalize()
                .map_err(|e| CliError::io(format!("reading {}", p.display()), e))
        })
        .collect()
}

pub fn input_digests(paths: &[PathBuf]) -> Result<Vec<InputDigest>> {
    paths.iter().map(|p| InputDigest::of(p)).collect()
}

pub fn group_names_for(paths: &[PathBuf], given: &Option<Vec<String>>) -> Result<Vec<String>> {
    match given {
        Some(names) => {
            for (i, a) in names.iter().enumerate() {
                if a.is_empty() || names[..i].contains(a) {
                    return Err(CliError::Usage(format!(
                        "group names must be non-empty and distinct, got {names:?}"
                    )));
                }
            }
            Ok(names.clone())
        }
        None => default_group_names(paths),
    }
}

pub fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn new_manifest<S: Serialize>(
    command: &str,
    settings: &S,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    started: u64,
) -> Result<RunManifest> {
    Ok(RunManifest {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config: serde_json::to_value(settings)
            .map_err(|e| CliError::Usage(format!("unserializable settings: {e}")))?,
        inputs,
        outputs: Vec::new(),
        started_unix_ms: started,
        finished_unix_ms: 0,
    })
}

/// Grouped data loaded from `--data`, with the digests of its files.
pub struct LoadedData {
    pub paths: Vec<PathBuf>,
    pub dataset: GroupedDataset,
    pub digests: Vec<InputDigest>,
}

pub fn load_data(
    paths: &[PathBuf],
    group_names: &Option<Vec<String>>,
    standardize: bool,
    source: &ConfigSource,
) -> Result<LoadedData> {
    if paths.is_empty() {
        return Err(CliError::Usage("--data needs at least one CSV file".into()));
    }
    let paths = canonical_paths(paths)?;
    let digests = input_digests(&paths)?;
    check_inputs(source, &digests)?;
    let names = group_names_for(&paths, group_names)?;
    let dataset = load_dataset(&paths, &names, standardize)?;
    Ok(LoadedData {
        paths,
        dataset,
        digests,
    })
}
