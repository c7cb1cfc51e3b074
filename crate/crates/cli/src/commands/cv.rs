use std::path::PathBuf;

use clap::Args;
use jdag_core::cross_validate;
use jdag_core::model_select::default_grid;
use serde::{Deserialize, Serialize};

use super::{load_data, new_manifest, Common, SolverFlags, SolverSettings};
use crate::config::resolve;
use crate::error::{CliError, Result};
use crate::io::fmt_f64;
use crate::manifest::{now_ms, Outputs};

/// K-fold cross-validation over a (lambda1, lambda2) grid.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CvArgs {
    #[arg(long, num_args = 1..)]
    pub data: Option<Vec<PathBuf>>,
    #[arg(long, value_delimiter = ',')]
    pub group_names: Option<Vec<String>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Comma-separated lambda1 values [default: 0.001,0.01,0.1].
    #[arg(long, value_delimiter = ',')]
    pub lambda1_grid: Option<Vec<f64>>,
    /// Comma-separated lambda2 values [default: 0,0.01,0.1,1].
    #[arg(long, value_delimiter = ',')]
    pub lambda2_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct CvSettings {
    pub data: Vec<PathBuf>,
    pub group_names: Option<Vec<String>>,
    pub standardize: bool,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub solver: SolverSettings,
}

impl Default for CvSettings {
    fn default() -> Self {
        let grid = default_grid();
        let mut l1: Vec<f64> = grid.iter().map(|g| g.0).collect();
        let mut l2: Vec<f64> = grid.iter().map(|g| g.1).collect();
        for v in [&mut l1, &mut l2] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        Self {
            data: Vec::new(),
            group_names: None,
            standardize: false,
            lambda1_grid: l1,
            lambda2_grid: l2,
            folds: 5,
            seed: 0,
            solver: SolverSettings::default(),
        }
    }
}

pub fn run(args: &CvArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("cv")?;
    let mut s: CvSettings = resolve(args, &source)?;
    if s.lambda1_grid.is_empty() || s.lambda2_grid.is_empty() {
        return Err(CliError::Usage("lambda grids must not be empty".into()));
    }
    let grid: Vec<(f64, f64)> = s
        .lambda1_grid
        .iter()
        .flat_map(|&a| s.lambda2_grid.iter().map(move |&b| (a, b)))
        .collect();
    let cfg = s.solver.to_config(grid[0].0, grid[0].1)?;
    let loaded = load_data(&s.data, &s.group_names, s.standardize, &source)?;
    s.data = loaded.paths.clone();
    let res = cross_validate(&loaded.dataset, &grid, s.folds, &cfg, s.seed)?;

    let mut tsv = String::from("lambda1\tlambda2\tmean\tsd");
    for f in 0..res.folds {
        tsv.push_str(&format!("\tfold{}", f + 1));
    }
    tsv.push('\n');
    for row in &res.table {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}",
            fmt_f64(row.lambda1),
            fmt_f64(row.lambda2),
            fmt_f64(row.mean),
            fmt_f64(row.sd)
        ));
        for l in &row.fold_losses {
            tsv.push('\t');
            tsv.push_str(&fmt_f64(*l));
        }
        tsv.push('\n');
    }
    let mut out = Outputs::new(common.out_dir());
    out.add_json(
        "cv.json",
        &serde_json::json!({
            "best": { "lambda1": res.best.0, "lambda2": res.best.1 },
            "folds": res.folds,
            "table": res.table,
        }),
    )?;
    out.add("cv_table.tsv", tsv);
    out.finish(new_manifest(
        "cv",
        &s,
        Some(s.seed),
        loaded.digests,
        started,
    )?)?;
    Ok(())
}
