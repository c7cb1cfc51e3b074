use std::path::PathBuf;

use clap::{Args, ValueEnum};
use jdag_core::group_compare::{EdgeRef, EdgeStatistic, ScreenRule};
use jdag_core::{permutation_test, BinaryDigraph, PermutationOptions};
use serde::{Deserialize, Serialize};

use super::{load_data, new_manifest, Common, SolverFlags, SolverSettings};
use crate::config::resolve;
use crate::error::{CliError, Result};
use crate::io::{edge_list_tsv, file_stem_safe, fmt_f64};
use crate::manifest::{now_ms, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// |W1_ij - W2_ij|.
    AbsWeightDiff,
    /// Whether the edge is present in exactly one group.
    PresenceDiff,
}

/// Permutation test for edge differences between two groups.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CompareArgs {
    /// Exactly two CSVs, one per group.
    #[arg(long, num_args = 2)]
    pub data: Option<Vec<PathBuf>>,
    #[arg(long, value_delimiter = ',')]
    pub group_names: Option<Vec<String>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Number of label permutations B.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Benjamini-Hochberg FDR level.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum)]
    pub statistic: Option<Statistic>,
    /// Run this many permutations first and stop if no edge reaches --screen-alpha.
    #[arg(long)]
    pub screen_batch: Option<usize>,
    #[arg(long)]
    pub screen_alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct CompareSettings {
    pub data: Vec<PathBuf>,
    pub group_names: Option<Vec<String>>,
    pub standardize: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    pub permutations: usize,
    pub q: f64,
    pub statistic: Statistic,
    pub screen_batch: Option<usize>,
    pub screen_alpha: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub solver: SolverSettings,
}

impl Default for CompareSettings {
    fn default() -> Self {
        let o = PermutationOptions::default();
        Self {
            data: Vec::new(),
            group_names: None,
            standardize: false,
            lambda1: 0.001,
            lambda2: 0.01,
            permutations: o.permutations,
            q: o.q,
            statistic: Statistic::AbsWeightDiff,
            screen_batch: None,
            screen_alpha: 0.05,
            seed: o.seed,
            solver: SolverSettings::default(),
        }
    }
}

fn cte_graph(edges: &[EdgeRef], labels: &[String]) -> Result<BinaryDigraph> {
    let g = BinaryDigraph::from_edges(labels.len(), edges.iter().map(|e| (e.source, e.target)))?;
    Ok(g.with_labels(labels.to_vec())?)
}

pub fn run(args: &CompareArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("compare")?;
    let mut s: CompareSettings = resolve(args, &source)?;
    if s.data.len() != 2 {
        return Err(CliError::Usage(format!(
            "compare needs exactly two data files, got {}",
            s.data.len()
        )));
    }
    let cfg = s.solver.to_config(s.lambda1, s.lambda2)?;
    let loaded = load_data(&s.data, &s.group_names, s.standardize, &source)?;
    s.data = loaded.paths.clone();
    let ds = &loaded.dataset;
    let opts = PermutationOptions {
        permutations: s.permutations,
        seed: s.seed,
        statistic: match s.statistic {
            Statistic::AbsWeightDiff => EdgeStatistic::AbsWeightDiff,
            Statistic::PresenceDiff => EdgeStatistic::PresenceDiff,
        },
        q: s.q,
        screen: s.screen_batch.map(|batch| ScreenRule {
            batch,
            alpha: s.screen_alpha,
        }),
    };
    let report = permutation_test(ds, &cfg, &opts)?;
    for n in &report.notes {
        eprintln!("note: {n}");
    }

    let labels = ds.variable_names();
    let mut pv = String::from("source\ttarget\tobserved\tp_value\tsignificant\n");
    for e in &report.per_edge {
        let sig = report
            .significant_edges
            .iter()
            .any(|r| r.source == e.source && r.target == e.target);
        pv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.source_label,
            e.target_label,
            fmt_f64(e.observed_diff),
            fmt_f64(e.p_value),
            u8::from(sig)
        ));
    }
    let sig = cte_graph(&report.significant_edges, labels)?;

    let mut out = Outputs::new(common.out_dir());
    out.add_json("compare.json", &report)?;
    out.add("pvalues.tsv", pv);
    out.add("significant.tsv", edge_list_tsv(&sig, None)?);
    for (name, edges) in report
        .group_names
        .iter()
        .zip([&report.cte_group1, &report.cte_group2])
    {
        let g = cte_graph(edges, labels)?;
        out.add(
            format!("cte_{}.tsv", file_stem_safe(name)),
            edge_list_tsv(&g, None)?,
        );
    }
    out.finish(new_manifest(
        "compare",
        &s,
        Some(s.seed),
        loaded.digests,
        started,
    )?)?;
    Ok(())
}
