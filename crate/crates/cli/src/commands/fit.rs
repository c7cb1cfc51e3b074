use std::path::PathBuf;

use clap::Args;
use jdag_core::{fit_joint, threshold_to_dag, BinaryDigraph, RemovedEdge, SolverState};
use serde::{Deserialize, Serialize};

use super::{file_name, load_data, new_manifest, Common, SolverFlags, SolverSettings};
use crate::config::resolve;
use crate::error::{CliError, Result};
use crate::io::{edge_list_tsv, file_stem_safe, weight_matrix_tsv, write_atomic};
use crate::manifest::{now_ms, Outputs};

/// Fit one DAG per group jointly.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    /// One CSV per group (rows are samples, columns variables).
    #[arg(long, num_args = 1..)]
    pub data: Option<Vec<PathBuf>>,
    /// Comma-separated group names [default: file stems].
    #[arg(long, value_delimiter = ',')]
    pub group_names: Option<Vec<String>>,
    /// Scale each column to unit variance before centering.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// L1 weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Group-L2 weight tying edges across groups.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the per-iteration trace as trace.jsonl.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trace: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FitSettings {
    pub data: Vec<PathBuf>,
    pub group_names: Option<Vec<String>>,
    pub standardize: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
    pub trace: bool,
    #[serde(flatten)]
    pub solver: SolverSettings,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            group_names: None,
            standardize: false,
            lambda1: 0.001,
            lambda2: 0.01,
            seed: 0,
            trace: false,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    name: String,
    data: String,
    edges: usize,
    h: f64,
    removed_by_cycle_repair: Vec<NamedRemoval>,
}

#[derive(Debug, Serialize)]
struct NamedRemoval {
    source: String,
    target: String,
    weight: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    converged: bool,
    diagnostic: Option<String>,
    max_h: f64,
    rho: f64,
    outer_iterations: usize,
    alphas: Vec<f64>,
    variables: Vec<String>,
    groups: Vec<GroupSummary>,
}

fn trace_bytes(state: &SolverState) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    state
        .write_trace(&mut buf)
        .map_err(|e| CliError::io("encoding trace", e))?;
    Ok(buf)
}

fn named(removed: &[RemovedEdge], g: &BinaryDigraph) -> Vec<NamedRemoval> {
    let labels = g.node_labels();
    removed
        .iter()
        .map(|r| NamedRemoval {
            source: labels[r.source].clone(),
            target: labels[r.target].clone(),
            weight: r.weight,
        })
        .collect()
}

pub fn run(args: &FitArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("fit")?;
    let mut s: FitSettings = resolve(args, &source)?;
    let cfg = s.solver.to_config(s.lambda1, s.lambda2)?;
    let loaded = load_data(&s.data, &s.group_names, s.standardize, &source)?;
    s.data = loaded.paths.clone();
    let ds = &loaded.dataset;
    let out_dir = common.out_dir();
    let (w, state) = match fit_joint(ds, &cfg, s.seed) {
        Ok(r) => r,
        Err(jdag_core::Error::Divergence { reason, trace }) => {
            let mut buf = Vec::new();
            for rec in &trace {
                serde_json::to_writer(&mut buf, rec)
                    .map_err(|e| CliError::Input(format!("JSON encoding failed: {e}")))?;
                buf.push(b'\n');
            }
            write_atomic(&out_dir.join("trace.jsonl"), &buf)?;
            return Err(CliError::Divergence(format!(
                "{reason}; trace written to {}",
                out_dir.join("trace.jsonl").display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let labels = ds.variable_names().to_vec();
    let mut out = Outputs::new(out_dir);
    let mut groups = Vec::new();
    for (k, name) in ds.group_names().iter().enumerate() {
        let wk = w.get(k);
        let ex = threshold_to_dag(wk, s.solver.omega)?;
        let g = ex.graph.with_labels(labels.clone())?;
        let stem = file_stem_safe(name);
        out.add(
            format!("weights_{stem}.tsv"),
            weight_matrix_tsv(&labels, wk.as_matrix()),
        );
        out.add(
            format!("edges_{stem}.tsv"),
            edge_list_tsv(&g, Some(wk.as_matrix()))?,
        );
        groups.push(GroupSummary {
            name: name.clone(),
            data: file_name(&loaded.paths[k]),
            edges: g.num_edges(),
            h: state.h_values[k],
            removed_by_cycle_repair: named(&ex.removed, &g),
        });
    }
    out.add_json(
        "fit.json",
        &FitReport {
            converged: state.converged,
            diagnostic: state.diagnostic.clone(),
            max_h: state.max_h(),
            rho: state.rho,
            outer_iterations: state.outer_iter,
            alphas: state.alphas.clone(),
            variables: labels,
            groups,
        },
    )?;
    if s.trace {
        out.add("trace.jsonl", trace_bytes(&state)?);
    }
    if let Some(msg) = &state.diagnostic {
        eprintln!("warning: {msg}");
    }
    let manifest = new_manifest("fit", &s, Some(s.seed), loaded.digests, started)?;
    out.finish(manifest)?;
    Ok(())
}
