use std::path::{Path, PathBuf};

use clap::Args;
use jdag_core::eval_metrics::summarize;
use jdag_core::{evaluate, BinaryDigraph, EvalReport};
use serde::{Deserialize, Serialize};

use super::{canonical_paths, file_name, input_digests, new_manifest, Common};
use crate::config::{check_inputs, resolve};
use crate::error::{CliError, Result};
use crate::io::{fmt_f64, read_edge_list};
use crate::manifest::{now_ms, Outputs};

/// Score estimated graphs against true graphs (FDR, TPR, SHD).
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    /// Estimated edge lists.
    #[arg(long, num_args = 1..)]
    pub est: Option<Vec<PathBuf>>,
    /// True edge lists: one shared by all estimates, or one per estimate.
    #[arg(long, num_args = 1..)]
    pub truth: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct EvaluateSettings {
    pub est: Vec<PathBuf>,
    pub truth: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    estimate: String,
    truth: String,
    #[serde(flatten)]
    report: EvalReport,
}

/// Re-indexes `est` to the node order of `truth`; the label sets must agree.
fn align(est: BinaryDigraph, est_path: &Path, truth: &BinaryDigraph) -> Result<BinaryDigraph> {
    let tl = truth.node_labels();
    let el = est.node_labels();
    if el == tl {
        return Ok(est);
    }
    let mut pos = Vec::with_capacity(el.len());
    for l in el {
        match tl.iter().position(|t| t == l) {
            Some(p) => pos.push(p),
            None => {
                return Err(CliError::data(
                    est_path,
                    format!("node {l:?} is not in the true graph"),
                ))
            }
        }
    }
    if el.len() != tl.len() {
        return Err(CliError::data(
            est_path,
            format!("{} nodes, but the true graph has {}", el.len(), tl.len()),
        ));
    }
    let g = BinaryDigraph::from_edges(tl.len(), est.edges().map(|(i, j)| (pos[i], pos[j])))?;
    Ok(g.with_labels(tl.to_vec())?)
}

pub fn run(args: &EvaluateArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("evaluate")?;
    let mut s: EvaluateSettings = resolve(args, &source)?;
    if s.est.is_empty() || s.truth.is_empty() {
        return Err(CliError::Usage("--est and --truth are required".into()));
    }
    if s.truth.len() != 1 && s.truth.len() != s.est.len() {
        return Err(CliError::Usage(format!(
            "{} truth files for {} estimates; pass one or one per estimate",
            s.truth.len(),
            s.est.len()
        )));
    }
    s.est = canonical_paths(&s.est)?;
    s.truth = canonical_paths(&s.truth)?;
    let all: Vec<PathBuf> = s.est.iter().chain(&s.truth).cloned().collect();
    let digests = input_digests(&all)?;
    check_inputs(&source, &digests)?;

    let truths = s
        .truth
        .iter()
        .map(|p| read_edge_list(p))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(s.est.len());
    for (i, ep) in s.est.iter().enumerate() {
        let ti = if truths.len() == 1 { 0 } else { i };
        let est = align(read_edge_list(ep)?, ep, &truths[ti])?;
        rows.push(Row {
            estimate: file_name(ep),
            truth: file_name(&s.truth[ti]),
            report: evaluate(&est, &truths[ti])?,
        });
    }
    let reports: Vec<EvalReport> = rows.iter().map(|r| r.report.clone()).collect();
    let summary = summarize(&reports)?;

    let mut tsv =
        String::from("estimate\ttruth\ttp\tfp\tfn\treversed\tpredicted\ttrue\tfdr\ttpr\tshd\n");
    for r in &rows {
        let e = &r.report;
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.estimate,
            r.truth,
            e.tp,
            e.fp,
            e.fn_count,
            e.reversed,
            e.predicted,
            e.true_count,
            fmt_f64(e.fdr),
            fmt_f64(e.tpr),
            e.shd
        ));
    }
    tsv.push_str(&format!(
        "mean\t\t\t\t\t\t\t\t{}\t{}\t{}\n",
        fmt_f64(summary.fdr_mean),
        fmt_f64(summary.tpr_mean),
        fmt_f64(summary.shd_mean)
    ));
    tsv.push_str(&format!(
        "sd\t\t\t\t\t\t\t\t{}\t{}\t{}\n",
        fmt_f64(summary.fdr_sd),
        fmt_f64(summary.tpr_sd),
        fmt_f64(summary.shd_sd)
    ));

    let mut out = Outputs::new(common.out_dir());
    out.add_json(
        "eval.json",
        &serde_json::json!({ "runs": rows, "summary": summary }),
    )?;
    out.add("summary.tsv", tsv);
    out.finish(new_manifest("evaluate", &s, None, digests, started)?)?;
    Ok(())
}
