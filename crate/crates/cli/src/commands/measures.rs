use std::path::PathBuf;

use clap::{Args, ValueEnum};
use jdag_core::netmeasures::SdKind;
use jdag_core::{find_hubs, measure_report, HubReport, MeasureReport};
use serde::{Deserialize, Serialize};

use super::{canonical_paths, file_name, input_digests, new_manifest, Common};
use crate::config::{check_inputs, resolve};
use crate::error::{CliError, Result};
use crate::io::{file_stem_safe, fmt_f64, read_edge_list};
use crate::manifest::{now_ms, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HubSd {
    /// Divide by N.
    Population,
    /// Divide by N - 1.
    Sample,
}

/// Network measures and hub nodes of estimated graphs.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MeasuresArgs {
    /// Edge lists to summarize.
    #[arg(long, num_args = 1..)]
    pub graph: Option<Vec<PathBuf>>,
    /// Standard deviation used for the hub threshold mean + 3 sd.
    #[arg(long, value_enum)]
    pub hub_sd: Option<HubSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct MeasuresSettings {
    pub graph: Vec<PathBuf>,
    pub hub_sd: HubSd,
}

impl Default for MeasuresSettings {
    fn default() -> Self {
        Self {
            graph: Vec::new(),
            hub_sd: HubSd::Population,
        }
    }
}

#[derive(Debug, Serialize)]
struct GraphMeasures {
    graph: String,
    #[serde(flatten)]
    report: MeasureReport,
    hubs: HubReport,
}

fn nodes_tsv(r: &MeasureReport) -> String {
    let mut s =
        String::from("node\tin_degree\tout_degree\tsum_degree\tclustering\tlocal_efficiency\n");
    for n in &r.per_node {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            n.label,
            n.in_degree,
            n.out_degree,
            n.sum_degree,
            fmt_f64(n.clustering),
            fmt_f64(n.local_efficiency)
        ));
    }
    s
}

pub fn run(args: &MeasuresArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("measures")?;
    let mut s: MeasuresSettings = resolve(args, &source)?;
    if s.graph.is_empty() {
        return Err(CliError::Usage(
            "--graph needs at least one edge list".into(),
        ));
    }
    s.graph = canonical_paths(&s.graph)?;
    let digests = input_digests(&s.graph)?;
    check_inputs(&source, &digests)?;
    let sd = match s.hub_sd {
        HubSd::Population => SdKind::Population,
        HubSd::Sample => SdKind::Sample,
    };

    let mut out = Outputs::new(common.out_dir());
    let mut all = Vec::with_capacity(s.graph.len());
    let mut stems: Vec<String> = Vec::new();
    for p in &s.graph {
        let g = read_edge_list(p)?;
        let report = measure_report(&g).map_err(|e| CliError::data(p, e.to_string()))?;
        let hubs = find_hubs(&g, sd).map_err(|e| CliError::data(p, e.to_string()))?;
        let stem = file_stem_safe(&p.file_stem().unwrap_or_default().to_string_lossy());
        if stems.contains(&stem) {
            return Err(CliError::Usage(format!(
                "two graphs share the file stem {stem:?}"
            )));
        }
        out.add(format!("nodes_{stem}.tsv"), nodes_tsv(&report));
        stems.push(stem);
        all.push(GraphMeasures {
            graph: file_name(p),
            report,
            hubs,
        });
    }
    out.add_json("measures.json", &all)?;
    out.finish(new_manifest("measures", &s, None, digests, started)?)?;
    Ok(())
}
