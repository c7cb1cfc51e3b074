use clap::{Args, ValueEnum};
use jdag_core::synthetic::{GraphModel, NoiseKind, WeightSign};
use jdag_core::{simulate, SimSpec};
use serde::{Deserialize, Serialize};

use super::{new_manifest, Common};
use crate::config::resolve;
use crate::error::Result;
use crate::io::{edge_list_tsv, matrix_csv, weight_matrix_tsv};
use crate::manifest::{now_ms, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "lowercase")]
pub enum Model {
    #[value(alias = "ER")]
    Er,
    #[value(alias = "SF")]
    Sf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Gaussian,
    Exponential,
    Gumbel,
}

/// Simulate grouped SEM data from a shared random backbone DAG.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Number of variables.
    #[arg(long)]
    pub d: Option<usize>,
    /// Samples per group.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    /// Mean total degree of the backbone.
    #[arg(long)]
    pub mean_degree: Option<f64>,
    /// Group-specific edges added per group [default: 20% of the backbone].
    #[arg(long)]
    pub extra_edges: Option<usize>,
    #[arg(long)]
    pub weight_low: Option<f64>,
    #[arg(long)]
    pub weight_high: Option<f64>,
    #[arg(long, value_enum)]
    pub sign: Option<Sign>,
    /// Backbone edges share one weight across groups.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub shared_weights: Option<bool>,
    #[arg(long, value_enum)]
    pub noise: Option<Noise>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateSettings {
    pub model: Model,
    pub d: usize,
    pub n: usize,
    pub groups: usize,
    pub mean_degree: f64,
    pub extra_edges: Option<usize>,
    pub weight_low: f64,
    pub weight_high: f64,
    pub sign: Sign,
    pub shared_weights: bool,
    pub noise: Noise,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        let s = SimSpec::default();
        Self {
            model: Model::Er,
            d: s.d,
            n: s.n,
            groups: s.k,
            mean_degree: s.mean_degree,
            extra_edges: None,
            weight_low: s.weight_range.0,
            weight_high: s.weight_range.1,
            sign: Sign::Random,
            shared_weights: s.shared_backbone_weights,
            noise: Noise::Gaussian,
            noise_scale: s.noise_scale,
            seed: s.seed,
        }
    }
}

impl SimulateSettings {
    pub fn spec(&self) -> SimSpec {
        SimSpec {
            d: self.d,
            n: self.n,
            graph_model: match self.model {
                Model::Er => GraphModel::ErdosRenyi,
                Model::Sf => GraphModel::ScaleFree,
            },
            mean_degree: self.mean_degree,
            extra_edges: self.extra_edges,
            weight_range: (self.weight_low, self.weight_high),
            weight_sign: match self.sign {
                Sign::Positive => WeightSign::PositiveOnly,
                Sign::Random => WeightSign::RandomSign,
            },
            shared_backbone_weights: self.shared_weights,
            noise: match self.noise {
                Noise::Gaussian => NoiseKind::Gaussian,
                Noise::Exponential => NoiseKind::Exponential,
                Noise::Gumbel => NoiseKind::Gumbel,
            },
            noise_scale: self.noise_scale,
            k: self.groups,
            seed: self.seed,
        }
    }
}

pub fn run(args: &SimulateArgs, common: &Common) -> Result<()> {
    let started = now_ms();
    let source = common.source("simulate")?;
    let s: SimulateSettings = resolve(args, &source)?;
    let sim = simulate(&s.spec())?;
    let labels: Vec<String> = (0..s.d).map(|i| format!("x{i}")).collect();
    let mut out = Outputs::new(common.out_dir());
    let backbone = sim.backbone.clone().with_labels(labels.clone())?;
    out.add("backbone.tsv", edge_list_tsv(&backbone, None)?);
    for k in 0..s.groups {
        let g = format!("g{}", k + 1);
        out.add(format!("data_{g}.csv"), matrix_csv(&labels, &sim.data[k])?);
        let truth = sim.graphs[k].clone().with_labels(labels.clone())?;
        let w = sim.weights[k].as_matrix();
        out.add(format!("truth_{g}.tsv"), edge_list_tsv(&truth, Some(w))?);
        out.add(format!("weights_{g}.tsv"), weight_matrix_tsv(&labels, w));
    }
    let manifest = new_manifest("simulate", &s, Some(s.seed), Vec::new(), started)?;
    out.finish(manifest)?;
    Ok(())
}
