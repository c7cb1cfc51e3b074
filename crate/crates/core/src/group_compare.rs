//! Two-group edge comparison: permutation p-values from refitting the joint
//! model on shuffled subjects, Benjamini–Hochberg correction, and
//! characteristic edges (significant edges present in exactly one group).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::extraction::{threshold_to_dag, BinaryDigraph};
use crate::objective::{center_columns, GroupedDataset, GroupedWeights};
use crate::solver::{fit_joint, SolverConfig};

/// Raw p-value cut applied on top of the FDR step.
pub const RAW_P_CUT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatistic {
    /// `|W1_ij − W2_ij|`.
    #[default]
    AbsWeightDiff,
    /// `|1[|W1_ij| > ω] − 1[|W2_ij| > ω]|`.
    PresenceDiff,
}

/// Early stop: after `batch` permutations, give up if no edge has an
/// interim p-value at or below `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenRule {
    pub batch: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub permutations: usize,
    pub seed: u64,
    pub statistic: EdgeStatistic,
    /// FDR level for the Benjamini–Hochberg step.
    pub q: f64,
    pub screen: Option<ScreenRule>,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self {
            permutations: 100,
            seed: 0,
            statistic: EdgeStatistic::AbsWeightDiff,
            q: 0.05,
            screen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTest {
    pub source: usize,
    pub target: usize,
    pub source_label: String,
    pub target_label: String,
    pub observed_diff: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CteSplit {
    pub group1: Vec<EdgeRef>,
    pub group2: Vec<EdgeRef>,
    /// Significant edges that are present in neither thresholded graph.
    pub in_neither: Vec<EdgeRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub group_names: [String; 2],
    pub statistic: EdgeStatistic,
    pub permutations_run: usize,
    /// Smallest attainable p-value, `1 / (B + 1)`.
    pub min_p_value: f64,
    pub per_edge: Vec<EdgeTest>,
    pub significant_edges: Vec<EdgeRef>,
    pub cte_group1: Vec<EdgeRef>,
    pub cte_group2: Vec<EdgeRef>,
    pub significant_in_neither: Vec<EdgeRef>,
    pub notes: Vec<String>,
}

fn edge_stats(w: &GroupedWeights, statistic: EdgeStatistic, omega: f64) -> Vec<f64> {
    let (a, b) = (w.get(0), w.get(1));
    let d = w.dim();
    let mut out = Vec::with_capacity(d * (d - 1));
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let v = match statistic {
                EdgeStatistic::AbsWeightDiff => (a[(i, j)] - b[(i, j)]).abs(),
                EdgeStatistic::PresenceDiff => {
                    let pa = a[(i, j)].abs() > omega;
                    let pb = b[(i, j)].abs() > omega;
                    f64::from(u8::from(pa != pb))
                }
            };
            out.push(v);
        }
    }
    out
}

/// Pools the two groups' rows, shuffles them with stream `b` of `seed`, and
/// splits them back at the original sizes. Each new group is re-centered.
pub fn permuted_split(data: &GroupedDataset, seed: u64, b: u64) -> Result<GroupedDataset> {
    let (x1, x2) = (data.group(0), data.group(1));
    let (n1, n2, d) = (x1.nrows(), x2.nrows(), data.dim());
    let mut rows: Vec<usize> = (0..n1 + n2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    rows.shuffle(&mut rng);
    let row_of = |r: usize| if r < n1 { x1.row(r) } else { x2.row(r - n1) };
    let build = |idx: &[usize]| {
        let mut m = DMatrix::zeros(idx.len(), d);
        for (dst, &src) in idx.iter().enumerate() {
            m.row_mut(dst).copy_from(&row_of(src));
        }
        center_columns(&m)
    };
    data.with_groups(vec![build(&rows[..n1]), build(&rows[n1..])])
}

/// Edge-wise permutation test between the two groups of `data`.
///
/// The p-value of edge `e` is `(1 + #{b : stat_b(e) >= stat_obs(e)}) / (B + 1)`.
/// Permutation refits run on the current rayon pool; the result does not
/// depend on the pool size.
pub fn permutation_test(
    data: &GroupedDataset,
    cfg: &SolverConfig,
    opts: &PermutationOptions,
) -> Result<CompareReport> {
    if data.num_groups() != 2 {
        return invalid(format!(
            "permutation test needs exactly 2 groups, got {}",
            data.num_groups()
        ));
    }
    if opts.permutations == 0 {
        return invalid("need at least one permutation");
    }
    if !(opts.q > 0.0 && opts.q < 1.0) {
        return invalid("q must lie in (0, 1)");
    }
    let d = data.dim();
    if d < 2 {
        return invalid("need at least two variables");
    }
    let omega = cfg.threshold_omega;
    let (w_obs, _) = fit_joint(data, cfg, opts.seed)?;
    let observed = edge_stats(&w_obs, opts.statistic, omega);

    let run = |range: std::ops::Range<usize>| -> Result<Vec<Vec<f64>>> {
        range
            .into_par_iter()
            .map(|b| {
                let perm = permuted_split(data, opts.seed, b as u64 + 1)?;
                let (w, _) = fit_joint(&perm, cfg, opts.seed)?;
                Ok(edge_stats(&w, opts.statistic, omega))
            })
            .collect()
    };
    let mut exceed = vec![0usize; observed.len()];
    let tally = |exceed: &mut [usize], stats: &[Vec<f64>]| {
        for s in stats {
            for (e, (&sb, &so)) in s.iter().zip(&observed).enumerate() {
                if sb >= so {
                    exceed[e] += 1;
                }
            }
        }
    };
    let mut notes = Vec::new();
    let mut done = 0;
    if let Some(rule) = opts.screen {
        let batch = rule.batch.clamp(1, opts.permutations);
        tally(&mut exceed, &run(0..batch)?);
        done = batch;
        let best = exceed.iter().copied().min().unwrap_or(0);
        if (1 + best) as f64 / (batch + 1) as f64 > rule.alpha && batch < opts.permutations {
            notes.push(format!(
                "screening stopped after {batch} permutations: no edge reached p <= {}",
                rule.alpha
            ));
            return assemble(data, &w_obs, cfg, opts, observed, exceed, batch, notes);
        }
    }
    if done < opts.permutations {
        tally(&mut exceed, &run(done..opts.permutations)?);
    }
    assemble(
        data,
        &w_obs,
        cfg,
        opts,
        observed,
        exceed,
        opts.permutations,
        notes,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    data: &GroupedDataset,
    w_obs: &GroupedWeights,
    cfg: &SolverConfig,
    opts: &PermutationOptions,
    observed: Vec<f64>,
    exceed: Vec<usize>,
    permutations: usize,
    mut notes: Vec<String>,
) -> Result<CompareReport> {
    let d = data.dim();
    let labels = data.variable_names();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let per_edge: Vec<EdgeTest> = pairs
        .iter()
        .zip(observed.iter().zip(&exceed))
        .map(|(&(i, j), (&obs, &ex))| EdgeTest {
            source: i,
            target: j,
            source_label: labels[i].clone(),
            target_label: labels[j].clone(),
            observed_diff: obs,
            p_value: (1 + ex) as f64 / (permutations + 1) as f64,
        })
        .collect();
    let p: Vec<f64> = per_edge.iter().map(|e| e.p_value).collect();
    let significant: Vec<EdgeRef> = fdr_correct(&p, opts.q)?
        .into_iter()
        .map(|idx| EdgeRef {
            source: pairs[idx].0,
            target: pairs[idx].1,
        })
        .collect();
    let g1 = threshold_to_dag(w_obs.get(0), cfg.threshold_omega)?.graph;
    let g2 = threshold_to_dag(w_obs.get(1), cfg.threshold_omega)?.graph;
    let split = extract_ctes(&significant, &g1, &g2);
    let min_p = 1.0 / (permutations + 1) as f64;
    if min_p >= RAW_P_CUT {
        notes.push(format!(
            "with {permutations} permutations the smallest p-value is {min_p:.4}, so the raw p < {RAW_P_CUT} cut rejects nothing"
        ));
    } else if 2.0 * min_p >= RAW_P_CUT {
        notes.push(format!(
            "with {permutations} permutations only edges never matched by any permutation reach p < {RAW_P_CUT}"
        ));
    }
    if !split.in_neither.is_empty() {
        notes.push(format!(
            "{} significant edges are below threshold in both groups",
            split.in_neither.len()
        ));
    }
    Ok(CompareReport {
        group_names: [data.group_names()[0].clone(), data.group_names()[1].clone()],
        statistic: opts.statistic,
        permutations_run: permutations,
        min_p_value: min_p,
        per_edge,
        significant_edges: significant,
        cte_group1: split.group1,
        cte_group2: split.group2,
        significant_in_neither: split.in_neither,
        notes,
    })
}

/// Benjamini–Hochberg step-up: indices of the `r` smallest p-values, where
/// `r` is the largest rank with `p_(r) <= r q / m`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    if p_values.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return invalid("p-values must lie in (0, 1]");
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff = (1..=m)
        .rev()
        .find(|&r| p_values[order[r - 1]] <= r as f64 * q / m as f64)
        .unwrap_or(0);
    let mut out: Vec<usize> = order[..cutoff].to_vec();
    out.sort_unstable();
    Ok(out)
}

/// BH rejections that also pass the raw `p < 0.01` cut.
pub fn fdr_correct(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    Ok(benjamini_hochberg(p_values, q)?
        .into_iter()
        .filter(|&i| p_values[i] < RAW_P_CUT)
        .collect())
}

/// Splits significant edges by which thresholded graph contains them.
pub fn extract_ctes(significant: &[EdgeRef], g1: &BinaryDigraph, g2: &BinaryDigraph) -> CteSplit {
    let mut out = CteSplit::default();
    for &e in significant {
        let in1 = g1.has_edge(e.source, e.target);
        let in2 = g2.has_edge(e.source, e.target);
        match (in1, in2) {
            (true, false) => out.group1.push(e),
            (false, true) => out.group2.push(e),
            (false, false) => out.in_neither.push(e),
            (true, true) => {}
        }
    }
    out
}
