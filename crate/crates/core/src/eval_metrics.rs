//! Edge-level accuracy of an estimated graph against the truth, with
//! reversed edges counted separately from true and false positives.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::extraction::BinaryDigraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Estimated edges present in the truth with the same direction.
    pub tp: usize,
    /// Estimated edges whose pair is not adjacent in the truth at all.
    pub fp: usize,
    /// True edges not estimated with the same direction.
    pub fn_count: usize,
    /// Estimated edges present in the truth only in the opposite direction.
    pub reversed: usize,
    /// Skeleton pairs adjacent in the estimate but not in the truth.
    pub extra: usize,
    /// Skeleton pairs adjacent in the truth but not in the estimate.
    pub missing: usize,
    pub predicted: usize,
    pub true_count: usize,
    pub fdr: f64,
    pub tpr: f64,
    pub shd: usize,
}

pub fn evaluate(estimated: &BinaryDigraph, truth: &BinaryDigraph) -> Result<EvalReport> {
    if estimated.num_nodes() != truth.num_nodes() {
        return invalid(format!(
            "estimated graph has {} nodes, truth has {}",
            estimated.num_nodes(),
            truth.num_nodes()
        ));
    }
    let (mut tp, mut fp, mut reversed) = (0, 0, 0);
    for (i, j) in estimated.edges() {
        if truth.has_edge(i, j) {
            tp += 1;
        } else if truth.has_edge(j, i) {
            reversed += 1;
        } else {
            fp += 1;
        }
    }
    let fn_count = truth
        .edges()
        .filter(|&(i, j)| !estimated.has_edge(i, j))
        .count();
    let adjacent = |g: &BinaryDigraph, i: usize, j: usize| g.has_edge(i, j) || g.has_edge(j, i);
    let mut extra = 0;
    for (i, j) in estimated.edges() {
        // count each skeleton pair once, from its smaller-index edge
        if estimated.has_edge(j, i) && j < i {
            continue;
        }
        if !adjacent(truth, i, j) {
            extra += 1;
        }
    }
    let mut missing = 0;
    for (i, j) in truth.edges() {
        if truth.has_edge(j, i) && j < i {
            continue;
        }
        if !adjacent(estimated, i, j) {
            missing += 1;
        }
    }
    let predicted = estimated.num_edges();
    let true_count = truth.num_edges();
    let fdr = if predicted == 0 {
        0.0
    } else {
        (reversed + fp) as f64 / predicted as f64
    };
    let tpr = if true_count == 0 {
        1.0
    } else {
        tp as f64 / true_count as f64
    };
    Ok(EvalReport {
        tp,
        fp,
        fn_count,
        reversed,
        extra,
        missing,
        predicted,
        true_count,
        fdr,
        tpr,
        shd: extra + missing + reversed,
    })
}

/// Mean and sample standard deviation of FDR, TPR and SHD over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub runs: usize,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
    pub tpr_mean: f64,
    pub tpr_sd: f64,
    pub shd_mean: f64,
    pub shd_sd: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(reports: &[EvalReport]) -> Result<EvalSummary> {
    if reports.is_empty() {
        return invalid("nothing to summarize");
    }
    let col = |f: fn(&EvalReport) -> f64| mean_sd(&reports.iter().map(f).collect::<Vec<_>>());
    let (fdr_mean, fdr_sd) = col(|r| r.fdr);
    let (tpr_mean, tpr_sd) = col(|r| r.tpr);
    let (shd_mean, shd_sd) = col(|r| r.shd as f64);
    Ok(EvalSummary {
        runs: reports.len(),
        fdr_mean,
        fdr_sd,
        tpr_mean,
        tpr_sd,
        shd_mean,
        shd_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(d: usize, edges: &[(usize, usize)]) -> BinaryDigraph {
        BinaryDigraph::from_edges(d, edges.iter().copied()).unwrap()
    }

    #[test]
    fn perfect_estimate() {
        let t = g(4, &[(0, 1), (1, 2), (0, 3)]);
        let r = evaluate(&t, &t).unwrap();
        assert_eq!((r.fdr, r.tpr, r.shd), (0.0, 1.0, 0));
    }

    #[test]
    fn reversed_edge() {
        let r = evaluate(&g(2, &[(1, 0)]), &g(2, &[(0, 1)])).unwrap();
        assert_eq!(
            (r.reversed, r.fp, r.tp, r.extra, r.missing, r.shd),
            (1, 0, 0, 0, 0, 1)
        );
        assert_eq!((r.fdr, r.tpr), (1.0, 0.0));
    }

    #[test]
    fn one_extra_edge() {
        let r = evaluate(&g(4, &[(0, 1), (2, 3)]), &g(4, &[(0, 1)])).unwrap();
        assert_eq!((r.predicted, r.fp, r.shd), (2, 1, 1));
        assert_eq!((r.fdr, r.tpr), (0.5, 1.0));
    }

    #[test]
    fn degenerate_denominators() {
        let r = evaluate(&BinaryDigraph::empty(3), &BinaryDigraph::empty(3)).unwrap();
        assert_eq!((r.fdr, r.tpr), (0.0, 1.0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(evaluate(&BinaryDigraph::empty(3), &BinaryDigraph::empty(4)).is_err());
    }

    #[test]
    fn summary_stats() {
        let t = g(3, &[(0, 1)]);
        let a = evaluate(&t, &t).unwrap();
        let b = evaluate(&g(3, &[(1, 0)]), &t).unwrap();
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.shd_mean, 0.5);
        assert!((s.shd_sd - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
