//! K-fold cross-validation of `(λ1, λ2)` scored by held-out SEM loss.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::objective::{sem_loss, GroupedDataset, PenaltyParams};
use crate::solver::{fit_joint, SolverConfig};

/// Default search grid: `λ1 ∈ {1e-3, 1e-2, 1e-1}`, `λ2 ∈ {0, 1e-2, 1e-1, 1}`.
pub fn default_grid() -> Vec<(f64, f64)> {
    let l1 = [1e-3, 1e-2, 1e-1];
    let l2 = [0.0, 1e-2, 1e-1, 1.0];
    l1.iter()
        .flat_map(|&a| l2.iter().map(move |&b| (a, b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub lambda1: f64,
    pub lambda2: f64,
    pub fold_losses: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: (f64, f64),
    pub folds: usize,
    pub table: Vec<GridScore>,
}

/// Fold index of every row of every group: rows are shuffled per group and
/// dealt round-robin, so each fold holds `⌊n_k/F⌋` or `⌈n_k/F⌉` rows of group k.
pub fn fold_assignment(data: &GroupedDataset, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    data.groups()
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut rows: Vec<usize> = (0..x.nrows()).collect();
            rows.shuffle(&mut rng);
            let mut fold_of = vec![0; x.nrows()];
            for (pos, &r) in rows.iter().enumerate() {
                fold_of[r] = pos % folds;
            }
            fold_of
        })
        .collect()
}

fn select_rows(x: &DMatrix<f64>, keep: impl Fn(usize) -> bool) -> DMatrix<f64> {
    let rows: Vec<usize> = (0..x.nrows()).filter(|&r| keep(r)).collect();
    let mut out = DMatrix::zeros(rows.len(), x.ncols());
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).copy_from(&x.row(src));
    }
    out
}

/// Train/test datasets for fold `f`.
pub fn split_fold(
    data: &GroupedDataset,
    assignment: &[Vec<usize>],
    f: usize,
) -> Result<(GroupedDataset, GroupedDataset)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (x, fold_of) in data.groups().iter().zip(assignment) {
        train.push(select_rows(x, |r| fold_of[r] != f));
        test.push(select_rows(x, |r| fold_of[r] == f));
    }
    Ok((data.with_groups(train)?, data.with_groups(test)?))
}

/// Picks the grid point with the lowest mean held-out loss. Exact ties go to
/// the larger `λ1`, then the larger `λ2`.
pub fn cross_validate(
    data: &GroupedDataset,
    grid: &[(f64, f64)],
    folds: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return invalid("grid is empty");
    }
    if folds < 2 {
        return invalid("need at least two folds");
    }
    for (k, x) in data.groups().iter().enumerate() {
        if x.nrows() < folds {
            return invalid(format!(
                "group {k} has {} rows, fewer than {folds} folds",
                x.nrows()
            ));
        }
    }
    for &(l1, l2) in grid {
        PenaltyParams::new(l1, l2).validate()?;
    }
    let assignment = fold_assignment(data, folds, seed);
    let splits = (0..folds)
        .map(|f| split_fold(data, &assignment, f))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let losses: Vec<f64> = tasks
        .par_iter()
        .map(|&(g, f)| {
            let (l1, l2) = grid[g];
            let cfg = SolverConfig {
                penalty: PenaltyParams {
                    lambda1: l1,
                    lambda2: l2,
                    ..cfg.penalty
                },
                ..cfg.clone()
            };
            let (train, test) = &splits[f];
            let (w, _) = fit_joint(train, &cfg, seed)?;
            sem_loss(&w, test)
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<GridScore> = grid
        .iter()
        .enumerate()
        .map(|(g, &(l1, l2))| {
            let fold_losses = losses[g * folds..(g + 1) * folds].to_vec();
            let n = folds as f64;
            let mean = fold_losses.iter().sum::<f64>() / n;
            let sd =
                (fold_losses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            GridScore {
                lambda1: l1,
                lambda2: l2,
                fold_losses,
                mean,
                sd,
            }
        })
        .collect();
    let best = table
        .iter()
        .min_by(|a, b| {
            a.mean
                .total_cmp(&b.mean)
                .then(b.lambda1.total_cmp(&a.lambda1))
                .then(b.lambda2.total_cmp(&a.lambda2))
        })
        .map(|s| (s.lambda1, s.lambda2))
        .expect("non-empty grid");
    Ok(CvResult { best, folds, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{simulate, SimSpec};

    fn small_data() -> GroupedDataset {
        let sim = simulate(&SimSpec {
            d: 5,
            n: 60,
            mean_degree: 2.0,
            k: 2,
            seed: 4,
            ..SimSpec::default()
        })
        .unwrap();
        GroupedDataset::unlabeled(sim.data).unwrap().centered()
    }

    #[test]
    fn folds_partition_rows() {
        let data = small_data();
        let a = fold_assignment(&data, 5, 1);
        for (x, fold_of) in data.groups().iter().zip(&a) {
            assert_eq!(fold_of.len(), x.nrows());
            let counts: Vec<usize> = (0..5)
                .map(|f| fold_of.iter().filter(|&&v| v == f).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
        let (train, test) = split_fold(&data, &a, 2).unwrap();
        assert_eq!(train.group(0).nrows() + test.group(0).nrows(), 60);
    }

    #[test]
    fn single_point_grid() {
        let data = small_data();
        let r = cross_validate(&data, &[(0.05, 0.1)], 3, &SolverConfig::default(), 0).unwrap();
        assert_eq!(r.best, (0.05, 0.1));
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].fold_losses.len(), 3);
    }

    #[test]
    fn tie_break_prefers_sparser() {
        let data = small_data();
        // identical grid entries in value but different labels can't tie, so
        // use a huge λ1 where every fit is exactly zero
        let r = cross_validate(
            &data,
            &[(1e3, 0.0), (1e4, 0.0), (1e4, 1.0)],
            2,
            &SolverConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(r.table[0].mean, r.table[1].mean);
        assert_eq!(r.best, (1e4, 1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = small_data();
        let cfg = SolverConfig::default();
        assert!(cross_validate(&data, &[], 5, &cfg, 0).is_err());
        assert!(cross_validate(&data, &[(0.1, 0.0)], 1, &cfg, 0).is_err());
        assert!(cross_validate(&data, &[(0.1, 0.0)], 61, &cfg, 0).is_err());
    }
}
