use jdag_core::group_compare::EdgeStatistic;
use jdag_core::{
    cross_validate, permutation_test, simulate, GroupedDataset, PermutationOptions, SimSpec,
    SolverConfig,
};

fn data(d: usize, n: usize, seed: u64) -> GroupedDataset {
    let sim = simulate(&SimSpec {
        d,
        n,
        mean_degree: 2.0,
        seed,
        ..SimSpec::default()
    })
    .unwrap();
    GroupedDataset::unlabeled(sim.data).unwrap().centered()
}

fn opts(b: usize) -> PermutationOptions {
    PermutationOptions {
        permutations: b,
        seed: 7,
        ..PermutationOptions::default()
    }
}

#[test]
fn permutation_report_is_independent_of_thread_count() {
    let ds = data(5, 60, 1);
    let cfg = SolverConfig::with_penalty(0.05, 0.02);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| permutation_test(&ds, &cfg, &opts(6)).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn p_values_live_on_the_permutation_lattice() {
    let ds = data(5, 60, 2);
    let cfg = SolverConfig::with_penalty(0.05, 0.02);
    let b = 9;
    let r = permutation_test(&ds, &cfg, &opts(b)).unwrap();
    assert_eq!(r.per_edge.len(), 5 * 4);
    assert_eq!(r.permutations_run, b);
    for e in &r.per_edge {
        let m = e.p_value * (b + 1) as f64;
        assert!((m - m.round()).abs() < 1e-9 && (1.0..=(b + 1) as f64).contains(&m.round()));
        assert!(e.observed_diff >= 0.0);
    }
    // with B = 9 the raw p cut can never pass
    assert!(r.significant_edges.is_empty());
    assert!(!r.notes.is_empty());
}

/// Equal up to the inner solver tolerance.
#[test]
fn observed_statistic_is_symmetric_in_group_order() {
    let ds = data(5, 80, 3);
    let swapped =
        GroupedDataset::unlabeled(vec![ds.group(1).clone(), ds.group(0).clone()]).unwrap();
    let cfg = SolverConfig::with_penalty(0.05, 0.05);
    for statistic in [EdgeStatistic::AbsWeightDiff, EdgeStatistic::PresenceDiff] {
        let o = PermutationOptions {
            statistic,
            ..opts(1)
        };
        let a = permutation_test(&ds, &cfg, &o).unwrap();
        let b = permutation_test(&swapped, &cfg, &o).unwrap();
        for (x, y) in a.per_edge.iter().zip(&b.per_edge) {
            assert_eq!((x.source, x.target), (y.source, y.target));
            assert!((x.observed_diff - y.observed_diff).abs() < 1e-4);
        }
    }
}

#[test]
fn screening_stops_early_without_signal() {
    // two groups drawn from one distribution
    let ds = data(4, 80, 5);
    let pooled = ds.group(0).clone();
    let half = pooled.nrows() / 2;
    let same = GroupedDataset::unlabeled(vec![
        pooled.rows(0, half).into_owned(),
        pooled.rows(half, pooled.nrows() - half).into_owned(),
    ])
    .unwrap()
    .centered();
    let cfg = SolverConfig::with_penalty(0.05, 0.02);
    let o = PermutationOptions {
        screen: Some(jdag_core::group_compare::ScreenRule {
            batch: 4,
            alpha: 0.01,
        }),
        ..opts(50)
    };
    let r = permutation_test(&same, &cfg, &o).unwrap();
    assert_eq!(r.permutations_run, 4);
    assert!(r.notes.iter().any(|n| n.contains("screening")));
}

#[test]
fn cross_validation_beats_underfit_baseline() {
    let ds = data(6, 120, 9);
    let cfg = SolverConfig::default();
    let grid = [(0.02, 0.0), (0.02, 0.1), (2.0, 0.0)];
    let r = cross_validate(&ds, &grid, 3, &cfg, 0).unwrap();
    assert_eq!(r.table.len(), 3);
    assert_ne!(r.best.0, 2.0);
    let underfit = r.table.iter().find(|g| g.lambda1 == 2.0).unwrap();
    let best = r
        .table
        .iter()
        .find(|g| (g.lambda1, g.lambda2) == r.best)
        .unwrap();
    assert!(best.mean < underfit.mean);
    for g in &r.table {
        assert_eq!(g.fold_losses.len(), 3);
        let mean = g.fold_losses.iter().sum::<f64>() / 3.0;
        assert!((g.mean - mean).abs() < 1e-12);
    }
    let again = cross_validate(&ds, &grid, 3, &cfg, 0).unwrap();
    assert_eq!(r, again);
}
