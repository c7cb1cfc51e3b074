use jdag_core::{acyclicity_gradient, acyclicity_value, matrix_exponential};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `Σ_k A^k / k!` until the terms vanish; fine for small norms.
fn expm_series(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut sum = DMatrix::identity(d, d);
    let mut term = DMatrix::identity(d, d);
    for k in 1..200 {
        term = &term * a / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

fn h_series(w: &DMatrix<f64>) -> f64 {
    expm_series(&w.component_mul(w)).trace() - w.nrows() as f64
}

/// Cycle detection by colored DFS on the support of `w`.
fn has_cycle(w: &DMatrix<f64>) -> bool {
    let d = w.nrows();
    fn visit(v: usize, w: &DMatrix<f64>, color: &mut [u8]) -> bool {
        color[v] = 1;
        for u in 0..w.nrows() {
            if w[(v, u)] != 0.0 && (color[u] == 1 || (color[u] == 0 && visit(u, w, color))) {
                return true;
            }
        }
        color[v] = 2;
        false
    }
    let mut color = vec![0u8; d];
    (0..d).any(|v| color[v] == 0 && visit(v, w, &mut color))
}

fn sparse_matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(prop_oneof![3 => Just(0.0), 1 => -1.2f64..1.2], d * d).prop_map(
        move |v| {
            let mut m = DMatrix::from_vec(d, d, v);
            m.fill_diagonal(0.0);
            m
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn h_matches_series_and_detects_cycles(w in (2usize..7).prop_flat_map(sparse_matrix)) {
        let h = acyclicity_value(&w).unwrap();
        let oracle = h_series(&w);
        prop_assert!((h - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()), "{h} vs {oracle}");
        prop_assert!(h >= -1e-12);
        if has_cycle(&w) {
            prop_assert!(h > 0.0);
        } else {
            prop_assert!(h.abs() < 1e-12, "acyclic support but h = {h}");
        }
    }

    #[test]
    fn gradient_matches_central_differences(w in (2usize..6).prop_flat_map(sparse_matrix)) {
        let g = acyclicity_gradient(&w).unwrap();
        let step = 1e-6;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let mut plus = w.clone();
                plus[(i, j)] += step;
                let mut minus = w.clone();
                minus[(i, j)] -= step;
                let fd = (h_series(&plus) - h_series(&minus)) / (2.0 * step);
                prop_assert!((g[(i, j)] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "({i},{j}): {} vs {fd}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn expm_matches_series_on_dense_input(
        v in proptest::collection::vec(-0.8f64..0.8, 25),
    ) {
        let a = DMatrix::from_vec(5, 5, v);
        let e = matrix_exponential(&a).unwrap();
        let oracle = expm_series(&a);
        prop_assert!((e - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
    }
}

#[test]
fn expm_of_large_norm_matches_squared_series() {
    // e^A = (e^{A/2^s})^{2^s}
    let a = DMatrix::from_fn(6, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 * 0.9 - 2.0);
    let mut oracle = expm_series(&(&a / 64.0));
    for _ in 0..6 {
        oracle = &oracle * &oracle;
    }
    let e = matrix_exponential(&a).unwrap();
    assert!((e - &oracle).amax() <= 1e-10 * oracle.amax());
}

#[test]
fn h_of_directed_cycle_has_closed_form() {
    // a d-cycle with unit weights: tr(e^A) - d = d Σ_{m≥1} 1/(md)!
    for d in 2..6 {
        let w = DMatrix::from_fn(d, d, |i, j| if j == (i + 1) % d { 1.0 } else { 0.0 });
        let mut expected = 0.0;
        let mut fact = 1.0;
        for k in 1..=60 {
            fact *= k as f64;
            if k % d == 0 {
                expected += d as f64 / fact;
            }
        }
        let h = acyclicity_value(&w).unwrap();
        assert!((h - expected).abs() < 1e-12, "d={d}: {h} vs {expected}");
    }
}
