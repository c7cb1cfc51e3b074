//! Smooth acyclicity function `h(W) = tr(exp(W ∘ W)) - d` and its gradient.
//!
//! `h` is zero exactly when the support of `W` is a DAG and strictly positive
//! otherwise, which lets the structure search run as a continuous equality
//! constrained problem.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Square matrix of edge weights with a zero diagonal. Entry `(i, j)` is the
/// weight of the edge `i -> j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        if (0..m.nrows()).any(|i| m[(i, i)] != 0.0) {
            return invalid("weight matrix must have a zero diagonal");
        }
        Ok(Self(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    /// Builds from row-major entries. The diagonal is forced to zero.
    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return invalid(format!("expected {} entries, got {}", d * d, entries.len()));
        }
        let mut m = DMatrix::from_row_slice(d, d, entries);
        m.fill_diagonal(0.0);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

impl std::ops::Index<(usize, usize)> for WeightMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return invalid(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("matrix contains non-finite entries");
    }
    Ok(())
}

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn matrix_exponential(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    let ident = DMatrix::<f64>::identity(n, n);

    let low_degree = [
        (THETA_3, &PADE_3[..]),
        (THETA_5, &PADE_5[..]),
        (THETA_7, &PADE_7[..]),
        (THETA_9, &PADE_9[..]),
    ];
    for (theta, coeffs) in low_degree {
        if norm <= theta {
            let (u, v) = pade_low(a, coeffs, &ident);
            return pade_solve(&u, &v);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);
    let (u, v) = pade_13(&scaled, &ident);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..squarings {
        r = &r * &r;
        if !r.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<f64>, b: &[f64], ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let a2 = a * a;
    // even powers A^0, A^2, A^4, ...
    let mut powers = vec![ident.clone()];
    for k in 1..b.len() / 2 {
        let next = &powers[k - 1] * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::zeros(a.nrows(), a.ncols());
    let mut v = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        u_inner += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    (a * u_inner, v)
}

fn pade_13(a: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1];
    let u = a * u_inner;
    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| crate::Error::InvalidArgument("singular Padé denominator".into()))
}

/// `h(W) = tr(exp(W ∘ W)) - d`.
pub fn acyclicity_value(w: &DMatrix<f64>) -> Result<f64> {
    let e = matrix_exponential(&w.component_mul(w))?;
    Ok(e.trace() - w.nrows() as f64)
}

/// `∇h(W) = 2 exp(W ∘ W)ᵀ ∘ W`.
pub fn acyclicity_gradient(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(acyclicity_value_and_gradient(w)?.1)
}

/// Value and gradient from a single exponential evaluation.
pub fn acyclicity_value_and_gradient(w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let e = matrix_exponential(&w.component_mul(w))?;
    let h = e.trace() - w.nrows() as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    Ok((h, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series_exp(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for m in 1..=terms {
            term = &term * a / m as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let e = matrix_exponential(&a).unwrap();
        assert_relative_eq!(e[(0, 0)], 1f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(e[(1, 1)], 2f64.exp(), max_relative = 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn exp_of_swap_matches_eigendecomposition() {
        // eigenvalues ±1 with eigenvectors (1, ±1)/√2
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = matrix_exponential(&a).unwrap();
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        assert_relative_eq!(e[(0, 0)], c, max_relative = 1e-13);
        assert_relative_eq!(e[(1, 1)], c, max_relative = 1e-13);
        assert_relative_eq!(e[(0, 1)], s, max_relative = 1e-13);
        assert_relative_eq!(e[(1, 0)], s, max_relative = 1e-13);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matrix_exponential(&DMatrix::zeros(2, 3)).is_err());
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matrix_exponential(&a).is_err());
    }

    #[test]
    fn exp_matches_series_across_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let n = rng.random_range(1..=7);
            let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            // sweep the 1-norm through every Padé branch up to 10
            let target = [0.01, 0.2, 0.9, 2.0, 5.0, 10.0][trial % 6];
            a *= target / one_norm(&a).max(1e-300);
            let e = matrix_exponential(&a).unwrap();
            let oracle = series_exp(&a, 150);
            let rel = (&e - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-10, "norm {target}: relative error {rel}");
        }
    }

    #[test]
    fn h_zero_matrix() {
        assert_eq!(acyclicity_value(&DMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(
            acyclicity_gradient(&DMatrix::zeros(2, 2)).unwrap(),
            DMatrix::zeros(2, 2)
        );
    }

    #[test]
    fn h_single_edge_is_zero() {
        for w in [-3.0, 0.1, 1.0, 7.5] {
            let m = DMatrix::from_row_slice(2, 2, &[0.0, w, 0.0, 0.0]);
            assert!(acyclicity_value(&m).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn h_two_cycle() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let oracle = series_exp(&m.component_mul(&m), 30).trace() - 2.0;
        let h = acyclicity_value(&m).unwrap();
        assert_relative_eq!(h, oracle, max_relative = 1e-12);
        assert_relative_eq!(h, 2.0 * 1f64.cosh() - 2.0, max_relative = 1e-12);
        assert_relative_eq!(h, 1.0862, epsilon = 1e-4);

        let g = acyclicity_gradient(&m).unwrap();
        let e = series_exp(&m.component_mul(&m), 30);
        let oracle_g = e.transpose().component_mul(&m) * 2.0;
        assert_relative_eq!(g[(0, 1)], oracle_g[(0, 1)], max_relative = 1e-12);
        assert_relative_eq!(g[(0, 1)], 2.0 * 1f64.sinh(), max_relative = 1e-12);
        assert_relative_eq!(g[(1, 0)], 2.3504, epsilon = 1e-4);
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(1, 1)], 0.0);
    }

    #[test]
    fn weight_matrix_rejects_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(WeightMatrix::new(m).is_err());
        let w = WeightMatrix::from_row_slice(2, &[5.0, 1.0, 0.0, 5.0]).unwrap();
        assert_eq!(w[(0, 0)], 0.0);
        assert_eq!(w[(0, 1)], 1.0);
    }
}
