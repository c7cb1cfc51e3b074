//! Limited-memory BFGS curvature storage, the two-loop recursion for `H g`,
//! the compact representation of `B` used by the coordinate-descent
//! direction solver, and a plain L-BFGS minimizer for the smooth case.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::line_search::{strong_wolfe, WolfeParams};
use super::metric::Metric;
use super::{InnerResult, InnerStatus, SmoothFn};

/// Pairs with `sᵀy` at or below this are skipped.
pub const CURVATURE_EPS: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for t in 0..4 {
            acc[t] += x[t] * y[t];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    // D s
    ds: Vec<f64>,
    sy: f64,
    yy: f64,
    // sᵀDs_b and sᵀy_b against every older stored pair b, oldest first
    ss_prev: VecDeque<f64>,
    sy_prev: VecDeque<f64>,
}

/// Ring buffer of the most recent curvature pairs.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<Pair>,
    // initial matrix is γD
    metric: Arc<Metric>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self::with_metric(capacity, Metric::Identity)
    }

    /// Memory whose initial matrix is `metric` instead of `γ I`.
    pub fn with_metric(capacity: usize, metric: Metric) -> Self {
        Self {
            capacity: capacity.max(1),
            pairs: VecDeque::with_capacity(capacity.max(1)),
            metric: Arc::new(metric),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` unless `sᵀy <= 1e-10`. Returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > CURVATURE_EPS) || !sy.is_finite() {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
            for p in &mut self.pairs {
                p.ss_prev.pop_front();
                p.sy_prev.pop_front();
            }
        }
        let ds = self.metric.apply(&s);
        let ss_prev = self.pairs.iter().map(|p| dot(&ds, &p.s)).collect();
        let sy_prev = self.pairs.iter().map(|p| dot(&s, &p.y)).collect();
        let yy = dot(&y, &y);
        self.pairs.push_back(Pair {
            s,
            y,
            ds,
            sy,
            yy,
            ss_prev,
            sy_prev,
        });
        true
    }

    /// Scaling of the initial matrix `B0 = γ D`: 1 when an explicit metric was
    /// supplied, otherwise `yᵀy / sᵀy` of the newest pair.
    pub fn gamma(&self) -> f64 {
        if !self.metric.is_identity() {
            return 1.0;
        }
        match self.pairs.back() {
            Some(p) => p.yy / p.sy,
            None => 1.0,
        }
    }

    /// `H g` with `H0 = D⁻¹ / γ`.
    pub fn two_loop(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; self.pairs.len()];
        for (idx, p) in self.pairs.iter().enumerate().rev() {
            let a = dot(&p.s, &q) / p.sy;
            alphas[idx] = a;
            q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= a * yi);
        }
        let h0 = 1.0 / self.gamma();
        let mut r = self.metric.solve(&q);
        r.iter_mut().for_each(|v| *v *= h0);
        for (idx, p) in self.pairs.iter().enumerate() {
            let b = dot(&p.y, &r) / p.sy;
            let coef = alphas[idx] - b;
            r.iter_mut().zip(&p.s).for_each(|(ri, si)| *ri += coef * si);
        }
        r
    }

    /// Compact form `B = γD − Q M Qᵀ` with `Q = [γDS, Y]`.
    pub fn compact(&self) -> CompactHessian {
        let n = self.pairs.front().map_or(0, |p| p.s.len());
        self.compact_rows(&(0..n).collect::<Vec<_>>())
    }

    /// Compact form holding only the rows of `Q` listed in `rows`; the other
    /// rows of the result must not be queried.
    pub fn compact_rows(&self, rows: &[usize]) -> CompactHessian {
        let gamma = self.gamma();
        let m = self.pairs.len();
        if m == 0 {
            return self.initial(gamma);
        }
        let n = self.pairs[0].s.len();
        // M⁻¹ = [[γSᵀDS, L], [Lᵀ, −C]] with C = diag(sᵀy), inverted through
        // the Schur complement P = γSᵀDS + L C⁻¹ Lᵀ.
        let mut ss = DMatrix::<f64>::zeros(m, m);
        let mut l = DMatrix::<f64>::zeros(m, m);
        for (a, p) in self.pairs.iter().enumerate() {
            for b in 0..a {
                ss[(a, b)] = p.ss_prev[b];
                ss[(b, a)] = p.ss_prev[b];
                l[(a, b)] = p.sy_prev[b];
            }
            ss[(a, a)] = dot(&p.ds, &p.s);
        }
        let d_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            self.pairs.iter().map(|p| 1.0 / p.sy),
        ));
        let l_dinv = &l * &d_inv;
        let schur = ss * gamma + &l_dinv * l.transpose();
        let Some(chol) = schur.cholesky() else {
            return self.initial(gamma);
        };
        let p_inv = chol.inverse();
        let inv12 = &p_inv * &l_dinv;
        let inv22 = l_dinv.transpose() * &inv12 - d_inv;
        let width = 2 * m;
        let mut inv = DMatrix::<f64>::zeros(width, width);
        inv.view_mut((0, 0), (m, m)).copy_from(&p_inv);
        inv.view_mut((0, m), (m, m)).copy_from(&inv12);
        inv.view_mut((m, 0), (m, m)).copy_from(&inv12.transpose());
        inv.view_mut((m, m), (m, m)).copy_from(&inv22);
        // column r of `qt` is row rows[r] of Q
        let mut qt = DMatrix::<f64>::zeros(width, rows.len());
        {
            let buf = qt.as_mut_slice();
            for (r, &j) in rows.iter().enumerate() {
                let col = &mut buf[r * width..(r + 1) * width];
                for (a, p) in self.pairs.iter().enumerate() {
                    col[a] = gamma * p.ds[j];
                    col[m + a] = p.y[j];
                }
            }
        }
        let qhat = (&inv * &qt).data.as_vec().clone();
        let mut slot = vec![usize::MAX; n];
        for (r, &j) in rows.iter().enumerate() {
            slot[j] = r;
        }
        CompactHessian {
            gamma,
            metric: Arc::clone(&self.metric),
            width,
            slot,
            q: qt.data.as_vec().clone(),
            qhat,
        }
    }

    fn initial(&self, gamma: f64) -> CompactHessian {
        CompactHessian {
            metric: Arc::clone(&self.metric),
            ..CompactHessian::scaled_identity(gamma)
        }
    }
}

/// `B = γD − Q Q̂ᵀ`, stored row-wise so one coordinate costs `O(m)`.
#[derive(Debug, Clone)]
pub struct CompactHessian {
    pub gamma: f64,
    metric: Arc<Metric>,
    width: usize,
    slot: Vec<usize>,
    q: Vec<f64>,
    qhat: Vec<f64>,
}

impl CompactHessian {
    pub fn scaled_identity(gamma: f64) -> Self {
        Self {
            gamma,
            metric: Arc::new(Metric::Identity),
            width: 0,
            slot: Vec::new(),
            q: Vec::new(),
            qhat: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn q_row(&self, j: usize) -> &[f64] {
        let r = self.slot[j];
        &self.q[r * self.width..(r + 1) * self.width]
    }

    pub fn qhat_row(&self, j: usize) -> &[f64] {
        let r = self.slot[j];
        &self.qhat[r * self.width..(r + 1) * self.width]
    }

    /// Diagonal entry `j` of `γD`.
    pub fn b0(&self, j: usize) -> f64 {
        self.gamma * self.metric.diag(j)
    }

    pub fn diag(&self, j: usize) -> f64 {
        if self.width == 0 {
            return self.b0(j);
        }
        self.b0(j) - dot(self.q_row(j), self.qhat_row(j))
    }

    /// Dense `B v`; used in tests and diagnostics.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut proj = vec![0.0; self.width];
        if self.width > 0 {
            for j in 0..n {
                for (p, qh) in proj.iter_mut().zip(self.qhat_row(j)) {
                    *p += qh * v[j];
                }
            }
        }
        let mut out = self.metric.apply(v);
        for (j, o) in out.iter_mut().enumerate() {
            let low_rank = if self.width > 0 {
                dot(self.q_row(j), &proj)
            } else {
                0.0
            };
            *o = self.gamma * *o - low_rank;
        }
        out
    }
}

/// Unconstrained L-BFGS with a strong-Wolfe line search, starting at `x0`.
pub fn minimize<F: SmoothFn>(
    f: &F,
    x0: &[f64],
    memory_size: usize,
    max_iters: usize,
    grad_tol: f64,
    ftol: f64,
) -> InnerResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f.value_grad(&x, &mut g);
    let mut history = vec![fx];
    if !fx.is_finite() {
        return InnerResult {
            x,
            value: fx,
            iters: 0,
            status: InnerStatus::NonFinite,
            history,
        };
    }
    let metric = f.initial_metric(x0);
    let scaled = !metric.is_identity();
    let mut mem = LbfgsMemory::with_metric(memory_size, metric);
    let params = WolfeParams::default();
    let mut status = InnerStatus::MaxIters;
    let mut iters = 0;
    while iters < max_iters {
        if inf_norm(&g) <= grad_tol {
            status = InnerStatus::Converged;
            break;
        }
        let mut dir: Vec<f64> = mem.two_loop(&g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            mem.clear();
            dir = mem.two_loop(&g).into_iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let step0 = if mem.is_empty() && !scaled {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let Some(ls) = strong_wolfe(f, &x, fx, slope, &dir, step0, &params) else {
            status = InnerStatus::LineSearchFailed;
            break;
        };
        iters += 1;
        let s: Vec<f64> = dir.iter().map(|d| ls.step * d).collect();
        let y: Vec<f64> = ls.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        mem.push(s, y);
        let prev = fx;
        x = ls.x;
        g = ls.grad;
        fx = ls.value;
        history.push(fx);
        if (prev - fx) <= ftol * prev.abs().max(fx.abs()).max(1.0) {
            status = InnerStatus::Converged;
            break;
        }
    }
    InnerResult {
        x,
        value: fx,
        iters,
        status,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        // y = A s for a random SPD A guarantees positive curvature
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &r * r.transpose() + DMatrix::identity(n, n);
        (0..count)
            .map(|_| {
                let s = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let y = &a * &s;
                (s.as_slice().to_vec(), y.as_slice().to_vec())
            })
            .collect()
    }

    fn dense_inverse_bfgs(pairs: &[(Vec<f64>, Vec<f64>)], gamma: f64) -> DMatrix<f64> {
        let n = pairs[0].0.len();
        let mut h = DMatrix::<f64>::identity(n, n) / gamma;
        let ident = DMatrix::<f64>::identity(n, n);
        for (s, y) in pairs {
            let s = nalgebra::DVector::from_column_slice(s);
            let y = nalgebra::DVector::from_column_slice(y);
            let rho = 1.0 / s.dot(&y);
            let left = &ident - (&s * y.transpose()) * rho;
            let right = &ident - (&y * s.transpose()) * rho;
            h = &left * h * &right + (&s * s.transpose()) * rho;
        }
        h
    }

    fn dense_bfgs(pairs: &[(Vec<f64>, Vec<f64>)], gamma: f64) -> DMatrix<f64> {
        let n = pairs[0].0.len();
        dense_bfgs_from(pairs, DMatrix::<f64>::identity(n, n) * gamma)
    }

    fn dense_bfgs_from(pairs: &[(Vec<f64>, Vec<f64>)], b0: DMatrix<f64>) -> DMatrix<f64> {
        let mut b = b0;
        for (s, y) in pairs {
            let s = nalgebra::DVector::from_column_slice(s);
            let y = nalgebra::DVector::from_column_slice(y);
            let bs = &b * &s;
            b = &b - (&bs * bs.transpose()) / s.dot(&bs) + (&y * y.transpose()) / s.dot(&y);
        }
        b
    }

    #[test]
    fn two_loop_matches_dense_inverse() {
        for n in 2..=6 {
            for seed in 0..5 {
                let pairs = random_pairs(n, n, seed * 17 + n as u64);
                let mut mem = LbfgsMemory::new(pairs.len());
                for (s, y) in &pairs {
                    assert!(mem.push(s.clone(), y.clone()));
                }
                let h = dense_inverse_bfgs(&pairs, mem.gamma());
                let g: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
                let dense = &h * nalgebra::DVector::from_column_slice(&g);
                let fast = mem.two_loop(&g);
                for i in 0..n {
                    assert!((dense[i] - fast[i]).abs() <= 1e-8 * (1.0 + dense[i].abs()));
                }
            }
        }
    }

    #[test]
    fn compact_form_matches_dense_bfgs() {
        for n in 2..=6 {
            let pairs = random_pairs(n, 3, 99 + n as u64);
            let mut mem = LbfgsMemory::new(3);
            for (s, y) in &pairs {
                mem.push(s.clone(), y.clone());
            }
            let b = dense_bfgs(&pairs, mem.gamma());
            let compact = mem.compact();
            for j in 0..n {
                assert!((compact.diag(j) - b[(j, j)]).abs() <= 1e-8 * (1.0 + b[(j, j)].abs()));
            }
            let v: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
            let bv = &b * nalgebra::DVector::from_column_slice(&v);
            for (j, got) in compact.apply(&v).into_iter().enumerate() {
                assert!((got - bv[j]).abs() <= 1e-8 * (1.0 + bv[j].abs()));
            }
            // B H = I on the stored pairs
            let hb = mem.two_loop(&compact.apply(&v));
            for j in 0..n {
                assert!((hb[j] - v[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scaled_metric_and_eviction_match_dense_bfgs() {
        for n in 3..=7 {
            let pairs = random_pairs(n, 7, 5 + n as u64);
            let metric: Vec<f64> = (0..n).map(|i| 0.5 + 3.0 * i as f64).collect();
            let mut mem = LbfgsMemory::with_metric(4, Metric::Diagonal(metric.clone()));
            for (s, y) in &pairs {
                assert!(mem.push(s.clone(), y.clone()));
            }
            let kept = &pairs[3..];
            let b0 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&metric))
                * mem.gamma();
            let b = dense_bfgs_from(kept, b0);
            let rows: Vec<usize> = (0..n).step_by(2).collect();
            let compact = mem.compact_rows(&rows);
            for &j in &rows {
                assert!((compact.diag(j) - b[(j, j)]).abs() <= 1e-8 * (1.0 + b[(j, j)].abs()));
            }
            let full = mem.compact();
            let v: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
            let bv = &b * nalgebra::DVector::from_column_slice(&v);
            for (j, got) in full.apply(&v).into_iter().enumerate() {
                assert!(
                    (got - bv[j]).abs() <= 1e-8 * (1.0 + bv[j].abs()),
                    "n {n} j {j}: {got} vs {}",
                    bv[j]
                );
            }
            let hb = mem.two_loop(&full.apply(&v));
            for j in 0..n {
                assert!((hb[j] - v[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn push_skips_nonpositive_curvature() {
        let mut mem = LbfgsMemory::new(2);
        assert!(!mem.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!mem.push(vec![1.0, 0.0], vec![1e-12, 0.0]));
        assert!(mem.push(vec![1.0, 0.0], vec![1.0, 0.0]));
        assert!(mem.push(vec![0.0, 1.0], vec![0.0, 2.0]));
        assert!(mem.push(vec![1.0, 1.0], vec![1.0, 2.0]));
        assert_eq!(mem.len(), 2);
    }

    struct Quadratic {
        a: DMatrix<f64>,
        b: Vec<f64>,
    }

    impl SmoothFn for Quadratic {
        fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            let xv = nalgebra::DVector::from_column_slice(x);
            let ax = &self.a * &xv;
            for i in 0..x.len() {
                grad[i] = ax[i] - self.b[i];
            }
            0.5 * xv.dot(&ax) - dot(&self.b, x)
        }
    }

    #[test]
    fn minimizes_quadratic() {
        let q = Quadratic {
            a: DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]),
            b: vec![1.0, -2.0, 0.5],
        };
        let res = minimize(&q, &[0.0; 3], 10, 200, 1e-10, 0.0);
        assert_eq!(res.status, InnerStatus::Converged);
        let exact =
            q.a.clone()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&q.b))
                .unwrap();
        for i in 0..3 {
            assert!((res.x[i] - exact[i]).abs() < 1e-8);
        }
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));

        // restarting at the optimum stops immediately
        let again = minimize(&q, &res.x, 10, 200, 1e-8, 0.0);
        assert!(again.iters <= 1);
    }
}
