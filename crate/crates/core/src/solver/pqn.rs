//! Proximal quasi-Newton for `f(w) + λ1 ‖w‖₁`: each iteration solves the
//! quadratic model `gᵀd + ½ dᵀBd + λ1 ‖w + d‖₁` over an active set by cyclic
//! coordinate descent, then backtracks on the composite objective.

use super::lbfgs::{dot, inf_norm, CompactHessian, LbfgsMemory};
use super::line_search::armijo_composite;
use super::{InnerResult, InnerStatus, SmoothFn};

const DIAG_FLOOR: f64 = 1e-10;

/// `S_x(t) = sign(x) · max(|x| − t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Closed-form minimizer of `½ a z² + b z + λ1 |c + z|` (requires `a > 0`):
/// `z* = −c + S_{c − b/a}(λ1 / a)`.
pub fn coordinate_update(a: f64, b: f64, c: f64, lambda1: f64) -> f64 {
    -c + soft_threshold(c - b / a, lambda1 / a)
}

/// Coordinates that may move: nonzero ones, plus zeros whose minimal-norm
/// subgradient `max(|g_j| − λ1, 0)` is positive.
pub fn select_active_set(w: &[f64], grad: &[f64], lambda1: f64) -> Vec<usize> {
    w.iter()
        .zip(grad)
        .enumerate()
        .filter(|(_, (&wj, &gj))| wj != 0.0 || gj.abs() > lambda1)
        .map(|(j, _)| j)
        .collect()
}

/// Minimal-norm element of the subdifferential of `f + λ1 ‖·‖₁`.
pub fn min_norm_subgradient(w: &[f64], grad: &[f64], lambda1: f64) -> Vec<f64> {
    w.iter()
        .zip(grad)
        .map(|(&wj, &gj)| {
            if wj > 0.0 {
                gj + lambda1
            } else if wj < 0.0 {
                gj - lambda1
            } else {
                soft_threshold(gj, lambda1)
            }
        })
        .collect()
}

/// Direction minimizing the L1-regularized quadratic model restricted to
/// `active`, by `sweeps` passes of cyclic coordinate descent. Coordinates
/// outside `active` get zero.
pub fn pqn_direction(
    grad: &[f64],
    hessian: &CompactHessian,
    w: &[f64],
    lambda1: f64,
    active: &[usize],
    sweeps: usize,
) -> Vec<f64> {
    let n = grad.len();
    let width = hessian.width();
    let mut d = vec![0.0; n];
    // proj = Q̂ d, so (B d)_j = γD_j d_j − Q_j · proj
    let mut proj = vec![0.0; width];
    let diag: Vec<f64> = active
        .iter()
        .map(|&j| hessian.diag(j).max(DIAG_FLOOR))
        .collect();
    for _ in 0..sweeps.max(1) {
        let mut max_change: f64 = 0.0;
        let mut max_d: f64 = 0.0;
        for (&j, &a) in active.iter().zip(&diag) {
            let bd = if width > 0 {
                hessian.b0(j) * d[j] - dot(hessian.q_row(j), &proj)
            } else {
                hessian.b0(j) * d[j]
            };
            let b = grad[j] + bd;
            let c = w[j] + d[j];
            let z = coordinate_update(a, b, c, lambda1);
            if z != 0.0 {
                d[j] += z;
                if width > 0 {
                    proj.iter_mut()
                        .zip(hessian.qhat_row(j))
                        .for_each(|(p, q)| *p += z * q);
                }
            }
            max_change = max_change.max(z.abs());
            max_d = max_d.max(d[j].abs());
        }
        if max_change <= 1e-10 * max_d.max(1e-10) {
            break;
        }
    }
    d
}

#[derive(Debug, Clone, Copy)]
pub struct PqnParams {
    pub lambda1: f64,
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub ftol: f64,
    pub sweeps: usize,
    pub use_active_set: bool,
    pub armijo_sigma: f64,
    pub armijo_shrink: f64,
    pub max_backtracks: usize,
}

impl Default for PqnParams {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            ftol: 1e-10,
            sweeps: 10,
            use_active_set: true,
            armijo_sigma: 1e-4,
            armijo_shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// Minimizes `f(w) + λ1 ‖w‖₁` from `w0`.
pub fn minimize<F: SmoothFn>(f: &F, w0: &[f64], p: &PqnParams) -> InnerResult {
    let n = w0.len();
    let mut w = w0.to_vec();
    let mut g = vec![0.0; n];
    let smooth = f.value_grad(&w, &mut g);
    let mut composite = smooth + p.lambda1 * l1(&w);
    let mut history = vec![composite];
    if !composite.is_finite() {
        return InnerResult {
            x: w,
            value: composite,
            iters: 0,
            status: InnerStatus::NonFinite,
            history,
        };
    }
    let all: Vec<usize> = (0..n).collect();
    let mut mem = LbfgsMemory::with_metric(p.memory, f.initial_metric(w0));
    let mut status = InnerStatus::MaxIters;
    let mut iters = 0;
    while iters < p.max_iters {
        if inf_norm(&min_norm_subgradient(&w, &g, p.lambda1)) <= p.grad_tol {
            status = InnerStatus::Converged;
            break;
        }
        let active = if p.use_active_set {
            select_active_set(&w, &g, p.lambda1)
        } else {
            all.clone()
        };
        let hessian = mem.compact_rows(&active);
        let dir = pqn_direction(&g, &hessian, &w, p.lambda1, &active, p.sweeps);
        let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let decrease = dot(&g, &dir) + p.lambda1 * (l1(&trial) - l1(&w));
        if !(decrease < 0.0) {
            if mem.is_empty() {
                status = InnerStatus::Converged;
                break;
            }
            // stale curvature; retry with the scaled identity
            mem.clear();
            continue;
        }
        let Some(ls) = armijo_composite(
            f,
            &w,
            composite,
            decrease,
            &dir,
            p.lambda1,
            p.armijo_sigma,
            p.armijo_shrink,
            p.max_backtracks,
        ) else {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            status = InnerStatus::LineSearchFailed;
            break;
        };
        iters += 1;
        let s: Vec<f64> = ls.x.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ls.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        mem.push(s, y);
        let prev = composite;
        w = ls.x;
        g = ls.grad;
        composite = ls.composite_value;
        history.push(composite);
        if (prev - composite) <= p.ftol * prev.abs().max(composite.abs()).max(1.0) {
            status = InnerStatus::Converged;
            break;
        }
    }
    InnerResult {
        x: w,
        value: composite,
        iters,
        status,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_argmin(a: f64, b: f64, c: f64, lambda1: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let steps = 200_000;
        for k in 0..=steps {
            let z = -10.0 + 1e-4 * k as f64;
            let v = 0.5 * a * z * z + b * z + lambda1 * (c + z).abs();
            if v < best.0 {
                best = (v, z);
            }
        }
        best.1
    }

    #[test]
    fn scalar_example() {
        assert_eq!(coordinate_update(1.0, 0.0, 5.0, 1.0), -1.0);
        assert!((grid_argmin(1.0, 0.0, 5.0, 1.0) + 1.0).abs() < 2e-4);
    }

    #[test]
    fn kill_zone_drives_to_zero() {
        // |c − b/a| <= λ1/a
        for (a, b, c, l) in [
            (2.0, 0.5, 0.3, 1.0),
            (1.0, -0.2, -0.1, 0.5),
            (4.0, 0.0, 0.0, 0.1),
        ] {
            assert_eq!(coordinate_update(a, b, c, l), -c);
        }
    }

    #[test]
    fn identity_metric_without_penalty_is_steepest_descent() {
        let g = vec![0.5, -2.0, 1.5, 0.25];
        let w = vec![0.1, 0.0, -0.3, 0.0];
        let h = CompactHessian::scaled_identity(1.0);
        let active = vec![0, 1, 3];
        let d = pqn_direction(&g, &h, &w, 0.0, &active, 5);
        assert_eq!(d, vec![-0.5, 2.0, 0.0, -0.25]);
    }

    #[test]
    fn active_set_examples() {
        let l = 0.5;
        assert!(select_active_set(&[0.0, 0.0], &[0.1, -0.4], l).is_empty());
        assert_eq!(select_active_set(&[0.0, 0.0], &[2.0 * l, 0.0], l), vec![0]);
        // nonzero coordinates stay active regardless of gradient
        assert_eq!(select_active_set(&[0.0, 3.0], &[0.0, 0.0], l), vec![1]);
    }

    #[test]
    fn lasso_matches_closed_form_on_separable_quadratic() {
        // f(w) = ½ Σ a_j (w_j − t_j)²  → w_j* = t_j shrunk by λ1 / a_j
        struct Sep {
            a: Vec<f64>,
            t: Vec<f64>,
        }
        impl SmoothFn for Sep {
            fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
                let mut v = 0.0;
                for j in 0..x.len() {
                    g[j] = self.a[j] * (x[j] - self.t[j]);
                    v += 0.5 * self.a[j] * (x[j] - self.t[j]).powi(2);
                }
                v
            }
        }
        let f = Sep {
            a: vec![1.0, 2.0, 0.5, 3.0],
            t: vec![2.0, -0.1, 0.4, -1.0],
        };
        let p = PqnParams {
            lambda1: 0.3,
            grad_tol: 1e-12,
            ftol: 0.0,
            ..PqnParams::default()
        };
        let r = minimize(&f, &[0.0; 4], &p);
        for j in 0..4 {
            let expect = soft_threshold(f.t[j], p.lambda1 / f.a[j]);
            assert!(
                (r.x[j] - expect).abs() < 1e-9,
                "{j}: {} vs {expect}",
                r.x[j]
            );
        }
        assert_eq!(r.x[1], 0.0);
    }

    proptest! {
        #[test]
        fn coordinate_update_matches_grid(
            a in 0.2f64..5.0,
            b in -4.0f64..4.0,
            c in -3.0f64..3.0,
            lambda1 in 0.0f64..3.0,
        ) {
            let z = coordinate_update(a, b, c, lambda1);
            prop_assume!(z.abs() < 9.9);
            let g = grid_argmin(a, b, c, lambda1);
            prop_assert!((z - g).abs() <= 2e-4, "closed {z} grid {g}");
        }
    }
}
