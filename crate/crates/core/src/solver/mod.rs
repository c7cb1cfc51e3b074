//! Augmented-Lagrangian outer loop with dual ascent on the per-group
//! multipliers. Inner subproblems go to L-BFGS when `λ1 = 0` and to the
//! proximal quasi-Newton solver otherwise.

pub mod lbfgs;
pub mod line_search;
pub mod metric;
pub mod pqn;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constraint::acyclicity_value;
use crate::error::{invalid, Error, Result};
use crate::objective::{GroupedDataset, GroupedWeights, PenaltyParams, SmoothObjective};

pub use metric::Metric;
pub use pqn::{coordinate_update, pqn_direction, select_active_set, soft_threshold};

/// A differentiable function of a flat vector.
pub trait SmoothFn {
    /// Returns the value and writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Positive diagonal approximation of the Hessian at `x`, used as the
    /// initial quasi-Newton matrix. The identity is rescaled from curvature
    /// pairs instead.
    fn initial_metric(&self, x: &[f64]) -> Metric {
        let _ = x;
        Metric::Identity
    }
}

impl SmoothFn for SmoothObjective {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, grad).value
    }

    fn initial_metric(&self, x: &[f64]) -> Metric {
        Metric::Diagonal(self.curvature_at(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: Vec<f64>,
    /// Final objective (composite when an L1 term is present).
    pub value: f64,
    pub iters: usize,
    pub status: InnerStatus,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub penalty: PenaltyParams,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub rho_max: f64,
    pub h_tol: f64,
    pub max_outer_iters: usize,
    pub inner_max_iters: usize,
    /// Number of stored curvature pairs.
    pub lbfgs_memory: usize,
    /// ρ grows unless max h shrinks below this fraction of its previous value.
    pub progress_factor: f64,
    /// Magnitude threshold used when binarizing the fitted weights.
    pub threshold_omega: f64,
    /// Inner stopping tolerance on the (sub)gradient infinity norm.
    pub inner_grad_tol: f64,
    /// Inner stopping tolerance on the relative objective decrease.
    pub inner_ftol: f64,
    /// Coordinate-descent passes per proximal direction.
    pub cd_sweeps: usize,
    /// Restrict coordinate descent to the subgradient active set.
    pub active_set: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            penalty: PenaltyParams::default(),
            rho_init: 1.0,
            rho_mult: 10.0,
            rho_max: 1e16,
            h_tol: 1e-8,
            max_outer_iters: 100,
            inner_max_iters: 200,
            lbfgs_memory: 10,
            progress_factor: 0.25,
            threshold_omega: 0.3,
            inner_grad_tol: 1e-6,
            inner_ftol: 1e-10,
            cd_sweeps: 10,
            active_set: true,
        }
    }
}

impl SolverConfig {
    pub fn with_penalty(lambda1: f64, lambda2: f64) -> Self {
        Self {
            penalty: PenaltyParams::new(lambda1, lambda2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        let positive = [
            ("rho_init", self.rho_init),
            ("rho_max", self.rho_max),
            ("h_tol", self.h_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite"));
            }
        }
        if !(self.rho_mult > 1.0) {
            return invalid("rho_mult must exceed 1");
        }
        if self.rho_init > self.rho_max {
            return invalid("rho_init must not exceed rho_max");
        }
        if !(self.progress_factor > 0.0 && self.progress_factor < 1.0) {
            return invalid("progress_factor must lie in (0, 1)");
        }
        if self.max_outer_iters == 0 || self.inner_max_iters == 0 || self.lbfgs_memory == 0 {
            return invalid("iteration limits and memory must be positive");
        }
        if !(self.threshold_omega >= 0.0) {
            return invalid("threshold_omega must be nonnegative");
        }
        Ok(())
    }
}

/// One inner solve of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub max_h: f64,
    pub rho: f64,
    pub inner_iters: usize,
    pub inner_status: InnerStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub w: GroupedWeights,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub outer_iter: usize,
    pub h_values: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    /// `max h <= h_tol` at the returned iterate.
    pub converged: bool,
    /// Set when ρ hit `rho_max` (or outer iterations ran out) first.
    pub diagnostic: Option<String>,
}

impl SolverState {
    pub fn max_h(&self) -> f64 {
        self.h_values.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the trace as one JSON object per line.
    pub fn write_trace<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.trace {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn inner_solve(obj: &SmoothObjective, w0: &[f64], cfg: &SolverConfig) -> InnerResult {
    if cfg.penalty.lambda1 == 0.0 {
        lbfgs::minimize(
            obj,
            w0,
            cfg.lbfgs_memory,
            cfg.inner_max_iters,
            cfg.inner_grad_tol,
            cfg.inner_ftol,
        )
    } else {
        let params = pqn::PqnParams {
            lambda1: cfg.penalty.lambda1,
            memory: cfg.lbfgs_memory,
            max_iters: cfg.inner_max_iters,
            grad_tol: cfg.inner_grad_tol,
            ftol: cfg.inner_ftol,
            sweeps: cfg.cd_sweeps,
            use_active_set: cfg.active_set,
            ..pqn::PqnParams::default()
        };
        pqn::minimize(obj, w0, &params)
    }
}

/// Minimizes the smooth augmented Lagrangian (no L1 term) from the current
/// iterate with L-BFGS.
pub fn inner_minimize_smooth(
    state: &SolverState,
    data: &GroupedDataset,
    cfg: &SolverConfig,
) -> Result<(GroupedWeights, InnerResult)> {
    if cfg.penalty.lambda1 != 0.0 {
        return invalid("inner_minimize_smooth requires lambda1 = 0");
    }
    let obj = SmoothObjective::from_dataset(data, &cfg.penalty, state.rho, state.alphas.clone());
    let packing = obj.packing();
    let mats: Vec<_> = state
        .w
        .mats()
        .iter()
        .map(|m| m.as_matrix().clone())
        .collect();
    let res = inner_solve(&obj, &packing.pack(&mats), cfg);
    Ok((packing.to_weights(&res.x), res))
}

/// Jointly estimates K weighted DAGs.
///
/// The fit starts from `W = 0` and is fully deterministic; `seed` is recorded
/// for callers that need a reproducibility key but does not alter the result.
pub fn fit_joint(
    data: &GroupedDataset,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(GroupedWeights, SolverState)> {
    let _ = seed;
    cfg.validate()?;
    let k = data.num_groups();
    let d = data.dim();
    let moments = data.second_moments();
    let mut rho = cfg.rho_init;
    let mut alphas = vec![0.0; k];
    let mut obj = SmoothObjective::new(moments, &cfg.penalty, rho, alphas.clone());
    let packing = obj.packing();
    let mut w = vec![0.0; packing.len()];
    let mut h_values = vec![0.0; k];
    let mut prev_max_h = f64::INFINITY;
    let mut trace = Vec::new();
    let mut outer = 0;
    let mut diagnostic = None;

    if d < 2 {
        let state = SolverState {
            w: GroupedWeights::zeros(k, d),
            alphas,
            rho,
            outer_iter: 0,
            h_values,
            trace,
            converged: true,
            diagnostic,
        };
        return Ok((state.w.clone(), state));
    }

    while outer < cfg.max_outer_iters {
        outer += 1;
        let (w_new, hs) = loop {
            obj.rho = rho;
            obj.alphas.clone_from(&alphas);
            let res = inner_solve(&obj, &w, cfg);
            if !res.value.is_finite() {
                trace.push(TraceRecord {
                    iteration: outer,
                    objective: res.value,
                    max_h: f64::NAN,
                    rho,
                    inner_iters: res.iters,
                    inner_status: res.status,
                });
                return Err(Error::Divergence {
                    reason: format!("non-finite objective at rho = {rho:e}"),
                    trace,
                });
            }
            let hs: Vec<f64> = packing
                .unpack(&res.x)
                .iter()
                .map(|m| acyclicity_value(m).unwrap_or(f64::INFINITY))
                .collect();
            let max_h = hs.iter().copied().fold(0.0, f64::max);
            trace.push(TraceRecord {
                iteration: outer,
                objective: res.value,
                max_h,
                rho,
                inner_iters: res.iters,
                inner_status: res.status,
            });
            if max_h > cfg.progress_factor * prev_max_h && rho < cfg.rho_max {
                rho = (rho * cfg.rho_mult).min(cfg.rho_max);
                continue;
            }
            break (res.x, hs);
        };
        w = w_new;
        h_values = hs;
        let max_h = h_values.iter().copied().fold(0.0, f64::max);
        if !max_h.is_finite() {
            return Err(Error::Divergence {
                reason: "acyclicity value overflowed".into(),
                trace,
            });
        }
        prev_max_h = max_h;
        for (a, h) in alphas.iter_mut().zip(&h_values) {
            *a += rho * h;
        }
        if max_h <= cfg.h_tol {
            break;
        }
        if rho >= cfg.rho_max {
            diagnostic = Some(format!(
                "rho reached rho_max = {:e} with max h = {max_h:e}",
                cfg.rho_max
            ));
            break;
        }
    }
    let max_h = h_values.iter().copied().fold(0.0, f64::max);
    let converged = max_h <= cfg.h_tol;
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!(
            "outer iteration limit {} reached with max h = {max_h:e}",
            cfg.max_outer_iters
        ));
    }
    let weights = packing.to_weights(&w);
    let state = SolverState {
        w: weights.clone(),
        alphas,
        rho,
        outer_iter: outer,
        h_values,
        trace,
        converged,
        diagnostic,
    };
    Ok((weights, state))
}
