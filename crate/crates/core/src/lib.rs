//! Joint estimation of several directed acyclic graphs from grouped
//! observations under a linear structural equation model.
//!
//! The acyclicity of each weight matrix is enforced through the smooth
//! function `h(W) = tr(exp(W ∘ W)) - d`, the groups are tied together by an
//! L1 + group-L2 penalty, and the constrained problem is solved with an
//! augmented Lagrangian whose subproblems use L-BFGS or proximal quasi-Newton.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constraint;
pub mod error;
pub mod eval_metrics;
pub mod extraction;
pub mod group_compare;
pub mod model_select;
pub mod netmeasures;
pub mod objective;
pub mod solver;
pub mod synthetic;

pub use constraint::{acyclicity_gradient, acyclicity_value, matrix_exponential, WeightMatrix};
pub use error::{Error, Result};
pub use eval_metrics::{evaluate, EvalReport};
pub use extraction::{is_acyclic, threshold_to_dag, BinaryDigraph, Extraction, RemovedEdge};
pub use group_compare::{fdr_correct, permutation_test, CompareReport, PermutationOptions};
pub use model_select::{cross_validate, CvResult};
pub use netmeasures::{find_hubs, measure_report, HubReport, MeasureReport};
pub use objective::{
    group_penalty, sem_loss, sem_loss_gradient, smooth_objective, GroupedDataset, GroupedWeights,
    PenaltyParams,
};
pub use solver::{fit_joint, inner_minimize_smooth, SolverConfig, SolverState, TraceRecord};
pub use synthetic::{simulate, SimSpec, Simulation};
