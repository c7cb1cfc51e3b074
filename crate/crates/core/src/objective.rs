//! Joint least-squares SEM score, the sparsity/group-similarity penalty, and
//! the smooth part of the augmented Lagrangian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraint::{acyclicity_value_and_gradient, matrix_exponential, WeightMatrix};
use crate::error::{invalid, Result};

/// K observation matrices (`n_k x d`) over a shared, ordered variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<DMatrix<f64>>,
    variable_names: Vec<String>,
    group_names: Vec<String>,
}

impl GroupedDataset {
    pub fn new(
        groups: Vec<DMatrix<f64>>,
        variable_names: Vec<String>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        if groups.is_empty() {
            return invalid("dataset needs at least one group");
        }
        let d = groups[0].ncols();
        if d == 0 {
            return invalid("dataset needs at least one variable");
        }
        for (k, x) in groups.iter().enumerate() {
            if x.ncols() != d {
                return invalid(format!("group {k} has {} columns, expected {d}", x.ncols()));
            }
            if x.nrows() == 0 {
                return invalid(format!("group {k} has no rows"));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return invalid(format!("group {k} contains non-finite values"));
            }
        }
        if variable_names.len() != d {
            return invalid(format!(
                "{} variable names for {d} columns",
                variable_names.len()
            ));
        }
        if group_names.len() != groups.len() {
            return invalid(format!(
                "{} group names for {} groups",
                group_names.len(),
                groups.len()
            ));
        }
        Ok(Self {
            groups,
            variable_names,
            group_names,
        })
    }

    /// Dataset with default labels `x0..` and `g0..`.
    pub fn unlabeled(groups: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = groups.first().map_or(0, |g| g.ncols());
        let vars = (0..d).map(|i| format!("x{i}")).collect();
        let names = (0..groups.len()).map(|k| format!("g{k}")).collect();
        Self::new(groups, vars, names)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups[0].ncols()
    }

    pub fn group(&self, k: usize) -> &DMatrix<f64> {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[DMatrix<f64>] {
        &self.groups
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// Copy with every column of every group shifted to mean zero.
    pub fn centered(&self) -> Self {
        let groups = self.groups.iter().map(center_columns).collect();
        Self {
            groups,
            ..self.clone()
        }
    }

    /// Copy with every column scaled to unit (population) variance. Columns
    /// with zero variance are left untouched.
    pub fn standardized(&self) -> Self {
        let groups = self
            .groups
            .iter()
            .map(|x| {
                let mut x = x.clone();
                let n = x.nrows() as f64;
                for mut col in x.column_iter_mut() {
                    let mean = col.sum() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    if var > 0.0 {
                        col /= var.sqrt();
                    }
                }
                x
            })
            .collect();
        Self {
            groups,
            ..self.clone()
        }
    }

    /// Same labels, new data. Used for folds and permutations.
    pub fn with_groups(&self, groups: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(
            groups,
            self.variable_names.clone(),
            self.group_names.clone(),
        )
    }

    /// `X_kᵀ X_k / n_k` for every group.
    pub fn second_moments(&self) -> Vec<DMatrix<f64>> {
        self.groups
            .iter()
            .map(|x| x.tr_mul(x) / x.nrows() as f64)
            .collect()
    }
}

pub(crate) fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = x.clone();
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    x
}

/// The K weighted adjacency matrices being estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedWeights {
    mats: Vec<WeightMatrix>,
}

impl GroupedWeights {
    pub fn new(mats: Vec<WeightMatrix>) -> Result<Self> {
        if mats.is_empty() {
            return invalid("need at least one weight matrix");
        }
        let d = mats[0].dim();
        if mats.iter().any(|m| m.dim() != d) {
            return invalid("weight matrices must share the same dimension");
        }
        Ok(Self { mats })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            mats: vec![WeightMatrix::zeros(d); k],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn mats(&self) -> &[WeightMatrix] {
        &self.mats
    }

    pub fn get(&self, k: usize) -> &WeightMatrix {
        &self.mats[k]
    }

    pub fn into_mats(self) -> Vec<WeightMatrix> {
        self.mats
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    /// Sparsity weight on every off-diagonal entry.
    pub lambda1: f64,
    /// Weight on the per-edge L2 norm across groups.
    pub lambda2: f64,
    /// Smoothing added under the square root of the group term.
    pub group_smoothing_eps: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.0,
            group_smoothing_eps: 1e-8,
        }
    }
}

impl PenaltyParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return invalid("lambda1 must be finite and nonnegative");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return invalid("lambda2 must be finite and nonnegative");
        }
        if !(self.group_smoothing_eps > 0.0) {
            return invalid("group_smoothing_eps must be positive");
        }
        Ok(())
    }
}

fn check_shapes(w: &GroupedWeights, d: &GroupedDataset) -> Result<()> {
    if w.num_groups() != d.num_groups() {
        return invalid(format!(
            "{} weight matrices for {} groups",
            w.num_groups(),
            d.num_groups()
        ));
    }
    if w.dim() != d.dim() {
        return invalid(format!(
            "weights are {0}x{0} but data has {1} columns",
            w.dim(),
            d.dim()
        ));
    }
    Ok(())
}

/// `Σ_k ‖X_k − X_k W_k‖²_F / (2 n_k)`.
pub fn sem_loss(w: &GroupedWeights, data: &GroupedDataset) -> Result<f64> {
    check_shapes(w, data)?;
    let mut total = 0.0;
    for (x, wk) in data.groups().iter().zip(w.mats()) {
        let resid = x - x * wk.as_matrix();
        total += resid.norm_squared() / (2.0 * x.nrows() as f64);
    }
    Ok(total)
}

/// Gradient of [`sem_loss`]: `-(1/n_k) X_kᵀ (X_k − X_k W_k)` per group.
pub fn sem_loss_gradient(w: &GroupedWeights, data: &GroupedDataset) -> Result<Vec<DMatrix<f64>>> {
    check_shapes(w, data)?;
    Ok(data
        .groups()
        .iter()
        .zip(w.mats())
        .map(|(x, wk)| {
            let resid = x - x * wk.as_matrix();
            -(x.tr_mul(&resid)) / x.nrows() as f64
        })
        .collect())
}

/// Exact (non-smoothed) penalty:
/// `λ1 Σ_k Σ_{i≠j} |W_k(i,j)| + λ2 Σ_{i≠j} sqrt(Σ_k W_k(i,j)²)`.
pub fn group_penalty(w: &GroupedWeights, p: &PenaltyParams) -> Result<f64> {
    p.validate()?;
    let d = w.dim();
    let mut l1 = 0.0;
    let mut group = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let mut sq = 0.0;
            for m in w.mats() {
                let v = m[(i, j)];
                l1 += v.abs();
                sq += v * v;
            }
            group += sq.sqrt();
        }
    }
    Ok(p.lambda1 * l1 + p.lambda2 * group)
}

/// Maps the off-diagonal entries of K `d x d` matrices to one flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packing {
    pub k: usize,
    pub d: usize,
}

impl Packing {
    pub fn new(k: usize, d: usize) -> Self {
        Self { k, d }
    }

    pub fn per_group(&self) -> usize {
        self.d * self.d.saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.k * self.per_group()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        let col = if j < i { j } else { j - 1 };
        k * self.per_group() + i * (self.d - 1) + col
    }

    /// Inverse of [`Packing::index`].
    pub fn position(&self, idx: usize) -> (usize, usize, usize) {
        let per = self.per_group();
        let k = idx / per;
        let rem = idx % per;
        let i = rem / (self.d - 1);
        let col = rem % (self.d - 1);
        let j = if col < i { col } else { col + 1 };
        (k, i, j)
    }

    pub fn pack(&self, mats: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, m) in mats.iter().enumerate() {
            for i in 0..self.d {
                for j in 0..self.d {
                    if i != j {
                        out[self.index(k, i, j)] = m[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn unpack(&self, flat: &[f64]) -> Vec<DMatrix<f64>> {
        (0..self.k)
            .map(|k| {
                DMatrix::from_fn(self.d, self.d, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        flat[self.index(k, i, j)]
                    }
                })
            })
            .collect()
    }

    pub fn to_weights(&self, flat: &[f64]) -> GroupedWeights {
        let mats = self
            .unpack(flat)
            .into_iter()
            .map(|m| WeightMatrix::new(m).expect("unpacked matrices have zero diagonal"))
            .collect();
        GroupedWeights::new(mats).expect("uniform dimension")
    }
}

/// Smooth part of the augmented Lagrangian over the packed variable:
///
/// `Σ_k ½ tr((I−W_k)ᵀ S_k (I−W_k)) + (ρ/2) Σ_k h_k² + Σ_k α_k h_k
///  + λ2 Σ_{i≠j} sqrt(Σ_k W_k(i,j)² + ε)`
///
/// where `S_k = X_kᵀX_k / n_k`. The L1 term is left to the proximal step.
#[derive(Debug, Clone)]
pub struct SmoothObjective {
    moments: Vec<DMatrix<f64>>,
    packing: Packing,
    pub lambda2: f64,
    pub eps: f64,
    pub rho: f64,
    pub alphas: Vec<f64>,
}

/// Per-evaluation breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEval {
    pub value: f64,
    pub loss: f64,
    pub h: Vec<f64>,
}

impl SmoothObjective {
    pub fn new(
        moments: Vec<DMatrix<f64>>,
        penalty: &PenaltyParams,
        rho: f64,
        alphas: Vec<f64>,
    ) -> Self {
        let d = moments[0].nrows();
        let k = moments.len();
        Self {
            packing: Packing::new(k, d),
            moments,
            lambda2: penalty.lambda2,
            eps: penalty.group_smoothing_eps,
            rho,
            alphas,
        }
    }

    pub fn from_dataset(
        data: &GroupedDataset,
        penalty: &PenaltyParams,
        rho: f64,
        alphas: Vec<f64>,
    ) -> Self {
        Self::new(data.second_moments(), penalty, rho, alphas)
    }

    pub fn packing(&self) -> Packing {
        self.packing
    }

    /// Evaluates the value and writes the gradient into `grad`. A non-finite
    /// value is returned as-is; callers decide how to treat overflow.
    /// Diagonal of the loss Hessian: `S_k[i, i]` for coordinate `(k, i, j)`,
    /// floored so every entry is positive.
    pub fn loss_curvature(&self) -> Vec<f64> {
        let p = self.packing;
        let top = self
            .moments
            .iter()
            .flat_map(|s| s.diagonal().iter().copied().collect::<Vec<_>>())
            .fold(0.0, f64::max);
        let floor = (top * 1e-8).max(f64::MIN_POSITIVE);
        (0..p.len())
            .map(|idx| {
                let (k, i, _) = p.position(idx);
                self.moments[k][(i, i)].max(floor)
            })
            .collect()
    }

    /// Loss curvature plus a diagonal estimate of the penalty curvature at `w`.
    pub fn curvature_at(&self, w: &[f64]) -> Vec<f64> {
        let mut c = self.loss_curvature();
        for (ci, e) in c.iter_mut().zip(self.penalty_curvature_at(w)) {
            *ci += e;
        }
        c
    }

    /// Nonnegative diagonal estimate of the curvature of the acyclicity and
    /// group terms at `w`.
    pub fn penalty_curvature_at(&self, w: &[f64]) -> Vec<f64> {
        let p = self.packing;
        let mut c = vec![0.0; p.len()];
        let mats = p.unpack(w);
        for (k, wk) in mats.iter().enumerate() {
            let Ok(e) = matrix_exponential(&wk.component_mul(wk)) else {
                continue;
            };
            let h = e.trace() - p.d as f64;
            let coef = self.rho * h + self.alphas[k];
            for i in 0..p.d {
                for j in 0..p.d {
                    if i == j {
                        continue;
                    }
                    let idx = p.index(k, i, j);
                    let gh = 2.0 * wk[(i, j)] * e[(j, i)];
                    let extra = (2.0 * coef * e[(j, i)]).max(0.0) + self.rho * gh * gh;
                    if extra.is_finite() {
                        c[idx] += extra;
                    }
                }
            }
        }
        if self.lambda2 > 0.0 {
            let per = p.per_group();
            for e in 0..per {
                let sq: f64 = (0..p.k).map(|k| w[k * per + e].powi(2)).sum();
                let norm = (sq + self.eps).sqrt();
                for k in 0..p.k {
                    let wk = w[k * per + e];
                    c[k * per + e] += self.lambda2 * (sq - wk * wk + self.eps) / norm.powi(3);
                }
            }
        }
        c
    }

    pub fn eval(&self, w: &[f64], grad: &mut [f64]) -> SmoothEval {
        let p = self.packing;
        let d = p.d;
        let mats = p.unpack(w);
        let ident = DMatrix::<f64>::identity(d, d);
        let mut loss = 0.0;
        let mut value = 0.0;
        let mut hs = Vec::with_capacity(p.k);
        let mut grad_mats = Vec::with_capacity(p.k);
        for (k, wk) in mats.iter().enumerate() {
            let r = &ident - wk;
            let sr = &self.moments[k] * &r;
            let lk = 0.5 * r.component_mul(&sr).sum();
            let mut gk = -sr;
            let (h, gh) = match acyclicity_value_and_gradient(wk) {
                Ok(v) => v,
                Err(_) => (f64::INFINITY, DMatrix::from_element(d, d, f64::NAN)),
            };
            let coef = self.rho * h + self.alphas[k];
            gk += gh * coef;
            loss += lk;
            value += lk + 0.5 * self.rho * h * h + self.alphas[k] * h;
            hs.push(h);
            grad_mats.push(gk);
        }
        for idx in 0..p.len() {
            let (k, i, j) = p.position(idx);
            grad[idx] = grad_mats[k][(i, j)];
        }
        if self.lambda2 > 0.0 {
            let per = p.per_group();
            let mut group = 0.0;
            for e in 0..per {
                let sq: f64 = (0..p.k).map(|k| w[k * per + e].powi(2)).sum();
                let norm = (sq + self.eps).sqrt();
                group += norm;
                for k in 0..p.k {
                    grad[k * per + e] += self.lambda2 * w[k * per + e] / norm;
                }
            }
            value += self.lambda2 * group;
        }
        SmoothEval { value, loss, h: hs }
    }
}

/// Value and gradient of the smooth augmented-Lagrangian part at `w`.
pub fn smooth_objective(
    w: &GroupedWeights,
    data: &GroupedDataset,
    p: &PenaltyParams,
    rho: f64,
    alphas: &[f64],
) -> Result<(f64, Vec<DMatrix<f64>>)> {
    check_shapes(w, data)?;
    p.validate()?;
    if !(rho >= 0.0) {
        return invalid("rho must be nonnegative");
    }
    if alphas.len() != data.num_groups() {
        return invalid(format!(
            "{} multipliers for {} groups",
            alphas.len(),
            data.num_groups()
        ));
    }
    let obj = SmoothObjective::from_dataset(data, p, rho, alphas.to_vec());
    let packing = obj.packing();
    let mats: Vec<_> = w.mats().iter().map(|m| m.as_matrix().clone()).collect();
    let flat = packing.pack(&mats);
    let mut grad = vec![0.0; flat.len()];
    let eval = obj.eval(&flat, &mut grad);
    Ok((eval.value, packing.unpack(&grad)))
}
