//! Random ground-truth DAG families and linear-SEM sampling.
//!
//! A backbone graph `G0` is drawn (Erdős–Rényi or Barabási–Albert), each of
//! the K group graphs adds its own extra edges on top of it, edges get
//! uniform weights, and observations follow `x_j = Σ_i W_ij x_i + ε_j`.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gumbel, Normal};
use serde::{Deserialize, Serialize};

use crate::constraint::WeightMatrix;
use crate::error::{invalid, Result};
use crate::extraction::{is_acyclic, BinaryDigraph};

/// Euler–Mascheroni constant; mean of the standard Gumbel distribution.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphModel {
    #[serde(rename = "ER")]
    ErdosRenyi,
    #[serde(rename = "SF")]
    ScaleFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSign {
    PositiveOnly,
    RandomSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Exponential,
    Gumbel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub d: usize,
    /// Samples per group.
    pub n: usize,
    pub graph_model: GraphModel,
    /// Mean total (in + out) degree of the backbone.
    pub mean_degree: f64,
    /// Extra edges per group graph; `None` means 20% of the backbone edges.
    pub extra_edges: Option<usize>,
    pub weight_range: (f64, f64),
    pub weight_sign: WeightSign,
    /// Backbone edges carry the same weight in every group.
    pub shared_backbone_weights: bool,
    pub noise: NoiseKind,
    pub noise_scale: f64,
    /// Number of group graphs derived from the backbone.
    pub k: usize,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            d: 20,
            n: 300,
            graph_model: GraphModel::ErdosRenyi,
            mean_degree: 4.0,
            extra_edges: None,
            weight_range: (0.5, 2.0),
            weight_sign: WeightSign::RandomSign,
            shared_backbone_weights: true,
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
            k: 2,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return invalid("d must be at least 2");
        }
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.k == 0 {
            return invalid("need at least one group");
        }
        if !(self.mean_degree >= 0.0 && self.mean_degree.is_finite()) {
            return invalid("mean_degree must be finite and nonnegative");
        }
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return invalid("weight_range must satisfy 0 < low <= high");
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return invalid("noise_scale must be positive");
        }
        Ok(())
    }

    /// Independent RNG stream `stream` under this spec's seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

const STREAM_BACKBONE: u64 = 0;
const STREAM_DERIVED: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_DATA: u64 = 16;

/// Random backbone DAG. Node labels are hidden behind a random permutation
/// so index order carries no causal information.
pub fn generate_backbone<R: Rng>(spec: &SimSpec, rng: &mut R) -> Result<BinaryDigraph> {
    spec.validate()?;
    let d = spec.d;
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let mut g = BinaryDigraph::empty(d);
    match spec.graph_model {
        GraphModel::ErdosRenyi => {
            let p = (spec.mean_degree / (d as f64 - 1.0)).min(1.0);
            for a in 0..d {
                for b in a + 1..d {
                    if rng.random::<f64>() < p {
                        g.add_edge(perm[a], perm[b])?;
                    }
                }
            }
        }
        GraphModel::ScaleFree => {
            let m = (spec.mean_degree / 2.0).round() as usize;
            if m > 0 {
                let mut degree = vec![0usize; d];
                for t in 1..d {
                    let targets: Vec<usize> = if t <= m {
                        (0..t).collect()
                    } else {
                        preferential_targets(&degree[..t], m, rng)
                    };
                    for s in targets {
                        // earlier node is the parent
                        g.add_edge(perm[s], perm[t])?;
                        degree[s] += 1;
                        degree[t] += 1;
                    }
                }
            }
        }
    }
    Ok(g)
}

/// `m` distinct indices drawn proportionally to `degree` (uniform if all zero).
fn preferential_targets<R: Rng>(degree: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    let mut weights: Vec<f64> = degree.iter().map(|&k| k as f64).collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m.min(degree.len()) {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        // guard against landing on a zero-weight tail through rounding
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        chosen.push(pick);
        weights[pick] = 0.0;
    }
    chosen.sort_unstable();
    chosen
}

/// Number of extra edges per group implied by `spec` for backbone `g0`.
pub fn extra_edge_count(g0: &BinaryDigraph, spec: &SimSpec) -> usize {
    spec.extra_edges
        .unwrap_or_else(|| (0.2 * g0.num_edges() as f64).round() as usize)
}

/// K group graphs, each the backbone plus its own extra edges drawn
/// uniformly from absent pairs that respect a topological order of `g0`.
pub fn derive_group_graphs<R: Rng>(
    g0: &BinaryDigraph,
    spec: &SimSpec,
    rng: &mut R,
) -> Result<Vec<BinaryDigraph>> {
    let Some(order) = is_acyclic(g0) else {
        return invalid("backbone graph is not acyclic");
    };
    let d = g0.num_nodes();
    let mut candidates = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let (u, v) = (order[a], order[b]);
            if !g0.has_edge(u, v) {
                candidates.push((u, v));
            }
        }
    }
    let extra = extra_edge_count(g0, spec);
    if extra > candidates.len() {
        return invalid(format!(
            "requested {extra} extra edges but only {} slots are available",
            candidates.len()
        ));
    }
    let mut out = Vec::with_capacity(spec.k);
    for _ in 0..spec.k {
        let mut g = g0.clone();
        for idx in index::sample(rng, candidates.len(), extra) {
            let (u, v) = candidates[idx];
            g.add_edge(u, v)?;
        }
        out.push(g);
    }
    Ok(out)
}

fn draw_weight<R: Rng>(spec: &SimSpec, rng: &mut R) -> f64 {
    let (lo, hi) = spec.weight_range;
    let mag = if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    };
    match spec.weight_sign {
        WeightSign::PositiveOnly => mag,
        WeightSign::RandomSign => {
            if rng.random::<bool>() {
                -mag
            } else {
                mag
            }
        }
    }
}

/// Uniform weights on the edges of `g`; zero elsewhere.
pub fn assign_weights<R: Rng>(
    g: &BinaryDigraph,
    spec: &SimSpec,
    rng: &mut R,
) -> Result<WeightMatrix> {
    let d = g.num_nodes();
    let mut m = DMatrix::zeros(d, d);
    for (i, j) in g.edges() {
        m[(i, j)] = draw_weight(spec, rng);
    }
    WeightMatrix::new(m)
}

/// `n` rows of `x = Wᵀx + ε` with mean-zero noise of the given kind.
pub fn sample_sem<R: Rng>(
    w: &WeightMatrix,
    n: usize,
    noise: NoiseKind,
    noise_scale: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(noise_scale > 0.0) {
        return invalid("noise_scale must be positive");
    }
    let d = w.dim();
    let support = BinaryDigraph::from_edges(
        d,
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && w[(i, j)] != 0.0),
    )?;
    let Some(order) = is_acyclic(&support) else {
        return invalid("weight matrix support contains a cycle");
    };
    let parents: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|j| {
            (0..d)
                .filter(|&i| w[(i, j)] != 0.0)
                .map(|i| (i, w[(i, j)]))
                .collect()
        })
        .collect();
    let noise_fn: Box<dyn Fn(&mut R) -> f64> = match noise {
        NoiseKind::Gaussian => {
            let dist = Normal::new(0.0, noise_scale).expect("positive scale");
            Box::new(move |r: &mut R| dist.sample(r))
        }
        NoiseKind::Exponential => {
            let dist = Exp::new(1.0 / noise_scale).expect("positive rate");
            Box::new(move |r: &mut R| dist.sample(r) - noise_scale)
        }
        NoiseKind::Gumbel => {
            let dist =
                Gumbel::new(-EULER_GAMMA * noise_scale, noise_scale).expect("positive scale");
            Box::new(move |r: &mut R| dist.sample(r))
        }
    };
    let mut x = DMatrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            x[(r, c)] = noise_fn(rng);
        }
        for &j in &order {
            let mut acc = x[(r, j)];
            for &(i, wij) in &parents[j] {
                acc += wij * x[(r, i)];
            }
            x[(r, j)] = acc;
        }
    }
    Ok(x)
}

/// Everything drawn for one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spec: SimSpec,
    pub backbone: BinaryDigraph,
    pub graphs: Vec<BinaryDigraph>,
    pub weights: Vec<WeightMatrix>,
    pub data: Vec<DMatrix<f64>>,
}

/// Full pipeline; `spec.seed` determines every output.
pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let backbone = generate_backbone(spec, &mut spec.rng(STREAM_BACKBONE))?;
    let graphs = derive_group_graphs(&backbone, spec, &mut spec.rng(STREAM_DERIVED))?;
    let mut wrng = spec.rng(STREAM_WEIGHTS);
    let shared = assign_weights(&backbone, spec, &mut wrng)?;
    let mut weights = Vec::with_capacity(spec.k);
    for g in &graphs {
        let own = assign_weights(g, spec, &mut wrng)?;
        if spec.shared_backbone_weights {
            let mut m = own.into_inner();
            for (i, j) in backbone.edges() {
                m[(i, j)] = shared[(i, j)];
            }
            weights.push(WeightMatrix::new(m)?);
        } else {
            weights.push(own);
        }
    }
    let data = weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            sample_sem(
                w,
                spec.n,
                spec.noise,
                spec.noise_scale,
                &mut spec.rng(STREAM_DATA + k as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        spec: spec.clone(),
        backbone,
        graphs,
        weights,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(model: GraphModel, d: usize, mean_degree: f64, seed: u64) -> SimSpec {
        SimSpec {
            d,
            graph_model: model,
            mean_degree,
            seed,
            ..SimSpec::default()
        }
    }

    #[test]
    fn zero_degree_gives_empty_graph() {
        for model in [GraphModel::ErdosRenyi, GraphModel::ScaleFree] {
            let s = spec(model, 10, 0.0, 1);
            assert_eq!(generate_backbone(&s, &mut s.rng(0)).unwrap().num_edges(), 0);
        }
    }

    #[test]
    fn er_edge_count_matches_binomial_expectation() {
        // p = 4/99 over 4950 pairs: mean 200, sd ≈ 13.86
        let p: f64 = 4.0 / 99.0;
        let sd = (4950.0 * p * (1.0 - p)).sqrt();
        let counts: Vec<usize> = (0..100)
            .map(|seed| {
                let s = spec(GraphModel::ErdosRenyi, 100, 4.0, seed);
                generate_backbone(&s, &mut s.rng(0)).unwrap().num_edges()
            })
            .collect();
        assert!((counts[0] as f64 - 200.0).abs() <= 3.0 * sd);
        // a 3-sd excursion has probability ~0.27% per seed
        let inside = counts
            .iter()
            .filter(|&&c| (c as f64 - 200.0).abs() <= 3.0 * sd)
            .count();
        assert!(inside >= 97, "{inside} of 100 within 3 sd");
        let mean = counts.iter().sum::<usize>() as f64 / 100.0;
        assert!((mean - 200.0).abs() <= 4.0, "mean {mean}");
    }

    #[test]
    fn backbones_are_acyclic() {
        for seed in 0..30 {
            for model in [GraphModel::ErdosRenyi, GraphModel::ScaleFree] {
                let s = spec(model, 25, 4.0, seed);
                let g = generate_backbone(&s, &mut s.rng(0)).unwrap();
                assert!(is_acyclic(&g).is_some());
            }
        }
    }

    #[test]
    fn scale_free_attachment_count() {
        let s = spec(GraphModel::ScaleFree, 30, 4.0, 3);
        let g = generate_backbone(&s, &mut s.rng(0)).unwrap();
        // node t attaches to min(2, t) earlier nodes: 1 + 2 * 28
        assert_eq!(g.num_edges(), 57);
    }

    #[test]
    fn derived_graphs_contain_backbone() {
        let s = SimSpec {
            extra_edges: Some(5),
            k: 3,
            ..spec(GraphModel::ErdosRenyi, 15, 3.0, 4)
        };
        let g0 = generate_backbone(&s, &mut s.rng(0)).unwrap();
        let gs = derive_group_graphs(&g0, &s, &mut s.rng(1)).unwrap();
        assert_eq!(gs.len(), 3);
        for g in &gs {
            assert_eq!(g.num_edges(), g0.num_edges() + 5);
            assert!(g0.edges().all(|(i, j)| g.has_edge(i, j)));
            assert!(is_acyclic(g).is_some());
        }
        let shared = gs[0].edges().filter(|&(i, j)| gs[1].has_edge(i, j)).count();
        assert!(shared >= g0.num_edges());

        let none = SimSpec {
            extra_edges: Some(0),
            ..s.clone()
        };
        for g in derive_group_graphs(&g0, &none, &mut s.rng(1)).unwrap() {
            assert_eq!(g, g0);
        }
        let too_many = SimSpec {
            extra_edges: Some(1000),
            ..s
        };
        assert!(derive_group_graphs(&g0, &too_many, &mut too_many.rng(1)).is_err());
    }

    #[test]
    fn weights_respect_range() {
        let s = spec(GraphModel::ErdosRenyi, 10, 3.0, 5);
        let empty = BinaryDigraph::empty(10);
        assert!(assign_weights(&empty, &s, &mut s.rng(2))
            .unwrap()
            .as_matrix()
            .iter()
            .all(|&v| v == 0.0));

        let complete = BinaryDigraph::from_edges(
            100,
            (0..100).flat_map(|i| (i + 1..100).map(move |j| (i, j))),
        )
        .unwrap();
        let w = assign_weights(&complete, &s, &mut s.rng(2)).unwrap();
        let mags: Vec<f64> = w
            .as_matrix()
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .collect();
        assert_eq!(mags.len(), 4950);
        assert!(mags.iter().all(|&m| (0.5..=2.0).contains(&m)));
        // 4950 draws here plus a second batch to pass 10⁴
        let w2 = assign_weights(&complete, &s, &mut s.rng(3)).unwrap();
        let all: Vec<f64> = mags
            .into_iter()
            .chain(
                w2.as_matrix()
                    .iter()
                    .filter(|v| **v != 0.0)
                    .map(|v| v.abs()),
            )
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!((mean - 1.25).abs() <= 0.025, "mean {mean}");
        assert!(w.as_matrix().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn pure_noise_moments() {
        let w = WeightMatrix::zeros(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [
            NoiseKind::Gaussian,
            NoiseKind::Exponential,
            NoiseKind::Gumbel,
        ] {
            let x = sample_sem(&w, 100_000, kind, 1.5, &mut rng).unwrap();
            for c in 0..3 {
                let col = x.column(c);
                let mean = col.mean();
                assert!(mean.abs() < 0.03, "{kind:?} mean {mean}");
                if kind == NoiseKind::Gaussian {
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1e5;
                    assert!((var / 2.25 - 1.0).abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn regression_coefficient_identity() {
        let w = WeightMatrix::from_row_slice(2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        let x = sample_sem(
            &w,
            100_000,
            NoiseKind::Gaussian,
            1.0,
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        let x = crate::objective::center_columns(&x);
        let slope = x.column(0).dot(&x.column(1)) / x.column(0).dot(&x.column(0));
        assert!((slope / 2.0 - 1.0).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn cyclic_weights_rejected() {
        let w = WeightMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(sample_sem(
            &w,
            10,
            NoiseKind::Gaussian,
            1.0,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn simulation_is_reproducible() {
        let s = SimSpec {
            d: 12,
            n: 50,
            ..SimSpec::default()
        };
        let a = simulate(&s).unwrap();
        let b = simulate(&s).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimSpec { seed: 1, ..s }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn backbone_weights_are_shared() {
        let s = SimSpec {
            d: 12,
            n: 5,
            ..SimSpec::default()
        };
        let sim = simulate(&s).unwrap();
        for (i, j) in sim.backbone.edges() {
            assert_eq!(sim.weights[0][(i, j)], sim.weights[1][(i, j)]);
        }
        for (w, g) in sim.weights.iter().zip(&sim.graphs) {
            for i in 0..12 {
                for j in 0..12 {
                    assert_eq!(w[(i, j)] != 0.0, g.has_edge(i, j));
                }
            }
        }
    }

    #[test]
    fn empirical_covariance_converges() {
        let s = SimSpec {
            d: 6,
            n: 100_000,
            k: 1,
            mean_degree: 2.0,
            ..SimSpec::default()
        };
        let sim = simulate(&s).unwrap();
        let w = sim.weights[0].as_matrix();
        let inv = (DMatrix::identity(6, 6) - w.transpose())
            .try_inverse()
            .unwrap();
        let population = &inv * inv.transpose();
        let x = crate::objective::center_columns(&sim.data[0]);
        let empirical = x.tr_mul(&x) / 1e5;
        let rel = (&empirical - &population).norm() / population.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }
}
