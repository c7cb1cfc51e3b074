//! Binary directed network measures: density, efficiency, clustering,
//! transitivity, rich-club, assortativity, and degree hubs.
//!
//! Edge weights play no role; every function works on the 0/1 adjacency.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extraction::BinaryDigraph;

pub fn density(g: &BinaryDigraph) -> Result<f64> {
    let d = g.num_nodes();
    if d < 2 {
        return invalid("density needs at least two nodes");
    }
    Ok(g.num_edges() as f64 / (d * (d - 1)) as f64)
}

/// Hop distances from `src`; `usize::MAX` marks unreachable nodes.
fn bfs(succ: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; succ.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        for &u in &succ[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

fn efficiency_of(succ: &[Vec<usize>]) -> f64 {
    let d = succ.len();
    if d < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for s in 0..d {
        for (t, &dist) in bfs(succ, s).iter().enumerate() {
            if t != s && dist != usize::MAX {
                total += 1.0 / dist as f64;
            }
        }
    }
    total / (d * (d - 1)) as f64
}

/// Mean inverse directed shortest-path length over ordered pairs.
pub fn global_efficiency(g: &BinaryDigraph) -> Result<f64> {
    if g.num_nodes() < 2 {
        return invalid("global efficiency needs at least two nodes");
    }
    Ok(efficiency_of(&g.successors()))
}

/// Sorted in- and out-neighbours of every node.
fn neighbourhoods(g: &BinaryDigraph) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); g.num_nodes()];
    for (i, j) in g.edges() {
        nb[i].push(j);
        nb[j].push(i);
    }
    for list in &mut nb {
        list.sort_unstable();
        list.dedup();
    }
    nb
}

/// Per-node efficiency of the subgraph induced on each node's neighbours,
/// and the mean over nodes.
pub fn local_efficiency(g: &BinaryDigraph) -> (Vec<f64>, f64) {
    let d = g.num_nodes();
    let adj = g.adjacency();
    let per_node: Vec<f64> = neighbourhoods(g)
        .into_iter()
        .map(|nb| {
            if nb.len() < 2 {
                return 0.0;
            }
            let succ: Vec<Vec<usize>> = nb
                .iter()
                .map(|&a| (0..nb.len()).filter(|&bi| adj[a][nb[bi]]).collect())
                .collect();
            efficiency_of(&succ)
        })
        .collect();
    let mean = if d == 0 {
        0.0
    } else {
        per_node.iter().sum::<f64>() / d as f64
    };
    (per_node, mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub per_node: Vec<f64>,
    pub mean: f64,
    pub transitivity: f64,
}

/// Directed clustering (Fagiolo): with `S = A + Aᵀ`,
/// `t_v = (S³)_vv / 2` and `C_v = t_v / (k_v(k_v − 1) − 2 k_v^↔)`.
pub fn clustering_and_transitivity(g: &BinaryDigraph) -> Clustering {
    let d = g.num_nodes();
    let adj = g.adjacency();
    let s: Vec<Vec<u64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| u64::from(adj[i][j]) + u64::from(adj[j][i]))
                .collect()
        })
        .collect();
    let indeg = g.in_degrees();
    let outdeg = g.out_degrees();
    let mut per_node = vec![0.0; d];
    let (mut num, mut den) = (0u64, 0u64);
    for v in 0..d {
        // (S³)_vv = Σ_{j,h} S_vj S_jh S_hv
        let mut closed = 0u64;
        for j in 0..d {
            if s[v][j] == 0 {
                continue;
            }
            for h in 0..d {
                closed += s[v][j] * s[j][h] * s[h][v];
            }
        }
        let total = (indeg[v] + outdeg[v]) as u64;
        let recip = (0..d).filter(|&u| adj[v][u] && adj[u][v]).count() as u64;
        let possible = (total * total.saturating_sub(1)).saturating_sub(2 * recip);
        // closed is even: every closed walk is counted in both orientations
        let t = closed / 2;
        if possible > 0 {
            per_node[v] = t as f64 / possible as f64;
        }
        num += t;
        den += possible;
    }
    let mean = if d == 0 {
        0.0
    } else {
        per_node.iter().sum::<f64>() / d as f64
    };
    let transitivity = if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    };
    Clustering {
        per_node,
        mean,
        transitivity,
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let cov = sxy - sx * sy / n;
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    // integer degrees: variances are exact multiples of 1/n, so compare to 0
    if vx <= 1e-12 * sxx.max(1.0) || vy <= 1e-12 * syy.max(1.0) {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Mean of the out/in, in/out, out/out and in/in degree correlations between
/// the source and target of every edge.
pub fn assortativity(g: &BinaryDigraph) -> Result<f64> {
    if g.num_edges() < 2 {
        return Err(Error::UndefinedMeasure(
            "assortativity needs at least two edges".into(),
        ));
    }
    let indeg = g.in_degrees();
    let outdeg = g.out_degrees();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let pick = |deg: &[usize], src: bool| -> Vec<f64> {
        edges
            .iter()
            .map(|&(i, j)| deg[if src { i } else { j }] as f64)
            .collect()
    };
    let pairs = [
        (&outdeg, &indeg),
        (&indeg, &outdeg),
        (&outdeg, &outdeg),
        (&indeg, &indeg),
    ];
    let total: f64 = pairs
        .iter()
        .map(|(s, t)| pearson(&pick(s, true), &pick(t, false)))
        .sum();
    Ok(total / 4.0)
}

/// Rich-club coefficient `R(k) = E_{>k} / (N_{>k}(N_{>k} − 1))` for every
/// level `k = 1 ..= max_degree − 1` with at least two qualifying nodes.
pub fn rich_club_levels(g: &BinaryDigraph) -> Vec<(usize, f64)> {
    let deg: Vec<usize> = g
        .in_degrees()
        .iter()
        .zip(g.out_degrees())
        .map(|(a, b)| a + b)
        .collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    for k in 1..max_deg {
        let rich: Vec<bool> = deg.iter().map(|&x| x > k).collect();
        let n = rich.iter().filter(|&&r| r).count();
        if n < 2 {
            continue;
        }
        let e = g.edges().filter(|&(i, j)| rich[i] && rich[j]).count();
        out.push((k, e as f64 / (n * (n - 1)) as f64));
    }
    out
}

pub fn rich_club_max(g: &BinaryDigraph) -> Result<f64> {
    rich_club_levels(g)
        .into_iter()
        .map(|(_, r)| r)
        .reduce(f64::max)
        .ok_or_else(|| Error::UndefinedMeasure("no rich-club level has two or more nodes".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdKind {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N − 1.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub node: usize,
    pub label: String,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubReport {
    pub in_hubs: Vec<Hub>,
    pub out_hubs: Vec<Hub>,
    /// Sum-degree hubs that are neither in- nor out-hubs.
    pub sum_hubs: Vec<Hub>,
}

fn hub_threshold(deg: &[usize], sd: SdKind) -> f64 {
    let n = deg.len() as f64;
    let mean = deg.iter().sum::<usize>() as f64 / n;
    let ss: f64 = deg.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
    let div = match sd {
        SdKind::Population => n,
        SdKind::Sample => (n - 1.0).max(1.0),
    };
    mean + 3.0 * (ss / div).sqrt()
}

/// Nodes whose degree exceeds the mean by more than three standard deviations.
pub fn find_hubs(g: &BinaryDigraph, sd: SdKind) -> Result<HubReport> {
    if g.num_nodes() < 2 {
        return invalid("hub detection needs at least two nodes");
    }
    let indeg = g.in_degrees();
    let outdeg = g.out_degrees();
    let sum: Vec<usize> = indeg.iter().zip(&outdeg).map(|(a, b)| a + b).collect();
    let labels = g.node_labels();
    let hubs = |deg: &[usize]| -> Vec<Hub> {
        let thr = hub_threshold(deg, sd);
        deg.iter()
            .enumerate()
            .filter(|(_, &x)| x as f64 > thr)
            .map(|(v, &x)| Hub {
                node: v,
                label: labels[v].clone(),
                degree: x,
            })
            .collect()
    };
    let in_hubs = hubs(&indeg);
    let out_hubs = hubs(&outdeg);
    let sum_hubs = hubs(&sum)
        .into_iter()
        .filter(|h| !in_hubs.iter().chain(&out_hubs).any(|o| o.node == h.node))
        .collect();
    Ok(HubReport {
        in_hubs,
        out_hubs,
        sum_hubs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMeasures {
    pub label: String,
    pub in_degree: usize,
    pub out_degree: usize,
    pub sum_degree: usize,
    pub clustering: f64,
    pub local_efficiency: f64,
}

/// Graph-level summary. Measures that are undefined for the graph are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub transitivity: f64,
    pub mean_clustering: f64,
    pub max_rich_club: Option<f64>,
    pub global_efficiency: f64,
    pub mean_local_efficiency: f64,
    pub assortativity: Option<f64>,
    pub per_node: Vec<NodeMeasures>,
}

pub fn measure_report(g: &BinaryDigraph) -> Result<MeasureReport> {
    let density = density(g)?;
    let global_efficiency = global_efficiency(g)?;
    let (local, mean_local_efficiency) = local_efficiency(g);
    let clustering = clustering_and_transitivity(g);
    let indeg = g.in_degrees();
    let outdeg = g.out_degrees();
    let per_node = (0..g.num_nodes())
        .map(|v| NodeMeasures {
            label: g.node_labels()[v].clone(),
            in_degree: indeg[v],
            out_degree: outdeg[v],
            sum_degree: indeg[v] + outdeg[v],
            clustering: clustering.per_node[v],
            local_efficiency: local[v],
        })
        .collect();
    Ok(MeasureReport {
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        density,
        transitivity: clustering.transitivity,
        mean_clustering: clustering.mean,
        max_rich_club: rich_club_max(g).ok(),
        global_efficiency,
        mean_local_efficiency,
        assortativity: assortativity(g).ok(),
        per_node,
    })
}
