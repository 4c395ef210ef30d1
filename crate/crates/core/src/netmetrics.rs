//! Clustering, degree assortativity and the in/out degree ratio.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{average_distance, degrees, scc_decompose, DegreeView, MeanCv, NodeId, ResponseGraph};
use crate::statfit;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("assortativity needs at least 2 arcs, graph has {0}")]
    TooFewArcs(usize),
}

/// Sorted, deduplicated neighbor lists of the undirected projection,
/// self-loops dropped.
pub fn undirected_neighbors(graph: &ResponseGraph) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); graph.node_count()];
    for (u, v, _) in graph.arcs() {
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutDegreeClustering {
    pub out_degree: usize,
    pub mean_cc: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub per_node: Vec<f64>,
    /// Mean over all nodes, including those with fewer than two neighbors.
    pub mean: f64,
    pub by_out_degree: Vec<OutDegreeClustering>,
}

impl ClusteringResult {
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        statfit::ecdf(&self.per_node)
    }

    pub fn zero_fraction(&self) -> f64 {
        if self.per_node.is_empty() {
            return 0.0;
        }
        self.per_node.iter().filter(|&&c| c == 0.0).count() as f64 / self.per_node.len() as f64
    }
}

/// Local clustering on the undirected projection: links among a node's
/// neighbors over `d(d-1)/2`, and 0 for nodes with fewer than two
/// neighbors. Triangles are counted once each by orienting every edge
/// towards the endpoint of higher (degree, id).
pub fn clustering(graph: &ResponseGraph) -> ClusteringResult {
    let adj = undirected_neighbors(graph);
    let n = adj.len();
    let rank_key = |u: NodeId| (adj[u].len(), u);
    let forward: Vec<Vec<NodeId>> = (0..n)
        .map(|u| adj[u].iter().copied().filter(|&v| rank_key(v) > rank_key(u)).collect())
        .collect();

    let mut triangles = vec![0u64; n];
    let mut mark = vec![false; n];
    for u in 0..n {
        for &v in &forward[u] {
            mark[v] = true;
        }
        for &v in &forward[u] {
            for &w in &forward[v] {
                if mark[w] {
                    triangles[u] += 1;
                    triangles[v] += 1;
                    triangles[w] += 1;
                }
            }
        }
        for &v in &forward[u] {
            mark[v] = false;
        }
    }

    let per_node: Vec<f64> = (0..n)
        .map(|u| local_coefficient(triangles[u], adj[u].len()))
        .collect();
    let mean = if n == 0 {
        0.0
    } else {
        per_node.iter().sum::<f64>() / n as f64
    };

    let out = degrees(graph).out_degree;
    let mut bins: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for u in 0..n {
        let e = bins.entry(out[u]).or_insert((0.0, 0));
        e.0 += per_node[u];
        e.1 += 1;
    }
    let by_out_degree = bins
        .into_iter()
        .map(|(k, (s, c))| OutDegreeClustering {
            out_degree: k,
            mean_cc: s / c as f64,
            nodes: c,
        })
        .collect();
    ClusteringResult {
        per_node,
        mean,
        by_out_degree,
    }
}

pub(crate) fn local_coefficient(links: u64, d: usize) -> f64 {
    if d < 2 {
        return 0.0;
    }
    let pairs = (d as u64) * (d as u64 - 1) / 2;
    links as f64 / pairs as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeKind {
    In,
    Out,
}

/// Which degree of each arc endpoint enters the correlation. The default
/// pairs the excess in-degree of the vertex an arc leads into with the
/// excess out-degree of the vertex it leads out of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct AssortativityMode {
    pub source: DegreeKind,
    pub target: DegreeKind,
}

impl Default for AssortativityMode {
    fn default() -> Self {
        Self {
            source: DegreeKind::Out,
            target: DegreeKind::In,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Assortativity {
    Defined { r: f64, arcs: usize },
    /// One of the variance terms is zero, e.g. on a regular graph.
    Undefined { arcs: usize },
}

impl Assortativity {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Assortativity::Defined { r, .. } => Some(r),
            Assortativity::Undefined { .. } => None,
        }
    }
}

/// Pearson correlation of excess degrees across arcs:
///
/// ```text
/// r = (Σ j k − M⁻¹ Σ j Σ k) / sqrt[(Σ j² − M⁻¹ (Σ j)²)(Σ k² − M⁻¹ (Σ k)²)]
/// ```
///
/// with `j` the excess degree of the arc's target and `k` that of its
/// source, per `mode`. Sums are kept in integers so a zero variance is
/// detected exactly.
pub fn assortativity(graph: &ResponseGraph, mode: AssortativityMode) -> Result<Assortativity, MetricsError> {
    let m = graph.arc_count();
    if m < 2 {
        return Err(MetricsError::TooFewArcs(m));
    }
    let deg = degrees(graph);
    let pick = |kind: DegreeKind, u: NodeId| -> i128 {
        let d = match kind {
            DegreeKind::In => deg.in_degree[u],
            DegreeKind::Out => deg.out_degree[u],
        };
        d as i128 - 1
    };
    let (mut sj, mut sk, mut sjk, mut sjj, mut skk) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (u, v, _) in graph.arcs() {
        let j = pick(mode.target, v);
        let k = pick(mode.source, u);
        sj += j;
        sk += k;
        sjk += j * k;
        sjj += j * j;
        skk += k * k;
    }
    let mm = m as i128;
    let var_j = mm * sjj - sj * sj;
    let var_k = mm * skk - sk * sk;
    if var_j == 0 || var_k == 0 {
        return Ok(Assortativity::Undefined { arcs: m });
    }
    let num = (mm * sjk - sj * sk) as f64;
    let r = num / ((var_j as f64).sqrt() * (var_k as f64).sqrt());
    Ok(Assortativity::Defined {
        r: r.clamp(-1.0, 1.0),
        arcs: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InOutRatios {
    /// `(node, k_in / k_out)` for nodes with `k_out >= 1`.
    pub finite: Vec<(NodeId, f64)>,
    /// Nodes with `k_out = 0`.
    pub infinite: Vec<NodeId>,
    pub cdf: Vec<(f64, f64)>,
}

pub fn in_out_ratio_cdf(degrees: &DegreeView) -> InOutRatios {
    let mut finite = Vec::new();
    let mut infinite = Vec::new();
    for u in 0..degrees.len() {
        match degrees.out_degree[u] {
            0 => infinite.push(u),
            out => finite.push((u, degrees.in_degree[u] as f64 / out as f64)),
        }
    }
    let values: Vec<f64> = finite.iter().map(|p| p.1).collect();
    InOutRatios {
        cdf: statfit::ecdf(&values),
        finite,
        infinite,
    }
}

/// Structural summary of one graph, one column of the network table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub arcs: usize,
    pub clustering: f64,
    pub largest_scc: usize,
    pub components: usize,
    pub assortativity: Option<f64>,
    pub avg_distance: Option<f64>,
    pub k_in: MeanCv,
    pub k_out: MeanCv,
    pub avg_k: f64,
}

/// Self-loops are removed before any metric is computed.
pub fn network_summary(
    graph: &ResponseGraph,
    distance_samples: usize,
    seed: u64,
    mode: AssortativityMode,
) -> NetworkSummary {
    let g = graph.without_self_loops();
    let deg = degrees(&g);
    let comps = scc_decompose(&g);
    NetworkSummary {
        nodes: g.node_count(),
        arcs: g.arc_count(),
        clustering: clustering(&g).mean,
        largest_scc: comps.largest_scc().len(),
        components: comps.sccs.len(),
        assortativity: assortativity(&g, mode).ok().and_then(|a| a.value()),
        avg_distance: average_distance(&g, distance_samples, seed).ok().map(|d| d.mean),
        k_in: deg.in_stats(),
        k_out: deg.out_stats(),
        avg_k: deg.mean_total(),
    }
}
