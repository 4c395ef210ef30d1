//! The video response user graph and its structural decompositions.
//!
//! Nodes are users; an arc `u -> v` with weight `w` records that `u` posted
//! `w` responses to videos owned by `v`. Node ids are dense indices into the
//! user list, which is kept sorted so that every derived ordering is stable.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::InteractionTrace;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseGraph {
    users: Vec<String>,
    index: HashMap<String, NodeId>,
    out_adj: Vec<Vec<(NodeId, u64)>>,
    in_adj: Vec<Vec<(NodeId, u64)>>,
    arc_count: usize,
}

impl ResponseGraph {
    /// Build from named nodes and weighted arcs. Arc endpoints are added to
    /// the node set; parallel arcs are merged by summing weights and
    /// zero-weight arcs are dropped.
    pub fn from_arcs<N, A, S>(nodes: N, arcs: A) -> Self
    where
        N: IntoIterator<Item = S>,
        A: IntoIterator<Item = (S, S, u64)>,
        S: AsRef<str>,
    {
        let arcs: Vec<(S, S, u64)> = arcs.into_iter().collect();
        let mut names: BTreeSet<String> = nodes.into_iter().map(|s| s.as_ref().to_string()).collect();
        for (u, v, _) in &arcs {
            names.insert(u.as_ref().to_string());
            names.insert(v.as_ref().to_string());
        }
        let users: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, NodeId> =
            users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        let indexed: Vec<(NodeId, NodeId, u64)> = arcs
            .iter()
            .map(|(u, v, w)| (index[u.as_ref()], index[v.as_ref()], *w))
            .collect();
        Self::assemble(users, index, indexed)
    }

    /// Build from dense ids. Node names are the decimal ids, zero-padded so
    /// that lexical and numeric order agree.
    pub fn from_indexed(n: usize, arcs: impl IntoIterator<Item = (NodeId, NodeId, u64)>) -> Self {
        let width = n.saturating_sub(1).to_string().len();
        let users: Vec<String> = (0..n).map(|i| format!("{i:0width$}")).collect();
        let index = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        Self::assemble(users, index, arcs)
    }

    /// Same node set, different arcs.
    pub fn with_arcs(&self, arcs: impl IntoIterator<Item = (NodeId, NodeId, u64)>) -> Self {
        Self::assemble(self.users.clone(), self.index.clone(), arcs)
    }

    fn assemble(
        users: Vec<String>,
        index: HashMap<String, NodeId>,
        arcs: impl IntoIterator<Item = (NodeId, NodeId, u64)>,
    ) -> Self {
        let n = users.len();
        let mut merged: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
        for (u, v, w) in arcs {
            assert!(u < n && v < n, "arc endpoint out of range");
            if w > 0 {
                *merged.entry((u, v)).or_insert(0) += w;
            }
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (&(u, v), &w) in &merged {
            out_adj[u].push((v, w));
            in_adj[v].push((u, w));
        }
        // in_adj is filled in (u, v) order, so each list is sorted by source
        Self {
            users,
            index,
            out_adj,
            in_adj,
            arc_count: merged.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.users[id]
    }

    pub fn node_id(&self, user: &str) -> Option<NodeId> {
        self.index.get(user).copied()
    }

    /// Successors of `u` with arc weights, sorted by target.
    pub fn out_arcs(&self, u: NodeId) -> &[(NodeId, u64)] {
        &self.out_adj[u]
    }

    /// Predecessors of `v` with arc weights, sorted by source.
    pub fn in_arcs(&self, v: NodeId) -> &[(NodeId, u64)] {
        &self.in_adj[v]
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<u64> {
        self.out_adj[u]
            .binary_search_by_key(&v, |&(t, _)| t)
            .ok()
            .map(|i| self.out_adj[u][i].1)
    }

    /// All arcs as `(source, target, weight)` in lexical order.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId, u64)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().map(move |&(v, w)| (u, v, w)))
    }

    pub fn self_loop_count(&self) -> usize {
        (0..self.node_count()).filter(|&u| self.weight(u, u).is_some()).count()
    }

    /// Same node set, self-loops removed.
    pub fn without_self_loops(&self) -> Self {
        let arcs: Vec<_> = self.arcs().filter(|&(u, v, _)| u != v).collect();
        Self::assemble(self.users.clone(), self.index.clone(), arcs)
    }

    /// Subgraph induced by `nodes`, keeping user names.
    pub fn induced(&self, nodes: &[NodeId]) -> Self {
        let mut keep = vec![None; self.node_count()];
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let users: Vec<String> = sorted.iter().map(|&u| self.users[u].clone()).collect();
        for (new, &old) in sorted.iter().enumerate() {
            keep[old] = Some(new);
        }
        let arcs: Vec<_> = sorted
            .iter()
            .flat_map(|&u| {
                let keep = &keep;
                self.out_adj[u]
                    .iter()
                    .filter_map(move |&(v, w)| Some((keep[u]?, keep[v]?, w)))
            })
            .collect();
        let index = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        Self::assemble(users, index, arcs)
    }

    pub fn edge_list_csv(&self) -> std::io::Result<Vec<u8>> {
        let rows: Vec<(&str, &str, u64)> = self
            .arcs()
            .map(|(u, v, w)| (self.name(u), self.name(v), w))
            .collect();
        crate::output::csv_bytes_with_header(&["src", "dst", "weight"], &rows)
    }
}

/// Build the user graph: an arc from each responder to the owner of the
/// video they responded to, weighted by response count.
pub fn build_graph(trace: &InteractionTrace, include_self_loops: bool) -> ResponseGraph {
    let mut nodes = BTreeSet::new();
    let mut arcs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for r in trace.responses() {
        let owner = trace.parent_owner(r);
        nodes.insert(r.responder.as_str());
        nodes.insert(owner);
        if include_self_loops || r.responder != owner {
            *arcs.entry((r.responder.as_str(), owner)).or_insert(0) += 1;
        }
    }
    ResponseGraph::from_arcs(nodes, arcs.into_iter().map(|((u, v), w)| (u, v, w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCv {
    pub mean: f64,
    /// Population standard deviation over the mean; 0 when the mean is 0.
    pub cv: f64,
}

impl MeanCv {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self { mean: 0.0, cv: 0.0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let cv = if mean == 0.0 { 0.0 } else { var.sqrt() / mean };
        Self { mean, cv }
    }
}

/// Per-node degrees. Distinct-neighbor counts feed the structural metrics,
/// weighted counts (responses) feed the behavior metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeView {
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    pub weighted_in: Vec<u64>,
    pub weighted_out: Vec<u64>,
}

impl DegreeView {
    pub fn len(&self) -> usize {
        self.in_degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_degree.is_empty()
    }

    pub fn in_stats(&self) -> MeanCv {
        MeanCv::of(self.in_degree.iter().map(|&d| d as f64))
    }

    pub fn out_stats(&self) -> MeanCv {
        MeanCv::of(self.out_degree.iter().map(|&d| d as f64))
    }

    /// Mean total degree `k_in + k_out`.
    pub fn mean_total(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: usize = self.in_degree.iter().chain(&self.out_degree).sum();
        s as f64 / self.len() as f64
    }
}

pub fn degrees(graph: &ResponseGraph) -> DegreeView {
    let n = graph.node_count();
    let mut view = DegreeView {
        in_degree: vec![0; n],
        out_degree: vec![0; n],
        weighted_in: vec![0; n],
        weighted_out: vec![0; n],
    };
    for (u, v, w) in graph.arcs() {
        view.out_degree[u] += 1;
        view.in_degree[v] += 1;
        view.weighted_out[u] += w;
        view.weighted_in[v] += w;
    }
    view
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecomposition {
    /// Strongly connected components, largest first; ties by smallest member.
    pub sccs: Vec<Vec<NodeId>>,
    /// Weakly connected components, same ordering.
    pub wccs: Vec<Vec<NodeId>>,
    pub scc_of: Vec<usize>,
    pub wcc_of: Vec<usize>,
}

impl ComponentDecomposition {
    pub fn largest_scc(&self) -> &[NodeId] {
        self.sccs.first().map_or(&[], |c| c.as_slice())
    }

    pub fn largest_scc_subgraph(&self, graph: &ResponseGraph) -> ResponseGraph {
        graph.induced(self.largest_scc())
    }

    pub fn singleton_sccs(&self) -> usize {
        self.sccs.iter().filter(|c| c.len() == 1).count()
    }
}

fn order_components(mut comps: Vec<Vec<NodeId>>, n: usize) -> (Vec<Vec<NodeId>>, Vec<usize>) {
    for c in &mut comps {
        c.sort_unstable();
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &u in c {
            of[u] = i;
        }
    }
    (comps, of)
}

/// Tarjan's algorithm with an explicit call stack.
fn tarjan(graph: &ResponseGraph) -> Vec<Vec<NodeId>> {
    const UNSEEN: usize = usize::MAX;
    let n = graph.node_count();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    let mut calls: Vec<(NodeId, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        calls.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            if *pos == 0 {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let adj = graph.out_arcs(v);
            if *pos < adj.len() {
                let w = adj[*pos].0;
                *pos += 1;
                if index[w] == UNSEEN {
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

fn weak_components(graph: &ResponseGraph) -> Vec<Vec<NodeId>> {
    let n = graph.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, v, _) in graph.arcs() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for u in 0..n {
        let r = find(&mut parent, u);
        groups.entry(r).or_default().push(u);
    }
    groups.into_values().collect()
}

pub fn scc_decompose(graph: &ResponseGraph) -> ComponentDecomposition {
    let n = graph.node_count();
    let (sccs, scc_of) = order_components(tarjan(graph), n);
    let (wccs, wcc_of) = order_components(weak_components(graph), n);
    ComponentDecomposition {
        sccs,
        wccs,
        scc_of,
        wcc_of,
    }
}

/// `(rank, size)` pairs for SCCs, rank 1 being the largest.
pub fn component_size_rank(decomp: &ComponentDecomposition) -> Vec<(usize, usize)> {
    decomp
        .sccs
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.len()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub mean: f64,
    pub reachable_pairs: u64,
    pub sources: usize,
    pub exact: bool,
}

fn bfs_distance_sum(graph: &ResponseGraph, src: NodeId, dist: &mut [u32]) -> (u64, u64) {
    dist.fill(u32::MAX);
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    let (mut sum, mut count) = (0u64, 0u64);
    while let Some(u) = queue.pop_front() {
        let d = dist[u];
        for &(v, _) in graph.out_arcs(u) {
            if dist[v] == u32::MAX {
                dist[v] = d + 1;
                sum += u64::from(d + 1);
                count += 1;
                queue.push_back(v);
            }
        }
    }
    (sum, count)
}

/// Mean directed shortest-path length over reachable ordered pairs of
/// distinct nodes. With `sample_size >= n` every node is a source and the
/// result is exact; otherwise sources are a uniform sample drawn from `seed`.
pub fn average_distance(
    graph: &ResponseGraph,
    sample_size: usize,
    seed: u64,
) -> Result<DistanceEstimate, GraphError> {
    if sample_size == 0 {
        return Err(GraphError::InvalidArgument("sample_size must be at least 1"));
    }
    if graph.arc_count() == 0 {
        return Err(GraphError::DegenerateInput("graph has no arcs"));
    }
    let n = graph.node_count();
    let exact = sample_size >= n;
    let sources: Vec<NodeId> = if exact {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
        s.sort_unstable();
        s
    };
    let (sum, count) = sources
        .par_iter()
        .map_init(
            || vec![u32::MAX; n],
            |dist, &s| bfs_distance_sum(graph, s, dist),
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if count == 0 {
        return Err(GraphError::DegenerateInput("no reachable pairs"));
    }
    Ok(DistanceEstimate {
        mean: sum as f64 / count as f64,
        reachable_pairs: count,
        sources: sources.len(),
        exact,
    })
}
