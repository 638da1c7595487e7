//! MST weight under edge-weight adjacency.
//!
//! Adding a non-edge `{u, v}` with weight 0 lowers the MST weight by exactly
//! the heaviest edge on the tree path between `u` and `v` (cycle property),
//! and a heavier added edge lowers it by less. The retain sensitivity is
//! therefore the largest tree-path bottleneck over all non-adjacent pairs,
//! which equals the heaviest "lightest crossing edge" over cuts that some
//! non-edge crosses.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::mechanism::{SensitivityKind, SensitivityReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected simple graph with edge weights in `[0, B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    bound_b: f64,
}

impl WeightedGraph {
    /// Builds a graph; endpoints are normalized so that `u < v`.
    pub fn new(vertex_count: usize, edges: Vec<Edge>, bound_b: f64) -> Result<Self> {
        if !(bound_b > 0.0 && bound_b.is_finite()) {
            return Err(invalid(format!("bound B must be positive, got {bound_b}")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            if e.u == e.v {
                return Err(invalid(format!("self-loop at vertex {}", e.u)));
            }
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(invalid(format!(
                    "edge ({}, {}) references a vertex >= {vertex_count}",
                    e.u, e.v
                )));
            }
            if !(0.0..=bound_b).contains(&e.weight) {
                return Err(invalid(format!(
                    "edge ({}, {}) has weight {} outside [0, {bound_b}]",
                    e.u, e.v, e.weight
                )));
            }
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if !seen.insert((u, v)) {
                return Err(invalid(format!("duplicate edge ({u}, {v})")));
            }
            normalized.push(Edge { u, v, weight: e.weight });
        }
        Ok(Self {
            vertex_count,
            edges: normalized,
            bound_b,
        })
    }

    pub fn from_triples(vertex_count: usize, triples: &[(usize, usize, f64)], bound_b: f64) -> Result<Self> {
        Self::new(
            vertex_count,
            triples.iter().map(|&(u, v, weight)| Edge { u, v, weight }).collect(),
            bound_b,
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    /// Edge density `|E| / C(|V|, 2)`.
    pub fn density(&self) -> f64 {
        let n = self.vertex_count as f64;
        if self.vertex_count < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1.0) / 2.0)
    }

    pub fn max_weight(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.weight).max_by(f64::total_cmp)
    }

    /// Copy with one more edge; fails if the pair is already adjacent.
    pub fn with_edge(&self, u: usize, v: usize, weight: f64) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push(Edge { u, v, weight });
        Self::new(self.vertex_count, edges, self.bound_b)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertex_count);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        uf.components
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count > 0 && self.component_count() == 1
    }

    fn require_connected(&self) -> Result<()> {
        if self.vertex_count == 0 {
            return Err(invalid("graph has no vertices"));
        }
        let components = self.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }
}

/// How equal-weight edges are ordered in Kruskal's scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// `(weight, u, v)` ascending. The default.
    Ascending,
    /// Weight ascending, endpoints descending.
    Descending,
}

/// Edges of a minimum spanning tree (Kruskal).
pub fn minimum_spanning_tree(g: &WeightedGraph, ties: TieBreak) -> Result<Vec<Edge>> {
    g.require_connected()?;
    let mut order: Vec<&Edge> = g.edges.iter().collect();
    order.sort_by(|a, b| {
        let by_weight = a.weight.total_cmp(&b.weight);
        let by_ends = (a.u, a.v).cmp(&(b.u, b.v));
        by_weight.then(match ties {
            TieBreak::Ascending => by_ends,
            TieBreak::Descending => by_ends.reverse(),
        })
    });
    let mut uf = UnionFind::new(g.vertex_count);
    let mut tree = Vec::with_capacity(g.vertex_count.saturating_sub(1));
    for e in order {
        if uf.union(e.u, e.v) {
            tree.push(*e);
            if tree.len() + 1 == g.vertex_count {
                break;
            }
        }
    }
    Ok(tree)
}

pub fn mst_weight(g: &WeightedGraph) -> Result<f64> {
    Ok(minimum_spanning_tree(g, TieBreak::Ascending)?
        .iter()
        .map(|e| e.weight)
        .sum())
}

/// All-pairs maximum edge weight along tree paths, `O(n²)`.
fn tree_bottlenecks(n: usize, tree: &[Edge]) -> Vec<Vec<f64>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in tree {
        adj[e.u].push((e.v, e.weight));
        adj[e.v].push((e.u, e.weight));
    }
    let mut out = vec![vec![0.0; n]; n];
    let mut stack = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for (source, row) in out.iter_mut().enumerate() {
        visited.iter_mut().for_each(|v| *v = false);
        visited[source] = true;
        stack.push((source, 0.0f64));
        while let Some((node, best)) = stack.pop() {
            row[node] = best;
            for &(next, w) in &adj[node] {
                if !visited[next] {
                    visited[next] = true;
                    stack.push((next, best.max(w)));
                }
            }
        }
    }
    out
}

fn rs_with_ties(g: &WeightedGraph, ties: TieBreak) -> Result<SensitivityReport> {
    let tree = minimum_spanning_tree(g, ties)?;
    let n = g.vertex_count;
    let bottleneck = tree_bottlenecks(n, &tree);
    let adj = g.adjacency();
    let mut marked = vec![false; n];
    let mut best = 0.0f64;
    let mut arg = None;
    let mut non_edges = 0usize;
    for u in 0..n {
        for &v in &adj[u] {
            marked[v] = true;
        }
        for v in (u + 1)..n {
            if !marked[v] {
                non_edges += 1;
                if arg.is_none() || bottleneck[u][v] > best {
                    best = bottleneck[u][v];
                    arg = Some((u, v));
                }
            }
        }
        for &v in &adj[u] {
            marked[v] = false;
        }
    }
    let max_tree_edge = tree.iter().map(|e| e.weight).fold(0.0, f64::max);
    let mut report = SensitivityReport::new(best, SensitivityKind::Retain, "rs_mst_edge")
        .with_input("vertices", n as f64)
        .with_input("edges", g.edges.len() as f64)
        .with_input("non_edges", non_edges as f64)
        .with_input("max_mst_edge", max_tree_edge)
        .with_input("B", g.bound_b);
    if let Some((u, v)) = arg {
        report = report.with_input("argmax_u", u as f64).with_input("argmax_v", v as f64);
    }
    Ok(report)
}

/// Retain sensitivity of the MST weight: the largest MST-path bottleneck over
/// non-adjacent vertex pairs (0 for complete graphs).
pub fn rs_mst_edge(g: &WeightedGraph) -> Result<SensitivityReport> {
    rs_with_ties(g, TieBreak::Ascending)
}

/// Same quantity computed from an MST built with another tie order.
pub fn rs_mst_edge_with_ties(g: &WeightedGraph, ties: TieBreak) -> Result<SensitivityReport> {
    rs_with_ties(g, ties)
}

pub fn gs_mst_edge(bound_b: f64) -> Result<SensitivityReport> {
    if !(bound_b > 0.0) {
        return Err(invalid(format!("bound B must be positive, got {bound_b}")));
    }
    Ok(SensitivityReport::new(bound_b, SensitivityKind::Global, "gs_mst_edge").with_input("B", bound_b))
}

/// Exhaustive retain sensitivity: adds every non-edge with weight 0 and
/// recomputes the MST from scratch. Quadratic number of MST computations, so
/// meant for small graphs.
///
/// The weight drop is summed over the edges in which the two trees differ
/// rather than as a difference of totals, so a single swap is exact.
pub fn oracle_rs_mst(g: &WeightedGraph) -> Result<SensitivityReport> {
    let base = minimum_spanning_tree(g, TieBreak::Ascending)?;
    let base_keys: HashSet<(usize, usize)> = base.iter().map(|e| (e.u, e.v)).collect();
    let present: HashSet<(usize, usize)> = g.edges.iter().map(|e| (e.u, e.v)).collect();
    let mut best = 0.0f64;
    let mut tried = 0usize;
    for u in 0..g.vertex_count {
        for v in (u + 1)..g.vertex_count {
            if present.contains(&(u, v)) {
                continue;
            }
            tried += 1;
            let augmented = minimum_spanning_tree(&g.with_edge(u, v, 0.0)?, TieBreak::Ascending)?;
            let keys: HashSet<(usize, usize)> = augmented.iter().map(|e| (e.u, e.v)).collect();
            let removed: f64 = base.iter().filter(|e| !keys.contains(&(e.u, e.v))).map(|e| e.weight).sum();
            let added: f64 = augmented
                .iter()
                .filter(|e| !base_keys.contains(&(e.u, e.v)))
                .map(|e| e.weight)
                .sum();
            best = best.max(removed - added);
        }
    }
    Ok(SensitivityReport::new(best, SensitivityKind::Oracle, "oracle_rs_mst")
        .with_input("vertices", g.vertex_count as f64)
        .with_input("non_edges", tried as f64))
}

/// Parameters of the BFS subgraph sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgraphSampling {
    pub target_nodes: usize,
    pub min_density: f64,
    pub count: usize,
    /// Attempts allowed before giving up; `None` means `100 × count`.
    pub max_attempts: Option<usize>,
}

impl Default for SubgraphSampling {
    fn default() -> Self {
        Self {
            target_nodes: 100,
            min_density: 0.1,
            count: 500,
            max_attempts: None,
        }
    }
}

/// Samples induced subgraphs: BFS from a uniform start vertex until
/// `target_nodes` are reached, keep the induced subgraph when its density is
/// at least `min_density`. Vertices are relabelled in BFS order.
pub fn sample_subgraphs(g: &WeightedGraph, params: &SubgraphSampling, seed: u64) -> Result<Vec<WeightedGraph>> {
    if params.target_nodes < 2 {
        return Err(invalid("subgraphs need at least 2 vertices"));
    }
    if g.vertex_count < params.target_nodes {
        return Err(invalid(format!(
            "graph has {} vertices, fewer than the target {}",
            g.vertex_count, params.target_nodes
        )));
    }
    let budget = params.max_attempts.unwrap_or(100 * params.count.max(1));
    let adj = g.adjacency();
    let mut weights = std::collections::HashMap::with_capacity(g.edges.len());
    for e in &g.edges {
        weights.insert((e.u, e.v), e.weight);
    }
    let mut rng = rng::seeded(seed);
    let mut accepted = Vec::with_capacity(params.count);
    let mut attempts = 0usize;
    let mut too_sparse = 0usize;
    let mut too_small = 0usize;
    while accepted.len() < params.count {
        if attempts >= budget {
            return Err(Error::Convergence(format!(
                "subgraph sampling accepted {} of {} after {attempts} attempts \
                 ({too_small} BFS components too small, {too_sparse} below density {})",
                accepted.len(),
                params.count,
                params.min_density
            )));
        }
        attempts += 1;
        let start = rng.random_range(0..g.vertex_count);
        let nodes = bfs_nodes(&adj, start, params.target_nodes);
        if nodes.len() < params.target_nodes {
            too_small += 1;
            continue;
        }
        let sub = induced(g, &nodes, &weights)?;
        if sub.density() < params.min_density {
            too_sparse += 1;
            continue;
        }
        accepted.push(sub);
    }
    Ok(accepted)
}

fn bfs_nodes(adj: &[Vec<usize>], start: usize, limit: usize) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut order = Vec::with_capacity(limit);
    let mut queue = VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(node) = queue.pop_front() {
        order.push(node);
        if order.len() == limit {
            break;
        }
        for &next in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    order
}

fn induced(
    g: &WeightedGraph,
    nodes: &[usize],
    weights: &std::collections::HashMap<(usize, usize), f64>,
) -> Result<WeightedGraph> {
    let index: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let members: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut edges = Vec::new();
    for &u in &members {
        for &v in members.range(u + 1..) {
            if let Some(&w) = weights.get(&(u, v)) {
                edges.push(Edge {
                    u: index[&u],
                    v: index[&v],
                    weight: w,
                });
            }
        }
    }
    WeightedGraph::new(nodes.len(), edges, g.bound_b)
}

/// Erdős–Rényi graph with uniform weights, resampled until connected.
/// `integer_weights` draws weights from `{0, 1, …, ⌊B⌋}` instead of `[0, B]`.
pub fn random_connected_graph<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    bound_b: f64,
    integer_weights: bool,
    rng: &mut R,
) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(invalid("random graph needs at least one vertex"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("edge probability must lie in (0, 1], got {p}")));
    }
    for _ in 0..10_000 {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    let weight = if integer_weights {
                        rng.random_range(0..=bound_b.floor() as u64) as f64
                    } else {
                        rng.random::<f64>() * bound_b
                    };
                    edges.push(Edge { u, v, weight });
                }
            }
        }
        let g = WeightedGraph::new(n, edges, bound_b)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Convergence(format!(
        "no connected G({n}, {p}) graph in 10000 draws"
    )))
}
