//! Online shortest path with per-edge perturbations.
//!
//! Each period a path from `s` to `t` is chosen, then every edge's time is revealed and the
//! chosen path pays the sum of its edges' times. The perturbed leader adds fresh noise to
//! every edge's cumulative time and asks a shortest-path oracle for the best path, so the
//! only per-round work is one shortest-path computation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::ftl_killer_losses;
use crate::error::{Error, Result};
use crate::perturbation::{NoiseFamily, NoiseSign, PerturbationSpec};
use crate::rng::{purpose, RngStream};

/// Relative tolerance under which two path weights are treated as tied.
pub const PATH_TIE_TOL: f64 = 1e-9;

/// Default cap on the number of simple paths the brute-force oracle will enumerate.
pub const ENUMERATION_GUARD: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGraph {
    node_names: Vec<String>,
    edges: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
    cumulative: Vec<f64>,
    /// Outgoing edge ids per node, ascending.
    #[serde(skip)]
    out_edges: Vec<Vec<usize>>,
}

impl EdgeGraph {
    /// Graph with nodes `0..node_count` and zero initial costs.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>, source: usize, sink: usize) -> Result<Self> {
        let costs = vec![0.0; edges.len()];
        Self::with_costs(node_count, edges, source, sink, costs)
    }

    pub fn with_costs(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        cumulative: Vec<f64>,
    ) -> Result<Self> {
        let node_names = (0..node_count).map(|i| i.to_string()).collect();
        Self::build(node_names, edges, source, sink, cumulative)
    }

    fn build(
        node_names: Vec<String>,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        cumulative: Vec<f64>,
    ) -> Result<Self> {
        let v = node_names.len();
        if source >= v || sink >= v {
            return Err(Error::Graph(format!(
                "source {source} or sink {sink} out of range for {v} nodes"
            )));
        }
        if source == sink {
            return Err(Error::Graph("source and sink must differ".into()));
        }
        if let Some((id, (a, b))) = edges.iter().enumerate().find(|(_, (a, b))| *a >= v || *b >= v) {
            return Err(Error::Graph(format!(
                "edge {id} ({a} -> {b}) has an endpoint out of range"
            )));
        }
        if cumulative.len() != edges.len() {
            return Err(Error::Graph(format!(
                "{} edge costs for {} edges",
                cumulative.len(),
                edges.len()
            )));
        }
        if let Some(c) = cumulative.iter().find(|c| !c.is_finite()) {
            return Err(Error::data(format!("non-finite edge cost {c}")));
        }
        let mut out_edges = vec![Vec::new(); v];
        for (id, &(a, _)) in edges.iter().enumerate() {
            out_edges[a].push(id);
        }
        let g = Self {
            node_names,
            edges,
            source,
            sink,
            cumulative,
            out_edges,
        };
        if !g.sink_reachable() {
            return Err(Error::Graph("no path from source to sink".into()));
        }
        Ok(g)
    }

    /// Parses the edge-list text format:
    ///
    /// ```text
    /// # comment
    /// s a
    /// t d
    /// a b 1.5
    /// b d
    /// ```
    ///
    /// `s <node>` and `t <node>` name the endpoints; every other line is
    /// `from to [initial_cost]`. Node names are arbitrary tokens. A two-token line starting
    /// with `s` or `t` is always read as a header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut intern = |name: &str| -> usize {
            *ids.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let (mut source, mut sink) = (None, None);
        let mut edges = Vec::new();
        let mut costs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |why: &str| Error::Graph(format!("line {}: {why}: {raw:?}", lineno + 1));
            match tokens.as_slice() {
                ["s", node] => source = Some(intern(node)),
                ["t", node] => sink = Some(intern(node)),
                [from, to] => {
                    edges.push((intern(from), intern(to)));
                    costs.push(0.0);
                }
                [from, to, cost] => {
                    let c: f64 = cost.parse().map_err(|_| bad("bad cost"))?;
                    edges.push((intern(from), intern(to)));
                    costs.push(c);
                }
                _ => return Err(bad("expected `s <node>`, `t <node>` or `from to [cost]`")),
            }
        }
        let source = source.ok_or_else(|| Error::Graph("missing `s <node>` line".into()))?;
        let sink = sink.ok_or_else(|| Error::Graph("missing `t <node>` line".into()))?;
        Self::build(names, edges, source, sink, costs)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_name(&self, v: usize) -> &str {
        &self.node_names[v]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Copy of the graph with different cumulative edge costs.
    pub fn with_cumulative(&self, cumulative: Vec<f64>) -> Result<Self> {
        Self::build(
            self.node_names.clone(),
            self.edges.clone(),
            self.source,
            self.sink,
            cumulative,
        )
    }

    /// Adds one round of revealed edge times to the cumulative costs.
    pub fn add_times(&mut self, times: &[f64]) -> Result<()> {
        validate_times(times, self.edges.len(), None)?;
        self.cumulative.iter_mut().zip(times).for_each(|(c, x)| *c += x);
        Ok(())
    }

    fn sink_reachable(&self) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        while let Some(u) = stack.pop() {
            for &e in &self.out_edges[u] {
                let v = self.edges[e].1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen[self.sink]
    }

    /// Kahn's algorithm; `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let v = self.node_count();
        let mut indeg = vec![0usize; v];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut queue: Vec<usize> = (0..v).filter(|&u| indeg[u] == 0).collect();
        let mut order = Vec::with_capacity(v);
        while let Some(u) = queue.pop() {
            order.push(u);
            for &e in &self.out_edges[u] {
                let b = self.edges[e].1;
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    queue.push(b);
                }
            }
        }
        (order.len() == v).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Node sequence visited by an edge-id path.
    pub fn path_nodes(&self, edges: &[usize]) -> Vec<usize> {
        let mut nodes = vec![self.source];
        nodes.extend(edges.iter().map(|&e| self.edges[e].1));
        nodes
    }

    /// True when `edges` chains head to tail from source to sink without repeating a node.
    pub fn is_simple_st_path(&self, edges: &[usize]) -> bool {
        let mut at = self.source;
        let mut seen = vec![false; self.node_count()];
        seen[at] = true;
        for &e in edges {
            let Some(&(a, b)) = self.edges.get(e) else {
                return false;
            };
            if a != at || seen[b] {
                return false;
            }
            seen[b] = true;
            at = b;
        }
        at == self.sink
    }
}

fn validate_times(times: &[f64], m: usize, round: Option<usize>) -> Result<()> {
    let err = |msg: String| match round {
        Some(t) => Error::data_at(t, msg),
        None => Error::data(msg),
    };
    if times.len() != m {
        return Err(err(format!("{} edge times for {m} edges", times.len())));
    }
    if let Some((e, x)) = times
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
    {
        return Err(err(format!(
            "edge {e} has invalid time {x}; times must be finite and >= 0"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathChoice {
    pub edges: Vec<usize>,
    /// Total weight of the path under the weights it was selected with.
    pub weight: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= PATH_TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Distance from every node to the sink. Dijkstra on the reversed graph when all weights
/// are nonnegative, reverse topological relaxation on a DAG otherwise.
fn distances_to_sink(g: &EdgeGraph, weights: &[f64]) -> Result<Vec<f64>> {
    let v = g.node_count();
    let mut dist = vec![f64::INFINITY; v];
    dist[g.sink] = 0.0;
    if weights.iter().all(|w| *w >= 0.0) {
        let mut in_edges = vec![Vec::new(); v];
        for (id, &(_, b)) in g.edges.iter().enumerate() {
            in_edges[b].push(id);
        }
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, g.sink));
        let mut done = vec![false; v];
        while let Some(HeapItem(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &e in &in_edges[u] {
                let a = g.edges[e].0;
                let cand = weights[e] + d;
                if cand < dist[a] {
                    dist[a] = cand;
                    heap.push(HeapItem(cand, a));
                }
            }
        }
        return Ok(dist);
    }
    let order = g.topological_order().ok_or_else(|| {
        Error::Config("negative edge weights on a cyclic graph: shortest paths are undefined".into())
    })?;
    for &u in order.iter().rev() {
        for &e in &g.out_edges[u] {
            let b = g.edges[e].1;
            let cand = weights[e] + dist[b];
            if cand < dist[u] {
                dist[u] = cand;
            }
        }
    }
    Ok(dist)
}

/// Minimum-weight simple `s -> t` path under `weights`; among tied paths the
/// lexicographically smallest edge-id sequence.
pub fn shortest_path(g: &EdgeGraph, weights: &[f64]) -> Result<PathChoice> {
    if weights.len() != g.edge_count() {
        return Err(Error::Config(format!(
            "{} weights for {} edges",
            weights.len(),
            g.edge_count()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::data(format!("non-finite edge weight {w}")));
    }
    let dist = distances_to_sink(g, weights)?;
    if !dist[g.source].is_finite() {
        return Err(Error::Graph("no path from source to sink".into()));
    }
    // Depth-first over tight edges in id order: the first simple path reaching the sink is the
    // lexicographically smallest shortest path.
    let tight = |e: usize| {
        let (a, b) = g.edges[e];
        dist[b].is_finite() && tied(weights[e] + dist[b], dist[a])
    };
    let mut visited = vec![false; g.node_count()];
    let mut path = Vec::new();
    fn dfs(
        g: &EdgeGraph,
        u: usize,
        tight: &dyn Fn(usize) -> bool,
        visited: &mut [bool],
        path: &mut Vec<usize>,
    ) -> bool {
        if u == g.sink {
            return true;
        }
        visited[u] = true;
        for &e in &g.out_edges[u] {
            let b = g.edges[e].1;
            if !visited[b] && tight(e) {
                path.push(e);
                if dfs(g, b, tight, visited, path) {
                    return true;
                }
                path.pop();
            }
        }
        visited[u] = false;
        false
    }
    if !dfs(g, g.source, &tight, &mut visited, &mut path) {
        return Err(Error::Graph("shortest-path reconstruction failed".into()));
    }
    let weight = path.iter().map(|&e| weights[e]).sum();
    Ok(PathChoice { edges: path, weight })
}

/// Draws one noise value per edge (in edge-id order) and returns the shortest path under
/// `cumulative + noise`.
pub fn perturbed_shortest_path<R: Rng + ?Sized>(
    g: &EdgeGraph,
    spec: &PerturbationSpec,
    rng: &mut R,
) -> Result<PathChoice> {
    spec.validate()?;
    if spec.family != NoiseFamily::PointMassZero && spec.sign != NoiseSign::Add {
        return Err(Error::Config(
            "path perturbations are added to edge costs; use sign = add".into(),
        ));
    }
    if !spec.is_nonnegative() && !g.is_acyclic() {
        return Err(Error::Config(
            "signed (Gumbel) edge noise needs an acyclic graph: negative cycles cannot be excluded".into(),
        ));
    }
    let weights: Vec<f64> = g.cumulative.iter().map(|&c| c + spec.sample(rng)).collect();
    shortest_path(g, &weights)
}

/// Enumerates every simple `s -> t` path and returns the one with least cumulative cost.
pub fn brute_force_best_path(g: &EdgeGraph) -> Result<PathChoice> {
    brute_force_with_guard(g, g.cumulative(), ENUMERATION_GUARD)
}

pub fn brute_force_with_guard(g: &EdgeGraph, weights: &[f64], guard: usize) -> Result<PathChoice> {
    if weights.len() != g.edge_count() {
        return Err(Error::Config(format!(
            "{} weights for {} edges",
            weights.len(),
            g.edge_count()
        )));
    }
    struct Search<'a> {
        g: &'a EdgeGraph,
        weights: &'a [f64],
        guard: usize,
        found: usize,
        best: Option<PathChoice>,
        path: Vec<usize>,
        visited: Vec<bool>,
    }
    impl Search<'_> {
        fn walk(&mut self, u: usize) -> Result<()> {
            if u == self.g.sink {
                self.found += 1;
                if self.found > self.guard {
                    return Err(Error::Capacity(format!(
                        "more than {} simple paths; use the shortest-path oracle instead",
                        self.guard
                    )));
                }
                let w: f64 = self.path.iter().map(|&e| self.weights[e]).sum();
                // Paths arrive in lexicographic order, so earlier wins ties.
                let better = match &self.best {
                    None => true,
                    Some(b) => w < b.weight && !tied(w, b.weight),
                };
                if better {
                    self.best = Some(PathChoice {
                        edges: self.path.clone(),
                        weight: w,
                    });
                }
                return Ok(());
            }
            self.visited[u] = true;
            for i in 0..self.g.out_edges[u].len() {
                let e = self.g.out_edges[u][i];
                let b = self.g.edges[e].1;
                if !self.visited[b] {
                    self.path.push(e);
                    self.walk(b)?;
                    self.path.pop();
                }
            }
            self.visited[u] = false;
            Ok(())
        }
    }
    let mut s = Search {
        g,
        weights,
        guard,
        found: 0,
        best: None,
        path: Vec::new(),
        visited: vec![false; g.node_count()],
    };
    s.walk(g.source)?;
    s.best
        .ok_or_else(|| Error::Graph("no path from source to sink".into()))
}

/// Per-round edge times.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeTimes {
    /// Recorded rows, one column per edge.
    Replay(Vec<Vec<f64>>),
    /// The two-expert follow-the-leader counterexample on a graph with two edges.
    FtlKiller,
    /// Independent times uniform on `[low, high]`, `0 <= low <= high`.
    UniformIid { low: f64, high: f64 },
}

impl EdgeTimes {
    pub fn times(&self, t: usize, edge_count: usize, rng: RngStream) -> Result<Vec<f64>> {
        let times = match self {
            EdgeTimes::Replay(rows) => rows.get(t - 1).cloned().ok_or_else(|| {
                Error::data_at(t, format!("edge-time table exhausted after {} rows", rows.len()))
            })?,
            EdgeTimes::FtlKiller => ftl_killer_losses(t, edge_count)?,
            EdgeTimes::UniformIid { low, high } => {
                if !(0.0 <= *low && low <= high && high.is_finite()) {
                    return Err(Error::Config(format!("invalid edge-time bounds [{low}, {high}]")));
                }
                let mut r = rng.rng();
                (0..edge_count)
                    .map(|_| low + (high - low) * r.random::<f64>())
                    .collect()
            }
        };
        validate_times(&times, edge_count, Some(t))?;
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRound {
    pub t: usize,
    pub edges: Vec<usize>,
    pub times: Vec<f64>,
    pub paid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGameReport {
    pub rounds: Vec<PathRound>,
    pub total_paid: f64,
    pub best_path: Vec<usize>,
    /// Sum of revealed times along the best fixed path.
    pub best_path_cost: f64,
    pub regret: f64,
    /// Paid so far minus the best fixed path's revealed total so far, per round.
    pub regret_trajectory: Vec<f64>,
    /// `brute-force` or `shortest-path` when enumeration exceeded its guard.
    pub best_path_oracle: String,
}

/// Plays `rounds` periods of follow-the-perturbed-leader over paths. Initial edge costs in
/// `g` act as a prior on the leader; regret is measured on revealed times only.
pub fn run_online_path_game(
    g: &EdgeGraph,
    spec: &PerturbationSpec,
    source: &EdgeTimes,
    rounds: usize,
    rng: RngStream,
) -> Result<PathGameReport> {
    if rounds == 0 {
        return Err(Error::Config("round count must be at least 1".into()));
    }
    let m = g.edge_count();
    let mut state = g.clone();
    let mut revealed = vec![0.0; m];
    let mut total_paid = 0.0;
    let mut out = Vec::with_capacity(rounds);
    let mut trajectory = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let choice =
            perturbed_shortest_path(&state, spec, &mut rng.substream(purpose::NOISE, t as u64).rng())?;
        let times = source.times(t, m, rng.substream(purpose::EDGE_TIMES, t as u64))?;
        let paid: f64 = choice.edges.iter().map(|&e| times[e]).sum();
        total_paid += paid;
        state.add_times(&times)?;
        revealed.iter_mut().zip(&times).for_each(|(r, x)| *r += x);
        let best_so_far = shortest_path(g, &revealed)?.weight;
        trajectory.push(total_paid - best_so_far);
        out.push(PathRound {
            t,
            edges: choice.edges,
            times,
            paid,
        });
    }
    let (best, oracle) = match brute_force_with_guard(g, &revealed, ENUMERATION_GUARD) {
        Ok(p) => (p, "brute-force"),
        Err(Error::Capacity(_)) => (shortest_path(g, &revealed)?, "shortest-path"),
        Err(e) => return Err(e),
    };
    let regret = total_paid - best.weight;
    if let Some(last) = trajectory.last_mut() {
        *last = regret;
    }
    Ok(PathGameReport {
        rounds: out,
        total_paid,
        best_path_cost: best.weight,
        best_path: best.edges,
        regret,
        regret_trajectory: trajectory,
        best_path_oracle: oracle.to_string(),
    })
}

/// Random DAG on `node_count` nodes with source 0 and sink `node_count - 1`: a random
/// source-to-sink chain plus extra forward edges, `edge_count` edges in total.
pub fn random_dag<R: Rng + ?Sized>(node_count: usize, edge_count: usize, rng: &mut R) -> Result<EdgeGraph> {
    if node_count < 2 {
        return Err(Error::Graph("need at least 2 nodes".into()));
    }
    let mut edges = Vec::with_capacity(edge_count);
    // Chain through a random subset of the intermediate nodes, in increasing order.
    let mut at = 0;
    for v in 1..node_count - 1 {
        if rng.random::<bool>() {
            edges.push((at, v));
            at = v;
        }
    }
    edges.push((at, node_count - 1));
    while edges.len() < edge_count {
        let a = rng.random_range(0..node_count - 1);
        let b = rng.random_range(a + 1..node_count);
        edges.push((a, b));
    }
    // Shuffle edge ids so that id order carries no structure.
    for i in (1..edges.len()).rev() {
        let j = rng.random_range(0..=i);
        edges.swap(i, j);
    }
    EdgeGraph::new(node_count, edges, 0, node_count - 1)
}
