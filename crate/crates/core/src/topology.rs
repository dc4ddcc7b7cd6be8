//! Inter-datacenter network model: an undirected graph whose links carry one
//! capacity per direction, plus file I/O, built-in experiment topologies and
//! loopless k-shortest-path enumeration.
//!
//! Links are stored undirected but every edge exposes two directed
//! *channels*; capacity is enforced per channel because transfers in opposite
//! directions do not share bandwidth on a full-duplex link. Channel ids are
//! `2 * edge + dir` with dir 0 for u->v (as stored) and dir 1 for v->u.

use crate::scalar::Scalar;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;
/// Directed view of an edge: `2 * edge + dir`.
pub type ChannelId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<F> {
    pub u: NodeId,
    pub v: NodeId,
    /// Capacity in volume-units per timeslot, per direction.
    pub capacity: F,
}

#[derive(Debug, Clone)]
struct Adjacent {
    neighbor: NodeId,
    /// Channel leaving this node towards `neighbor`.
    channel: ChannelId,
}

/// Immutable network graph; safe to share across concurrent simulations.
#[derive(Debug, Clone)]
pub struct Topology<F> {
    nodes: usize,
    edges: Vec<Edge<F>>,
    /// Per node, neighbors sorted by ascending id. The order is part of the
    /// determinism contract: BFS visits neighbors in this order.
    adjacency: Vec<Vec<Adjacent>>,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate edge {u}-{v}")]
    DuplicateEdge { line: usize, u: NodeId, v: NodeId },
    #[error("line {line}: node id {id} out of range (n = {n})")]
    DanglingNode { line: usize, id: usize, n: usize },
    #[error("line {line}: capacity must be positive, got {cap}")]
    NonPositiveCapacity { line: usize, cap: f64 },
    #[error("line {line}: self-loop {u}-{u} rejected")]
    SelfLoop { line: usize, u: NodeId },
    #[error("synthetic topology needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl<F: Scalar> Topology<F> {
    /// Builds a topology from an undirected edge list. Panics on structural
    /// errors; use [`parse_topology`] for validated input.
    pub fn from_edges(nodes: usize, edges: Vec<Edge<F>>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes];
        for (idx, e) in edges.iter().enumerate() {
            assert!(e.u != e.v && e.u < nodes && e.v < nodes, "bad edge {}-{}", e.u, e.v);
            assert!(e.capacity > F::zero(), "non-positive capacity");
            adjacency[e.u].push(Adjacent { neighbor: e.v, channel: 2 * idx });
            adjacency[e.v].push(Adjacent { neighbor: e.u, channel: 2 * idx + 1 });
        }
        for list in &mut adjacency {
            list.sort_by_key(|a| a.neighbor);
        }
        Topology { nodes, edges, adjacency }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_channels(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<F>] {
        &self.edges
    }

    /// Neighbors of `v` in ascending id order, with the outgoing channel.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, ChannelId)> + '_ {
        self.adjacency[v].iter().map(|a| (a.neighbor, a.channel))
    }

    pub fn edge_of_channel(&self, ch: ChannelId) -> &Edge<F> {
        &self.edges[ch / 2]
    }

    /// Capacity of a directed channel (shared with its reverse by value, not
    /// by accounting).
    pub fn channel_capacity(&self, ch: ChannelId) -> F {
        self.edges[ch / 2].capacity
    }

    /// Per-channel capacities, indexed by channel id.
    pub fn channel_capacities(&self) -> Vec<F> {
        let mut caps = Vec::with_capacity(self.num_channels());
        for e in &self.edges {
            caps.push(e.capacity);
            caps.push(e.capacity);
        }
        caps
    }

    /// Channel from `a` to `b`, if the edge exists.
    pub fn channel_between(&self, a: NodeId, b: NodeId) -> Option<ChannelId> {
        self.adjacency[a].iter().find(|adj| adj.neighbor == b).map(|adj| adj.channel)
    }

    /// Endpoints of a channel in travel order (from, to).
    pub fn channel_endpoints(&self, ch: ChannelId) -> (NodeId, NodeId) {
        let e = &self.edges[ch / 2];
        if ch % 2 == 0 {
            (e.u, e.v)
        } else {
            (e.v, e.u)
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes == 0 {
            return true;
        }
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for (w, _) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.nodes
    }

    /// Hop distance by plain BFS, ignoring loads. None if unreachable.
    pub fn bfs_distance(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.nodes];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            if v == dst {
                return Some(dist[v]);
            }
            for (w, _) in self.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Renders the topology in the text format accepted by [`parse_topology`].
    pub fn to_file_format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.nodes);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.capacity);
        }
        out
    }
}

/// Parses the plain-text topology format: first non-comment line is the node
/// count, every following non-comment line is `u v capacity`. `#` starts a
/// comment.
pub fn parse_topology<F: Scalar>(text: &str) -> Result<Topology<F>, TopologyError> {
    let mut nodes: Option<usize> = None;
    let mut edges: Vec<Edge<F>> = Vec::new();
    let mut seen_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut edge_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match nodes {
            None => {
                let n: usize = line.parse().map_err(|_| TopologyError::Parse {
                    line: line_no,
                    msg: format!("expected node count, got {line:?}"),
                })?;
                nodes = Some(n);
            }
            Some(n) => {
                let mut it = line.split_whitespace();
                let parse_id = |tok: Option<&str>, what: &str| -> Result<usize, TopologyError> {
                    tok.ok_or_else(|| TopologyError::Parse {
                        line: line_no,
                        msg: format!("missing {what}"),
                    })?
                    .parse()
                    .map_err(|_| TopologyError::Parse { line: line_no, msg: format!("bad {what}") })
                };
                let u = parse_id(it.next(), "source node")?;
                let v = parse_id(it.next(), "destination node")?;
                let cap: f64 = it
                    .next()
                    .ok_or_else(|| TopologyError::Parse { line: line_no, msg: "missing capacity".into() })?
                    .parse()
                    .map_err(|_| TopologyError::Parse { line: line_no, msg: "bad capacity".into() })?;
                if it.next().is_some() {
                    return Err(TopologyError::Parse { line: line_no, msg: "trailing tokens".into() });
                }
                if u == v {
                    return Err(TopologyError::SelfLoop { line: line_no, u });
                }
                for id in [u, v] {
                    if id >= n {
                        return Err(TopologyError::DanglingNode { line: line_no, id, n });
                    }
                }
                if cap <= 0.0 {
                    return Err(TopologyError::NonPositiveCapacity { line: line_no, cap });
                }
                let key = (u.min(v), u.max(v));
                if !seen_pairs.insert(key) {
                    return Err(TopologyError::DuplicateEdge { line: line_no, u, v });
                }
                edges.push(Edge { u, v, capacity: F::from_f64_lossy(cap) });
                edge_lines.push(line_no);
            }
        }
    }

    let n = nodes.ok_or(TopologyError::Parse { line: 0, msg: "empty topology file".into() })?;
    let topo = Topology::from_edges(n, edges);
    if !topo.is_connected() {
        eprintln!("warning: topology is not connected ({n} nodes, {} edges)", topo.num_edges());
    }
    Ok(topo)
}

/// Loads and validates a topology file.
pub fn load_topology<F: Scalar>(path: impl AsRef<Path>) -> Result<Topology<F>, TopologyError> {
    let text = std::fs::read_to_string(path)?;
    parse_topology(&text)
}

/// The 12-node / 19-link evaluation WAN. The operator never published the
/// adjacency, so this is an approximate reconstruction (ring of 12 plus seven
/// two-hop chords) with uniform capacity 1.0; results on it are trend
/// targets, not exact reproductions.
pub fn gscale<F: Scalar>() -> Topology<F> {
    let one = F::one();
    let mut edges: Vec<Edge<F>> = (0..12).map(|i| Edge { u: i, v: (i + 1) % 12, capacity: one }).collect();
    for i in 0..7 {
        edges.push(Edge { u: i, v: i + 2, capacity: one });
    }
    Topology::from_edges(12, edges)
}

/// Synthetic experiment topology: ring 0..n-1 plus chords (i, i+2) for
/// i < n-3, so every neighbor is at most two ring-hops away and M = 2n-3
/// (7/17/27/37 edges for n = 5/10/15/20). Node labels are permuted by the
/// seed; the edge structure is fixed. Uniform capacity 1.0.
pub fn generate_synthetic<F: Scalar>(n: usize, seed: u64) -> Result<Topology<F>, TopologyError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if n < 3 {
        return Err(TopologyError::TooFewNodes(n));
    }
    let mut labels: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);
    let one = F::one();
    let mut edges: Vec<Edge<F>> = (0..n)
        .map(|i| Edge { u: labels[i], v: labels[(i + 1) % n], capacity: one })
        .collect();
    for i in 0..n.saturating_sub(3) {
        edges.push(Edge { u: labels[i], v: labels[i + 2], capacity: one });
    }
    Ok(Topology::from_edges(n, edges))
}

/// A loop-free path as a node sequence; length is `nodes.len() - 1` hops.
pub type NodePath = Vec<NodeId>;

/// Lexicographically smallest minimum-hop path from `src` to `dst` that
/// avoids `banned_nodes` and `banned_edges` (unordered node pairs).
fn constrained_shortest(
    adjacency: &[Vec<NodeId>],
    src: NodeId,
    dst: NodeId,
    banned_nodes: &[bool],
    banned_edges: &BTreeSet<(NodeId, NodeId)>,
) -> Option<NodePath> {
    let n = adjacency.len();
    if banned_nodes[src] || banned_nodes[dst] {
        return None;
    }
    let allowed = |a: NodeId, b: NodeId| !banned_edges.contains(&(a.min(b), a.max(b)));
    // BFS from dst gives remaining-hops labels.
    let mut dist = vec![usize::MAX; n];
    dist[dst] = 0;
    let mut queue = std::collections::VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if dist[w] == usize::MAX && !banned_nodes[w] && allowed(v, w) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[src] == usize::MAX {
        return None;
    }
    // Greedy walk: always the smallest neighbor id that stays on a shortest
    // path, which yields the lex-smallest node sequence among min-hop paths.
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst {
        let next = adjacency[cur]
            .iter()
            .copied()
            .find(|&w| !banned_nodes[w] && allowed(cur, w) && dist[w] + 1 == dist[cur])
            .expect("dist chain is consistent");
        path.push(next);
        cur = next;
    }
    Some(path)
}

/// Loopless k-shortest-paths (deviation-based enumeration) under the hop
/// metric, ties broken by lexicographic node sequence. Returns fewer than `k`
/// paths when fewer simple paths exist; the prefix of the list is stable in
/// `k`.
pub fn k_shortest_paths<F: Scalar>(
    topo: &Topology<F>,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Vec<NodePath> {
    assert!(src != dst, "k_shortest_paths requires src != dst");
    if k == 0 {
        return Vec::new();
    }
    let adjacency: Vec<Vec<NodeId>> =
        (0..topo.num_nodes()).map(|v| topo.neighbors(v).map(|(w, _)| w).collect()).collect();
    let no_nodes = vec![false; topo.num_nodes()];
    let no_edges = BTreeSet::new();

    let first = match constrained_shortest(&adjacency, src, dst, &no_nodes, &no_edges) {
        Some(p) => p,
        None => return Vec::new(),
    };
    let mut accepted: Vec<NodePath> = vec![first];
    // Ordered by (hops, node sequence); Vec's Ord is lexicographic so the
    // (len, path) key is exactly the documented ranking.
    let mut candidates: BTreeSet<(usize, NodePath)> = BTreeSet::new();

    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for i in 0..prev.len() - 1 {
            let spur = prev[i];
            let root = &prev[..=i];
            let mut banned_edges = BTreeSet::new();
            for p in &accepted {
                if p.len() > i + 1 && p[..=i] == *root {
                    let (a, b) = (p[i], p[i + 1]);
                    banned_edges.insert((a.min(b), a.max(b)));
                }
            }
            let mut banned_nodes = vec![false; topo.num_nodes()];
            for &v in &root[..i] {
                banned_nodes[v] = true;
            }
            if let Some(spur_path) = constrained_shortest(&adjacency, spur, dst, &banned_nodes, &banned_edges) {
                let mut cand = root[..i].to_vec();
                cand.extend(spur_path);
                if !accepted.contains(&cand) {
                    candidates.insert((cand.len(), cand));
                }
            }
        }
        match candidates.pop_first() {
            Some((_, p)) => accepted.push(p),
            None => break,
        }
    }
    accepted
}

/// Exhaustive DFS enumeration of every simple path from `src` to `dst`,
/// sorted by (hops, node sequence). Intended for small graphs and test
/// oracles.
pub fn all_simple_paths<F: Scalar>(topo: &Topology<F>, src: NodeId, dst: NodeId) -> Vec<NodePath> {
    let mut out = Vec::new();
    let mut on_path = vec![false; topo.num_nodes()];
    let mut path = vec![src];
    on_path[src] = true;
    fn dfs<F: Scalar>(
        topo: &Topology<F>,
        dst: NodeId,
        on_path: &mut Vec<bool>,
        path: &mut NodePath,
        out: &mut Vec<NodePath>,
    ) {
        let cur = *path.last().unwrap();
        if cur == dst {
            out.push(path.clone());
            return;
        }
        for (w, _) in topo.neighbors(cur) {
            if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                dfs(topo, dst, on_path, path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    dfs(topo, dst, &mut on_path, &mut path, &mut out);
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    out
}

/// Maps a node path onto the directed channels it traverses.
pub fn path_channels<F: Scalar>(topo: &Topology<F>, path: &[NodeId]) -> Vec<ChannelId> {
    path.windows(2)
        .map(|w| topo.channel_between(w[0], w[1]).expect("path follows existing edges"))
        .collect()
}
