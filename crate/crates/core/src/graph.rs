//! Undirected simple graphs, the G(n,p) generator and BFS utilities.
//!
//! Graphs are stored in compressed sparse row form with every neighbor
//! list sorted ascending. Node identifiers are the dense range `0..n`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Node identifier. Dense in `0..n`; the natural order is the tie-break
/// order used throughout the crate.
pub type NodeId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: u64, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("malformed graph text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// Parameters of an Erdős–Rényi draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnpParams {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl GnpParams {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(GraphError::BadProbability(p));
        }
        Ok(GnpParams { n: n.max(1), p, seed })
    }
}

/// Immutable undirected simple graph.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    /// Adjacency bit matrix, kept only when it is no larger than `targets`.
    rows: Vec<u64>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n(), self.m())
    }
}

impl Graph {
    /// Builds a graph from an edge list. Edges may be given in either
    /// orientation; self-loops and repeated edges are errors.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for x in [u, v] {
                if x as usize >= n {
                    return Err(GraphError::NodeOutOfRange { node: x as u64, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            lists[u as usize].push(v);
            lists[v as usize].push(u);
        }
        for (u, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let (a, b) = (u as NodeId, w[0]);
                return Err(GraphError::DuplicateEdge(a.min(b), a.max(b)));
            }
        }
        Ok(Graph::from_sorted_lists(lists))
    }

    /// Same as [`Graph::from_edges`] but silently drops repeats and loops.
    pub fn from_edges_dedup<I>(n: usize, edges: I) -> Graph
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u != v && (u as usize) < n && (v as usize) < n {
                lists[u as usize].push(v);
                lists[v as usize].push(u);
            }
        }
        for list in lists.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Graph::from_sorted_lists(lists)
    }

    fn from_sorted_lists(lists: Vec<Vec<NodeId>>) -> Graph {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        for list in lists {
            targets.extend_from_slice(&list);
            offsets.push(targets.len());
        }
        Graph::from_csr(offsets, targets)
    }

    fn from_csr(offsets: Vec<usize>, targets: Vec<NodeId>) -> Graph {
        let n = offsets.len() - 1;
        let words = n.div_ceil(64);
        let mut rows = Vec::new();
        if n * words <= targets.len() {
            rows = vec![0u64; n * words];
            for u in 0..n {
                for &v in &targets[offsets[u]..offsets[u + 1]] {
                    rows[u * words + v as usize / 64] |= 1 << (v % 64);
                }
            }
        }
        Graph { offsets, targets, rows }
    }

    pub fn empty(n: usize) -> Graph {
        Graph::from_csr(vec![0; n + 1], Vec::new())
    }

    pub fn complete(n: usize) -> Graph {
        let n32 = n as NodeId;
        Graph::from_edges(n, (0..n32).flat_map(|u| (u + 1..n32).map(move |v| (u, v))))
            .expect("complete graph is simple")
    }

    pub fn path(n: usize) -> Graph {
        let n32 = n as NodeId;
        Graph::from_edges(n, (1..n32).map(|v| (v - 1, v))).expect("path is simple")
    }

    /// Cycle 0-1-...-(n-1)-0. Needs `n >= 3`.
    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "a cycle needs at least 3 nodes");
        let n32 = n as NodeId;
        Graph::from_edges(n, (0..n32).map(|v| (v, (v + 1) % n32))).expect("cycle is simple")
    }

    /// Star with center 0.
    pub fn star(n: usize) -> Graph {
        Graph::from_edges(n, (1..n as NodeId).map(|v| (0, v))).expect("star is simple")
    }

    pub fn petersen() -> Graph {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((i + 5, (i + 2) % 5 + 5));
        }
        Graph::from_edges(10, edges).expect("petersen is simple")
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n() as NodeId).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        if !self.rows.is_empty() {
            let words = self.n().div_ceil(64);
            return self.rows[u as usize * words + v as usize / 64] >> (v % 64) & 1 == 1;
        }
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Edges with `u < v` in ascending lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n() as NodeId)
            .flat_map(move |u| self.neighbors(u).iter().copied().filter(move |&v| v > u).map(move |v| (u, v)))
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.n() as NodeId
    }

    /// Text dump: `n m` then one `u v` line per edge, `u < v`, sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + self.m() * 12);
        let _ = writeln!(out, "{} {}", self.n(), self.m());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_pair = |line: usize, l: &str| -> Result<(u64, u64), GraphError> {
            let mut it = l.split_whitespace().map(|t| t.parse::<u64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(GraphError::Parse { line: line + 1, msg: format!("expected two integers, got {l:?}") }),
            }
        };
        let (hl, header) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "missing header".into() })?;
        let (n, m) = parse_pair(hl, header)?;
        let n = n as usize;
        let mut edges = Vec::with_capacity(m as usize);
        for (i, l) in lines {
            let (u, v) = parse_pair(i, l)?;
            for x in [u, v] {
                if x as usize >= n {
                    return Err(GraphError::NodeOutOfRange { node: x, n });
                }
            }
            edges.push((u as NodeId, v as NodeId));
        }
        if edges.len() as u64 != m {
            return Err(GraphError::Parse {
                line: 1,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n, edges)
    }

    /// BFS distances from `root`; `None` marks unreachable nodes.
    pub fn bfs_levels(&self, root: NodeId) -> Vec<Option<u32>> {
        bfs_filtered(self, root, |_| true)
    }

    /// Largest BFS distance from `v`, or `None` if some node is unreachable.
    pub fn eccentricity(&self, v: NodeId) -> Option<u32> {
        let levels = self.bfs_levels(v);
        levels.iter().try_fold(0, |acc, l| l.map(|d| acc.max(d)))
    }

    /// Diameter, or `None` for a disconnected graph.
    pub fn diameter(&self) -> Option<u32> {
        self.nodes().try_fold(0, |acc, v| self.eccentricity(v).map(|e| acc.max(e)))
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.eccentricity(0).is_some()
    }

    /// Restriction to `members`. Membership outside `0..n` is ignored.
    pub fn induced<'g>(&'g self, members: &[NodeId]) -> InducedSubgraph<'g> {
        let mut member = vec![false; self.n()];
        let mut list: Vec<NodeId> = members.iter().copied().filter(|&v| (v as usize) < self.n()).collect();
        list.sort_unstable();
        list.dedup();
        for &v in &list {
            member[v as usize] = true;
        }
        InducedSubgraph { graph: self, member, members: list }
    }
}

fn bfs_filtered(g: &Graph, root: NodeId, keep: impl Fn(NodeId) -> bool) -> Vec<Option<u32>> {
    let mut level = vec![None; g.n()];
    if (root as usize) >= g.n() || !keep(root) {
        return level;
    }
    level[root as usize] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let d = level[u as usize].unwrap_or(0);
        for &w in g.neighbors(u) {
            if level[w as usize].is_none() && keep(w) {
                level[w as usize] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// Draws G(n,p). Row `u` uses its own ChaCha stream, so the coin for the
/// pair `(u, v)` with `u < v` depends only on `(seed, u, v)`.
pub fn generate_gnp(params: GnpParams) -> Graph {
    let n = params.n;
    let mut upper: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    if params.p > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for u in 0..n {
            rng.set_stream(u as u64);
            rng.set_word_pos(0);
            let row = &mut upper[u];
            for (v, d) in degree.iter_mut().enumerate().skip(u + 1) {
                if rng.gen_bool(params.p) {
                    row.push(v as NodeId);
                    *d += 1;
                }
            }
            degree[u] += row.len();
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for d in &degree {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut targets = vec![0 as NodeId; offsets[n]];
    let mut fill: Vec<usize> = offsets[..n].to_vec();
    // Lower neighbors arrive in ascending order of u, then the row's own
    // upper neighbors follow, so every list ends up sorted.
    for u in 0..n {
        let row = std::mem::take(&mut upper[u]);
        for &v in &row {
            targets[fill[v as usize]] = u as NodeId;
            fill[v as usize] += 1;
        }
        let start = fill[u];
        targets[start..start + row.len()].copy_from_slice(&row);
        fill[u] += row.len();
    }
    Graph::from_csr(offsets, targets)
}

/// Read-only restriction of a graph to a member set.
#[derive(Clone, Debug)]
pub struct InducedSubgraph<'g> {
    graph: &'g Graph,
    member: Vec<bool>,
    members: Vec<NodeId>,
}

impl<'g> InducedSubgraph<'g> {
    pub fn parent(&self) -> &'g Graph {
        self.graph
    }

    /// Members in ascending order.
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.member.get(v as usize).copied().unwrap_or(false)
    }

    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let inside = self.contains(u);
        self.graph.neighbors(u).iter().copied().filter(move |&w| inside && self.member[w as usize])
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.neighbors(u).count()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.contains(u) && self.contains(v) && self.graph.has_edge(u, v)
    }

    /// Internal edges with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.members.iter().flat_map(|&u| self.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v))).collect()
    }

    pub fn bfs_levels(&self, root: NodeId) -> Vec<Option<u32>> {
        bfs_filtered(self.graph, root, |w| self.member[w as usize])
    }

    /// Eccentricity of `v` inside the view; `None` if some member is
    /// unreachable or `v` is not a member.
    pub fn eccentricity(&self, v: NodeId) -> Option<u32> {
        if !self.contains(v) {
            return None;
        }
        let levels = self.bfs_levels(v);
        self.members.iter().try_fold(0, |acc, &w| levels[w as usize].map(|d| acc.max(d)))
    }

    pub fn diameter(&self) -> Option<u32> {
        self.members.iter().try_fold(0, |acc, &v| self.eccentricity(v).map(|e| acc.max(e)))
    }

    pub fn is_connected(&self) -> bool {
        self.members.first().is_none_or(|&v| self.eccentricity(v).is_some())
    }

    /// Copies the view into a standalone graph on the same id range.
    pub fn to_graph(&self) -> Graph {
        Graph::from_edges(self.graph.n(), self.edges()).expect("restriction of a simple graph is simple")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_and_empty() {
        let g = generate_gnp(GnpParams::new(4, 1.0, 9).unwrap());
        assert_eq!(g.m(), 6);
        assert_eq!(g, Graph::complete(4));
        assert_eq!(generate_gnp(GnpParams::new(100, 0.0, 3).unwrap()).m(), 0);
        assert_eq!(generate_gnp(GnpParams::new(1, 0.5, 3).unwrap()).m(), 0);
    }

    #[test]
    fn bad_probability_rejected() {
        assert!(GnpParams::new(10, 1.5, 0).is_err());
        assert!(GnpParams::new(10, -0.1, 0).is_err());
    }

    #[test]
    fn gnp_edge_count_concentrates() {
        let g = generate_gnp(GnpParams::new(2000, 0.05, 7).unwrap());
        let pairs = 2000.0 * 1999.0 / 2.0;
        let mean = pairs * 0.05;
        let sigma = (pairs * 0.05 * 0.95f64).sqrt();
        assert!((g.m() as f64 - mean).abs() < 3.0 * sigma, "m = {}", g.m());
    }

    #[test]
    fn gnp_structure_is_valid() {
        let g = generate_gnp(GnpParams::new(300, 0.2, 5).unwrap());
        for u in g.nodes() {
            let nb = g.neighbors(u);
            assert!(nb.windows(2).all(|w| w[0] < w[1]));
            for &v in nb {
                assert_ne!(u, v);
                assert!(g.neighbors(v).binary_search(&u).is_ok());
            }
        }
        assert_eq!(g, generate_gnp(GnpParams::new(300, 0.2, 5).unwrap()));
        assert_ne!(g, generate_gnp(GnpParams::new(300, 0.2, 6).unwrap()));
    }

    #[test]
    fn gnp_mean_edge_count_over_seeds() {
        let total: usize = (0..100).map(|s| generate_gnp(GnpParams::new(500, 0.1, s).unwrap()).m()).sum();
        let mean = total as f64 / 100.0;
        let expected = 500.0 * 499.0 / 2.0 * 0.1;
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean}");
    }

    #[test]
    fn pair_coin_depends_only_on_pair() {
        // The prefix of a larger draw agrees with the smaller draw on rows
        // it shares: row streams are independent of n.
        let small = generate_gnp(GnpParams::new(50, 0.3, 17).unwrap());
        let large = generate_gnp(GnpParams::new(80, 0.3, 17).unwrap());
        for (u, v) in small.edges() {
            assert!(large.has_edge(u, v));
        }
        for (u, v) in large.edges().filter(|&(u, v)| u < 50 && v < 50) {
            assert!(small.has_edge(u, v));
        }
    }

    #[test]
    fn induced_examples() {
        let k4 = Graph::complete(4);
        assert_eq!(k4.induced(&[0, 1]).edges(), vec![(0, 1)]);
        let p = Graph::path(4);
        let v = p.induced(&[0, 2]);
        assert_eq!(v.members().len(), 2);
        assert!(v.edges().is_empty());
        let empty = p.induced(&[]);
        assert!(empty.edges().is_empty());
        assert!(empty.is_connected());
    }

    #[test]
    fn bit_rows_match_lists() {
        for (n, p) in [(70, 0.9), (70, 0.02), (130, 0.5)] {
            let g = generate_gnp(GnpParams::new(n, p, 5).unwrap());
            for u in g.nodes() {
                for v in g.nodes() {
                    assert_eq!(g.has_edge(u, v), g.neighbors(u).contains(&v), "{n} {p} {u} {v}");
                }
            }
        }
        assert!(!Graph::complete(70).rows.is_empty());
        assert!(Graph::cycle(200).rows.is_empty());
    }

    #[test]
    fn induced_matches_filter_oracle() {
        let g = generate_gnp(GnpParams::new(200, 0.3, 3).unwrap());
        let evens: Vec<NodeId> = (0..200).step_by(2).collect();
        let view = g.induced(&evens);
        let oracle: Vec<(NodeId, NodeId)> = g.edges().filter(|&(u, v)| u % 2 == 0 && v % 2 == 0).collect();
        assert_eq!(view.edges(), oracle);
    }

    #[test]
    fn bfs_and_diameter_examples() {
        let k4 = Graph::complete(4);
        assert_eq!(k4.bfs_levels(0), vec![Some(0), Some(1), Some(1), Some(1)]);
        assert_eq!(Graph::path(4).bfs_levels(0), vec![Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(k4.diameter(), Some(1));
        let two_edges = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(two_edges.diameter(), None);
        assert_eq!(two_edges.bfs_levels(0)[2], None);
        assert_eq!(Graph::cycle(10).diameter(), Some(5));
        assert_eq!(Graph::petersen().diameter(), Some(2));
    }

    #[test]
    fn text_round_trip() {
        let g = generate_gnp(GnpParams::new(40, 0.2, 1).unwrap());
        let text = g.to_text();
        assert!(text.starts_with(&format!("{} {}\n", g.n(), g.m())));
        assert_eq!(Graph::from_text(&text).unwrap(), g);
        assert_eq!(Graph::path(3).to_text(), "3 2\n0 1\n1 2\n");
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert_eq!(Graph::from_edges(3, [(1, 1)]), Err(GraphError::SelfLoop(1)));
        assert_eq!(Graph::from_edges(3, [(0, 1), (1, 0)]), Err(GraphError::DuplicateEdge(0, 1)));
        assert!(Graph::from_edges(3, [(0, 5)]).is_err());
        assert!(Graph::from_text("3 1\n0 1\n1 2\n").is_err());
    }
}
