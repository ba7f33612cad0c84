//! Global Hamiltonian-cycle checks and small-graph oracles.
//!
//! A [`Certificate`] is what the nodes output: for every node, the two
//! neighbors it believes are its cycle neighbors.

use std::fmt;

use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Per-node pair of declared cycle neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    links: Vec<(NodeId, NodeId)>,
}

/// Why [`check_certificate`] rejected.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("node {0} does not declare two distinct cycle edges")]
    DegreeViolation(NodeId),
    #[error("({0}, {1}) is not an edge of the graph")]
    NonEdge(NodeId, NodeId),
    #[error("declared edges form {0} cycles")]
    MultipleCycles(usize),
    #[error("{0} declares {1} but {1} does not declare {0}")]
    Inconsistent(NodeId, NodeId),
    #[error("certificate covers {got} nodes, graph has {want}")]
    WrongSize { got: usize, want: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertificateParseError {
    #[error("line {line}: expected `node e1_other e2_other`")]
    BadLine { line: usize },
    #[error("line {line}: node {node} listed out of order")]
    OutOfOrder { line: usize, node: NodeId },
}

impl Certificate {
    /// Links of a cycle given as a node sequence (wrapping around).
    pub fn from_cycle(order: &[NodeId]) -> Certificate {
        let n = order.len();
        let mut links = vec![(0, 0); n];
        for (i, &v) in order.iter().enumerate() {
            let prev = order[(i + n - 1) % n];
            let next = order[(i + 1) % n];
            if (v as usize) < n {
                links[v as usize] = (prev, next);
            }
        }
        Certificate { links }
    }

    pub fn from_links(links: Vec<(NodeId, NodeId)>) -> Certificate {
        Certificate { links }
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Walks the declared cycle from node 0. Only meaningful for an
    /// accepted certificate.
    pub fn cycle_order(&self) -> Vec<NodeId> {
        let n = self.links.len();
        let mut order = Vec::with_capacity(n);
        if n == 0 {
            return order;
        }
        let (mut prev, mut cur) = (0, 0);
        for _ in 0..n {
            order.push(cur);
            let (a, b) = self.links[cur as usize];
            let next = if a != prev || order.len() == 1 { a } else { b };
            prev = cur;
            cur = next;
        }
        order
    }

    /// One line per node: `node e1_other e2_other`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (v, &(a, b)) in self.links.iter().enumerate() {
            s.push_str(&format!("{v} {a} {b}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Certificate, CertificateParseError> {
        let mut links = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let nums: Vec<NodeId> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| CertificateParseError::BadLine { line: i + 1 }))
                .collect::<Result<_, _>>()?;
            let [v, a, b] = nums[..] else {
                return Err(CertificateParseError::BadLine { line: i + 1 });
            };
            if v as usize != links.len() {
                return Err(CertificateParseError::OutOfOrder { line: i + 1, node: v });
            }
            links.push((a, b));
        }
        Ok(Certificate { links })
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Accepts iff every node declares two distinct graph edges, declarations
/// agree at both ends, and the edges form one cycle through all nodes.
pub fn check_certificate(g: &Graph, cert: &Certificate) -> Result<(), Rejection> {
    let n = g.n();
    if cert.len() != n {
        return Err(Rejection::WrongSize { got: cert.len(), want: n });
    }
    for (v, &(a, b)) in cert.links.iter().enumerate() {
        let v = v as NodeId;
        if a == b || a == v || b == v || a as usize >= n || b as usize >= n {
            return Err(Rejection::DegreeViolation(v));
        }
    }
    for (v, &(a, b)) in cert.links.iter().enumerate() {
        let v = v as NodeId;
        for w in [a, b] {
            if !g.has_edge(v, w) {
                return Err(Rejection::NonEdge(v.min(w), v.max(w)));
            }
            let (x, y) = cert.links[w as usize];
            if x != v && y != v {
                return Err(Rejection::Inconsistent(v, w));
            }
        }
    }
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        cycles += 1;
        let (mut prev, mut cur) = (s as NodeId, cert.links[s].0);
        seen[s] = true;
        while cur as usize != s {
            seen[cur as usize] = true;
            let (a, b) = cert.links[cur as usize];
            let next = if a != prev { a } else { b };
            prev = cur;
            cur = next;
        }
    }
    if cycles == 1 {
        Ok(())
    } else {
        Err(Rejection::MultipleCycles(cycles))
    }
}

/// Largest graph [`brute_force_hamiltonian`] accepts.
pub const BRUTE_FORCE_MAX_N: usize = 14;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("exhaustive search is limited to {max} nodes, got {n}")]
pub struct TooLarge {
    pub n: usize,
    pub max: usize,
}

/// Exact backtracking search. Returns a cycle as a node order starting at
/// 0, or `None` if the graph has no Hamiltonian cycle.
pub fn brute_force_hamiltonian(g: &Graph) -> Result<Option<Vec<NodeId>>, TooLarge> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(TooLarge { n, max: BRUTE_FORCE_MAX_N });
    }
    if n < 3 || g.nodes().any(|v| g.degree(v) < 2) {
        return Ok(None);
    }
    let mut path = vec![0];
    let mut on_path = 1u32;
    Ok(if extend(g, &mut path, &mut on_path) { Some(path) } else { None })
}

fn extend(g: &Graph, path: &mut Vec<NodeId>, on_path: &mut u32) -> bool {
    let n = g.n();
    let last = *path.last().expect("nonempty");
    if path.len() == n {
        return g.has_edge(last, 0);
    }
    for &w in g.neighbors(last) {
        if *on_path & (1 << w) != 0 {
            continue;
        }
        // Prune: an unvisited node must keep at least one way in and out.
        path.push(w);
        *on_path |= 1 << w;
        let dead = g.nodes().any(|x| {
            *on_path & (1 << x) == 0
                && g.neighbors(x).iter().filter(|&&y| *on_path & (1 << y) == 0 || y == w || y == 0).count() < 2
        });
        if !dead && extend(g, path, on_path) {
            return true;
        }
        path.pop();
        *on_path &= !(1 << w);
    }
    false
}

/// Tries every cyclic order with node 0 first and checks each as a
/// certificate. Exponential; intended for n ≤ 8.
pub fn naive_hamiltonian(g: &Graph) -> bool {
    let n = g.n();
    if n < 3 {
        return false;
    }
    let mut rest: Vec<NodeId> = (1..n as NodeId).collect();
    permute(&mut rest, 0, &mut |perm| {
        let mut order = vec![0];
        order.extend_from_slice(perm);
        check_certificate(g, &Certificate::from_cycle(&order)).is_ok()
    })
}

fn permute(xs: &mut [NodeId], k: usize, f: &mut impl FnMut(&[NodeId]) -> bool) -> bool {
    if k == xs.len() {
        return f(xs);
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        if permute(xs, k + 1, f) {
            return true;
        }
        xs.swap(k, i);
    }
    false
}

/// Whether the declared edge set of `cert` is one n-cycle in `g`, decided
/// by comparing with every cyclic order of the nodes.
pub fn naive_accepts(g: &Graph, cert: &Certificate) -> bool {
    let n = g.n();
    if cert.len() != n || n < 3 {
        return false;
    }
    let declared = edge_set(cert);
    if declared.is_none() {
        return false;
    }
    let declared = declared.expect("checked");
    let mut rest: Vec<NodeId> = (1..n as NodeId).collect();
    permute(&mut rest, 0, &mut |perm| {
        let mut order = vec![0];
        order.extend_from_slice(perm);
        let mut edges: Vec<(NodeId, NodeId)> = (0..n)
            .map(|i| {
                let (a, b) = (order[i], order[(i + 1) % n]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges == declared && edges.iter().all(|&(a, b)| g.has_edge(a, b))
    })
}

/// The declared undirected edges, if the declarations are symmetric.
fn edge_set(cert: &Certificate) -> Option<Vec<(NodeId, NodeId)>> {
    let mut directed: Vec<(NodeId, NodeId)> = Vec::new();
    for (v, &(a, b)) in cert.links().iter().enumerate() {
        directed.push((v as NodeId, a));
        directed.push((v as NodeId, b));
    }
    let mut und: Vec<(NodeId, NodeId)> = directed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    und.sort_unstable();
    // Every undirected edge must be declared exactly once from each end.
    if und.chunks(2).any(|c| c.len() != 2 || c[0] != c[1]) {
        return None;
    }
    let mut out: Vec<(NodeId, NodeId)> = und.chunks(2).map(|c| c[0]).collect();
    out.dedup();
    if out.len() != cert.len() {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_graph_accepted() {
        let g = Graph::cycle(7);
        let order: Vec<NodeId> = (0..7).collect();
        assert_eq!(check_certificate(&g, &Certificate::from_cycle(&order)), Ok(()));
    }

    #[test]
    fn two_triangles_rejected() {
        let g = Graph::complete(6);
        let cert = Certificate::from_links(vec![(1, 2), (0, 2), (0, 1), (4, 5), (3, 5), (3, 4)]);
        assert_eq!(check_certificate(&g, &cert), Err(Rejection::MultipleCycles(2)));
        assert!(!naive_accepts(&g, &cert));
    }

    #[test]
    fn rejection_reasons() {
        let g = Graph::cycle(4);
        let bad_edge = Certificate::from_links(vec![(1, 2), (0, 2), (1, 3), (2, 0)]);
        assert!(matches!(check_certificate(&g, &bad_edge), Err(Rejection::NonEdge(..))));
        let g = Graph::complete(4);
        let asym = Certificate::from_links(vec![(1, 3), (0, 2), (1, 3), (2, 1)]);
        assert_eq!(check_certificate(&g, &asym), Err(Rejection::Inconsistent(0, 3)));
        let repeated = Certificate::from_links(vec![(1, 1), (0, 2), (1, 3), (2, 0)]);
        assert_eq!(check_certificate(&g, &repeated), Err(Rejection::DegreeViolation(0)));
    }

    #[test]
    fn petersen_and_k5() {
        assert_eq!(brute_force_hamiltonian(&Graph::petersen()).unwrap(), None);
        let k5 = Graph::complete(5);
        let hc = brute_force_hamiltonian(&k5).unwrap().unwrap();
        assert_eq!(check_certificate(&k5, &Certificate::from_cycle(&hc)), Ok(()));
    }

    #[test]
    fn size_guard() {
        assert_eq!(brute_force_hamiltonian(&Graph::cycle(15)), Err(TooLarge { n: 15, max: 14 }));
    }

    #[test]
    fn certificate_text_round_trip() {
        let cert = Certificate::from_cycle(&[0, 2, 1, 3]);
        let text = cert.to_text();
        assert_eq!(text, "0 3 2\n1 2 3\n2 0 1\n3 1 0\n");
        assert_eq!(Certificate::from_text(&text).unwrap(), cert);
        assert_eq!(cert.cycle_order(), vec![0, 3, 1, 2]);
        assert!(Certificate::from_text("0 1\n").is_err());
        assert!(Certificate::from_text("1 0 2\n").is_err());
    }
}
