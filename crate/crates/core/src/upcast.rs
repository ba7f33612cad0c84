//! Gathering a sparse sample at one node and solving it there.
//!
//! The minimum id becomes the root of a BFS tree with random parents and
//! preorder labels. Every node samples `min(⌈c′ ln n⌉, deg)` incident
//! edges without replacement and sends them up the tree, each record
//! carrying the sender's label; a tree edge carries one record per round.
//! The root runs the sequential rotation on the union of the samples and
//! sends each node its two cycle neighbors, routed down by label interval.

use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::graph::{Graph, NodeId};
use crate::rotation::{sequential_rotation_solve, NodeStreams};
use crate::runtime::programs::{elect_leaders, SpanningTree, TreeConfig};
use crate::runtime::{
    step_budget, Context, FailureReason, Message, MessageKind, Network, NodeProgram, SimulationReport,
};
use crate::verify::Certificate;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpcastOptions {
    /// Sample `⌈c_prime · ln n⌉` edges per node.
    pub c_prime: f64,
    /// Solver budget is `⌈step_mult · n ln n⌉` steps.
    pub step_mult: f64,
    pub transcript: bool,
}

impl Default for UpcastOptions {
    fn default() -> Self {
        UpcastOptions { c_prime: 3.0, step_mult: 7.0, transcript: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpcastTrace {
    pub root: NodeId,
    pub tree_depth: u32,
    /// Records that reached the root, duplicates included.
    pub records: u64,
    /// Distinct edges in the sampled graph.
    pub sampled_edges: usize,
}

#[derive(Clone, Debug)]
pub struct UpcastRun {
    pub report: SimulationReport,
    pub certificate: Option<Certificate>,
    pub trace: UpcastTrace,
    pub transcript: Option<Vec<String>>,
}

/// Edges sampled by a node of degree `deg`.
pub fn sample_size(n: usize, deg: usize, c_prime: f64) -> usize {
    ((c_prime * (n.max(2) as f64).ln()).ceil() as usize).min(deg)
}

#[derive(Default)]
struct Collect {
    is_root: bool,
    parent: Option<NodeId>,
    label: u32,
    take: usize,
    queue: VecDeque<(NodeId, NodeId, u32)>,
    /// Root only: every record received, and the label of each node.
    edges: Vec<(NodeId, NodeId)>,
    labels: Vec<Option<u32>>,
}

impl Collect {
    fn accept(&mut self, ctx: &mut Context<'_, '_>, rec: (NodeId, NodeId, u32)) {
        ctx.charge(1);
        if self.is_root {
            self.edges.push((rec.0, rec.1));
            let slot = &mut self.labels[rec.0 as usize];
            if slot.is_none() {
                *slot = Some(rec.2);
                ctx.charge(1);
            }
        } else {
            self.queue.push_back(rec);
        }
    }

    fn forward(&mut self, ctx: &mut Context<'_, '_>) {
        if let (Some(p), Some((u, w, l))) = (self.parent, self.queue.pop_front()) {
            ctx.release(1);
            ctx.send(p, Message::new(MessageKind::EdgeRecord, &[u, w, l]));
        }
        if !self.queue.is_empty() {
            ctx.wake_next_round();
        }
    }
}

impl NodeProgram for Collect {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        let nb = ctx.neighbors();
        let picks = sample(ctx.rng(), nb.len(), self.take);
        let me = ctx.id();
        for i in picks.iter() {
            self.accept(ctx, (me, nb[i], self.label));
        }
        self.forward(ctx);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i].msg;
            if m.kind() == MessageKind::EdgeRecord {
                self.accept(ctx, (m.field(0), m.field(1), m.field(2)));
            }
        }
        self.forward(ctx);
    }
}

/// Downcast of `(label, pred, succ)` assignments along label intervals.
struct Assign {
    label: u32,
    /// `(child, subtree size, first label)`.
    children: Vec<(NodeId, u32, u32)>,
    queues: Vec<VecDeque<Message>>,
    pred: Option<NodeId>,
    succ: Option<NodeId>,
    outgoing: Vec<Message>,
}

impl Assign {
    fn route(&mut self, ctx: &mut Context<'_, '_>, msg: Message) {
        let (l, pred, succ) = (msg.field(0), msg.field(1), msg.field(2));
        if l == self.label {
            self.pred = Some(pred);
            self.succ = Some(succ);
            ctx.charge(2);
            return;
        }
        match self.children.iter().position(|&(_, size, start)| l >= start && l < start + size) {
            Some(c) => {
                ctx.charge(1);
                self.queues[c].push_back(msg);
            }
            None => ctx.fail(FailureReason::RootSolveFailed),
        }
    }

    fn flush(&mut self, ctx: &mut Context<'_, '_>) {
        let mut more = false;
        for c in 0..self.children.len() {
            if let Some(m) = self.queues[c].pop_front() {
                ctx.release(1);
                ctx.send(self.children[c].0, m);
            }
            more |= !self.queues[c].is_empty();
        }
        if more {
            ctx.wake_next_round();
        }
    }
}

impl NodeProgram for Assign {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        for m in std::mem::take(&mut self.outgoing) {
            self.route(ctx, m);
        }
        self.flush(ctx);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i].msg;
            if m.kind() == MessageKind::HcAssign {
                self.route(ctx, m);
            }
        }
        self.flush(ctx);
    }
}

fn finish(mut net: Network<'_>, certificate: Option<Certificate>, trace: UpcastTrace) -> UpcastRun {
    let transcript = net.take_transcript();
    let ok = net.failure().is_none() && certificate.is_some();
    UpcastRun { report: net.finish(ok), certificate: if ok { certificate } else { None }, trace, transcript }
}

/// Runs the upcast algorithm on `g`.
pub fn upcast(g: &Graph, seed: u64, opts: &UpcastOptions) -> UpcastRun {
    let n = g.n();
    let mut net = Network::new(g, seed);
    if opts.transcript {
        net.enable_transcript();
    }
    let mut trace = UpcastTrace::default();
    let leaders = elect_leaders(&mut net, "upcast.leader", false);
    let root = leaders[0];
    trace.root = root;
    if leaders.iter().any(|&l| l != root) {
        net.fail(FailureReason::PartitionDisconnected);
        return finish(net, None, trace);
    }
    if n < 3 {
        net.fail(FailureReason::RootSolveFailed);
        return finish(net, None, trace);
    }

    let cfg = TreeConfig { scoped: false, random_parent: true, announce_size: false, labels: true };
    let mut tree: Vec<SpanningTree> = g.nodes().map(|v| SpanningTree::new(v == root, cfg)).collect();
    net.run_phase("upcast.tree", &mut tree);
    trace.tree_depth = tree.iter().filter_map(|t| t.level).max().unwrap_or(0);

    let mut collect: Vec<Collect> = g
        .nodes()
        .map(|v| {
            let t = &tree[v as usize];
            let is_root = v == root;
            Collect {
                is_root,
                parent: t.parent,
                label: t.label.unwrap_or(0),
                take: sample_size(n, g.degree(v), opts.c_prime),
                queue: VecDeque::new(),
                edges: Vec::new(),
                labels: if is_root { vec![None; n] } else { Vec::new() },
            }
        })
        .collect();
    net.run_phase("upcast.collect", &mut collect);
    let gathered = std::mem::take(&mut collect[root as usize]);
    trace.records = gathered.edges.len() as u64;

    let sampled = Graph::from_edges_dedup(n, gathered.edges.iter().copied());
    trace.sampled_edges = sampled.m();
    net.charge(root, 2 * n as u64);
    let mut draws = NodeStreams::new(seed, "upcast.solve", n);
    let solved = sequential_rotation_solve(&sampled, root, &mut draws, Some(step_budget(n, opts.step_mult)));
    net.record_local_phase("upcast.solve");
    let order = match solved {
        Ok(c) => {
            net.add_steps(root, c.steps);
            c.order
        }
        Err(e) => {
            net.add_steps(root, e.steps);
            net.fail(FailureReason::RootSolveFailed);
            return finish(net, None, trace);
        }
    };

    let mut links = vec![(NodeId::MAX, NodeId::MAX); n];
    for (i, &v) in order.iter().enumerate() {
        links[v as usize] = (order[(i + n - 1) % n], order[(i + 1) % n]);
    }
    let mut outgoing = Vec::with_capacity(n);
    for v in g.nodes() {
        let Some(l) = gathered.labels[v as usize] else {
            net.fail(FailureReason::RootSolveFailed);
            return finish(net, None, trace);
        };
        let (p, s) = links[v as usize];
        outgoing.push(Message::new(MessageKind::HcAssign, &[l, p, s]));
    }
    let mut assign: Vec<Assign> = tree
        .into_iter()
        .map(|t| Assign {
            label: t.label.unwrap_or(0),
            queues: vec![VecDeque::new(); t.children.len()],
            children: t.children,
            pred: None,
            succ: None,
            outgoing: Vec::new(),
        })
        .collect();
    assign[root as usize].outgoing = outgoing;
    net.run_phase("upcast.assign", &mut assign);

    let links: Option<Vec<(NodeId, NodeId)>> = assign.iter().map(|a| Some((a.pred?, a.succ?))).collect();
    finish(net, links.map(Certificate::from_links), trace)
}
