//! Reusable node programs: min-id leader election, spanning-tree echo
//! (sizes, DFS labels) and a message-level flood.

use std::rc::Rc;

use rand::seq::SliceRandom;

use super::{Audience, Context, Message, MessageKind, Network, NodeProgram};
use crate::graph::NodeId;

/// Subtype codes carried in field 0 of `Control` messages.
pub mod ctrl {
    pub const ADOPT: u32 = 1;
    pub const SIZE: u32 = 2;
    pub const INTERVAL: u32 = 3;
    pub const SUCCESS: u32 = 4;
    pub const RETRY: u32 = 5;
    pub const HEAD: u32 = 6;
    pub const TERMINAL: u32 = 7;
    pub const PICK: u32 = 8;
    pub const LABEL: u32 = 9;
    pub const COLOR: u32 = 10;
    pub const CHECK: u32 = 11;
}

fn audience(ctx: &Context<'_, '_>, scoped: bool) -> Audience {
    if scoped {
        Audience::Group(ctx.group())
    } else {
        Audience::All
    }
}

/// Iterative min-id flooding. Afterwards `leader` is the minimum id of the
/// node's connected scope.
#[derive(Clone, Debug)]
pub struct LeaderElection {
    scoped: bool,
    active: bool,
    pub leader: NodeId,
}

impl LeaderElection {
    /// `scoped` restricts the flooding to the node's group.
    pub fn new(scoped: bool) -> Self {
        LeaderElection { scoped, active: true, leader: NodeId::MAX }
    }

    /// A node that takes no part; its `leader` stays `NodeId::MAX`.
    pub fn idle() -> Self {
        LeaderElection { scoped: true, active: false, leader: NodeId::MAX }
    }
}

impl NodeProgram for LeaderElection {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.active {
            return;
        }
        self.leader = ctx.id();
        ctx.charge(1);
        let aud = audience(ctx, self.scoped);
        ctx.multicast(Message::new(MessageKind::LeaderProbe, &[self.leader]), aud);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.active {
            return;
        }
        let best = ctx.inbox().iter().map(|m| m.msg.field(0)).min().unwrap_or(NodeId::MAX);
        if best < self.leader {
            self.leader = best;
            let aud = audience(ctx, self.scoped);
            ctx.multicast(Message::new(MessageKind::LeaderProbe, &[best]), aud);
        }
    }
}

/// What a [`SpanningTree`] computes beyond the tree itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeConfig {
    /// Restrict the tree to the node's group.
    pub scoped: bool,
    /// Pick the parent uniformly among the first-round senders instead of
    /// the minimum id.
    pub random_parent: bool,
    /// After the sizes arrive at the root, flood the total to every member.
    pub announce_size: bool,
    /// Assign DFS interval labels top-down.
    pub labels: bool,
}

/// BFS tree by explore flooding, child adoption and a size echo.
///
/// A node first reached in round `t` forwards the explore in `t`, adopts
/// its parent in `t + 1` and knows its full child set in `t + 3`, when the
/// adoptions of its own children have arrived. Two shortcuts: the root's
/// children are all of its scope neighbors, and a node whose scope
/// neighbors all reached it first is a leaf and reports with its adoption.
#[derive(Clone, Debug)]
pub struct SpanningTree {
    cfg: TreeConfig,
    is_root: bool,
    pub level: Option<u32>,
    pub parent: Option<NodeId>,
    /// `(child, subtree size, label start)`, ascending by child id.
    pub children: Vec<(NodeId, u32, u32)>,
    pub subtree: u32,
    /// Scope size, once announced (root knows it directly).
    pub size: Option<u32>,
    /// DFS label: position in a preorder of the tree.
    pub label: Option<u32>,
    first_round: u64,
    expected_children: Option<usize>,
    adopt_pending: bool,
    children_known: bool,
    reported: usize,
    report_sent: bool,
}

impl SpanningTree {
    pub fn new(is_root: bool, cfg: TreeConfig) -> Self {
        SpanningTree {
            cfg,
            is_root,
            level: None,
            parent: None,
            children: Vec::new(),
            subtree: 1,
            size: None,
            label: None,
            first_round: 0,
            expected_children: None,
            adopt_pending: false,
            children_known: false,
            reported: 0,
            report_sent: false,
        }
    }

    /// The child whose label interval contains `label`.
    pub fn route(&self, label: u32) -> Option<NodeId> {
        self.children.iter().find(|&&(_, size, start)| label >= start && label < start + size).map(|c| c.0)
    }

    fn assign_labels(&mut self, ctx: &mut Context<'_, '_>, start: u32) {
        self.label = Some(start);
        let mut next = start + 1;
        for c in self.children.iter_mut() {
            c.2 = next;
            ctx.send(c.0, Message::new(MessageKind::Control, &[ctrl::INTERVAL, next]));
            next += c.1;
        }
    }

    fn try_finish(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.children_known || self.report_sent || self.reported < self.children.len() {
            return;
        }
        self.report_sent = true;
        if self.is_root {
            self.size = Some(self.subtree);
            if self.cfg.announce_size {
                ctx.flood(Message::new(MessageKind::Control, &[ctrl::SIZE, self.subtree]));
            } else if self.cfg.labels {
                self.assign_labels(ctx, 0);
            }
        } else if let Some(p) = self.parent {
            ctx.send(p, Message::new(MessageKind::SizeReport, &[self.subtree]));
        }
    }
}

impl NodeProgram for SpanningTree {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.is_root {
            self.level = Some(0);
            self.first_round = ctx.round();
            ctx.charge(4);
            let scope_degree = if self.cfg.scoped { ctx.scope_degree() } else { ctx.degree() };
            self.expected_children = Some(scope_degree);
            if scope_degree == 0 {
                self.children_known = true;
                self.try_finish(ctx);
                return;
            }
            let aud = audience(ctx, self.cfg.scoped);
            ctx.multicast(Message::new(MessageKind::BfsExplore, &[0]), aud);
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        let round = ctx.round();
        if self.level.is_none() {
            let senders: Vec<(NodeId, u32)> = ctx
                .inbox()
                .iter()
                .filter(|m| m.msg.kind() == MessageKind::BfsExplore)
                .map(|m| (m.from, m.msg.field(0)))
                .collect();
            if !senders.is_empty() {
                let (p, l) =
                    if self.cfg.random_parent { *senders.choose(ctx.rng()).expect("nonempty") } else { senders[0] };
                self.level = Some(l + 1);
                self.parent = Some(p);
                self.first_round = round;
                self.adopt_pending = true;
                ctx.charge(4);
                let scope_degree = if self.cfg.scoped { ctx.scope_degree() } else { ctx.degree() };
                if scope_degree == senders.len() {
                    // Leaf: nothing to explore, so the parent edge is free now.
                    self.children_known = true;
                    self.report_sent = true;
                    self.adopt_pending = false;
                    ctx.send(p, Message::new(MessageKind::Control, &[ctrl::ADOPT, 1]));
                    return;
                } else {
                    let aud = audience(ctx, self.cfg.scoped);
                    ctx.multicast(Message::new(MessageKind::BfsExplore, &[l + 1]), aud);
                    ctx.wake_at(round + 3);
                    ctx.wake_at(round + 1);
                }
                return;
            }
        }
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i];
            match (m.msg.kind(), m.msg.field(0)) {
                (MessageKind::Control, ctrl::ADOPT) => {
                    let pos = self.children.partition_point(|c| c.0 < m.from);
                    let leaf_size = m.msg.field(1);
                    self.children.insert(pos, (m.from, leaf_size, 0));
                    if leaf_size > 0 {
                        self.subtree += leaf_size;
                        self.reported += 1;
                    }
                    ctx.charge(3);
                }
                (MessageKind::SizeReport, _) => {
                    if let Some(c) = self.children.iter_mut().find(|c| c.0 == m.from) {
                        c.1 = m.msg.field(0);
                        self.subtree += c.1;
                        self.reported += 1;
                    }
                }
                (MessageKind::Control, ctrl::SIZE) => self.size = Some(m.msg.field(1)),
                (MessageKind::Control, ctrl::INTERVAL) => {
                    let start = m.msg.field(1);
                    self.assign_labels(ctx, start);
                }
                _ => {}
            }
        }
        if self.adopt_pending && round > self.first_round {
            self.adopt_pending = false;
            if let Some(p) = self.parent {
                ctx.send(p, Message::new(MessageKind::Control, &[ctrl::ADOPT]));
            }
        }
        let all_adopted = self.expected_children.is_some_and(|e| self.children.len() == e);
        if !self.children_known && (round >= self.first_round + 3 || all_adopted) {
            self.children_known = true;
        }
        self.try_finish(ctx);
    }
}

/// Flooding at message level: on first receipt a node forwards to every
/// member neighbor that did not send to it in that round.
#[derive(Clone, Debug)]
pub struct FloodProgram {
    member: Rc<Vec<bool>>,
    origin: bool,
    pub received: u32,
}

impl FloodProgram {
    pub fn new(member: Rc<Vec<bool>>, origin: bool) -> Self {
        FloodProgram { member, origin, received: 0 }
    }

    fn forward(&self, ctx: &mut Context<'_, '_>, skip: &[NodeId], msg: Message) {
        for &w in ctx.neighbors() {
            if self.member[w as usize] && skip.binary_search(&w).is_err() {
                ctx.send(w, msg);
            }
        }
    }
}

impl NodeProgram for FloodProgram {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.origin {
            self.received = 1;
            self.forward(ctx, &[], Message::new(MessageKind::Control, &[ctrl::SIZE, 0]));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        if self.received == 0 && !ctx.inbox().is_empty() {
            self.received = 1;
            let skip: Vec<NodeId> = ctx.inbox().iter().map(|m| m.from).collect();
            let msg = ctx.inbox()[0].msg;
            self.forward(ctx, &skip, msg);
        }
    }
}

/// The origin floods once over its group; every other node records receipt.
#[derive(Clone, Debug)]
pub struct NativeFlood {
    origin: bool,
    pub received: u32,
}

impl NativeFlood {
    pub fn new(origin: bool) -> Self {
        NativeFlood { origin, received: 0 }
    }
}

impl NodeProgram for NativeFlood {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.origin {
            self.received = 1;
            ctx.flood(Message::new(MessageKind::Control, &[ctrl::SIZE, 0]));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        self.received += ctx.inbox().iter().filter(|m| m.flood.is_some()).count() as u32;
    }
}

/// Runs min-id election as a phase; returns each node's leader.
pub fn elect_leaders(net: &mut Network<'_>, label: &str, scoped: bool) -> Vec<NodeId> {
    let n = net.graph().n();
    let mut progs = vec![LeaderElection::new(scoped); n];
    net.run_phase(label, &mut progs);
    progs.into_iter().map(|p| p.leader).collect()
}

/// Scoped election among the flagged nodes. Every group must consist of
/// participants only or of bystanders only.
pub fn elect_leaders_among(net: &mut Network<'_>, label: &str, active: &[bool]) -> Vec<NodeId> {
    let mut progs: Vec<LeaderElection> =
        active.iter().map(|&a| if a { LeaderElection::new(true) } else { LeaderElection::idle() }).collect();
    net.run_phase(label, &mut progs);
    progs.into_iter().map(|p| p.leader).collect()
}

/// Runs the size echo from every node flagged in `roots` over its group and
/// floods the total. Returns the size each node learned.
pub fn convergecast_count(net: &mut Network<'_>, label: &str, roots: &[bool]) -> Vec<Option<u32>> {
    let cfg = TreeConfig { scoped: true, random_parent: false, announce_size: true, labels: false };
    let mut progs: Vec<SpanningTree> = roots.iter().map(|&r| SpanningTree::new(r, cfg)).collect();
    net.run_phase(label, &mut progs);
    progs.into_iter().map(|p| p.size).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_gnp, GnpParams, Graph};
    use crate::runtime::{run, Budgets};

    #[test]
    fn leader_examples() {
        let k4 = Graph::complete(4);
        let mut net = Network::new(&k4, 1);
        let leaders = elect_leaders(&mut net, "leader", false);
        assert!(leaders.iter().all(|&l| l == 0));
        assert!(net.round() <= 2);
        let p = Graph::path(4);
        let mut net = Network::new(&p, 1);
        assert!(elect_leaders(&mut net, "leader", false).iter().all(|&l| l == 0));
        assert!(net.round() <= 4);
    }

    #[test]
    fn leader_rounds_within_diameter_plus_one() {
        let g = generate_gnp(GnpParams::new(300, 0.05, 4).unwrap());
        let d = g.diameter().expect("connected");
        let mut net = Network::new(&g, 1);
        let leaders = elect_leaders(&mut net, "leader", false);
        assert!(leaders.iter().all(|&l| l == 0));
        assert!(net.round() <= d as u64 + 1);
    }

    #[test]
    fn disconnected_election_disagrees() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let mut net = Network::new(&g, 1);
        let leaders = elect_leaders(&mut net, "leader", false);
        assert_eq!(leaders, vec![0, 0, 2, 2]);
    }

    #[test]
    fn convergecast_examples() {
        let single = Graph::empty(1);
        let mut net = Network::new(&single, 1);
        assert_eq!(convergecast_count(&mut net, "cc", &[true]), vec![Some(1)]);
        assert_eq!(net.round(), 0);

        let star = Graph::star(5);
        let mut net = Network::new(&star, 1);
        let mut roots = vec![false; 5];
        roots[0] = true;
        let cfg = TreeConfig { scoped: true, random_parent: false, announce_size: false, labels: false };
        let mut progs: Vec<SpanningTree> = roots.iter().map(|&r| SpanningTree::new(r, cfg)).collect();
        net.run_phase("count", &mut progs);
        assert_eq!(progs[0].size, Some(5));
        assert_eq!(net.round(), 2);
        let sizes = convergecast_count(&mut net, "cc", &roots);
        assert!(sizes.iter().all(|&s| s == Some(5)));
        assert_eq!(net.round(), 2 + 3);
        let report = net.finish(true);
        assert_eq!(report.congest.violations, 0);
    }

    #[test]
    fn convergecast_per_group() {
        let g = generate_gnp(GnpParams::new(200, 0.3, 9).unwrap());
        let groups: Vec<u32> = (0..200).map(|v| v % 4).collect();
        let mut net = Network::new(&g, 3);
        net.set_groups(groups);
        let roots: Vec<bool> = (0..200).map(|v| v < 4).collect();
        let sizes = convergecast_count(&mut net, "cc", &roots);
        assert!(sizes.iter().all(|&s| s == Some(50)));
        assert_eq!(net.finish(true).congest.violations, 0);
    }

    #[test]
    fn spanning_tree_levels_and_labels() {
        let g = Graph::cycle(8);
        let cfg = TreeConfig { scoped: false, random_parent: false, announce_size: false, labels: true };
        let mut net = Network::new(&g, 0);
        let mut progs: Vec<SpanningTree> = g.nodes().map(|v| SpanningTree::new(v == 0, cfg)).collect();
        net.run_phase("bfs", &mut progs);
        let levels: Vec<u32> = progs.iter().map(|p| p.level.unwrap()).collect();
        assert_eq!(levels, vec![0, 1, 2, 3, 4, 3, 2, 1]);
        let mut labels: Vec<u32> = progs.iter().map(|p| p.label.unwrap()).collect();
        labels.sort_unstable();
        assert_eq!(labels, (0..8).collect::<Vec<_>>());
        assert_eq!(progs[0].subtree, 8);
        assert_eq!(net.finish(true).congest.violations, 0);
    }

    #[test]
    fn flood_routes_agree() {
        let g = generate_gnp(GnpParams::new(120, 0.06, 2).unwrap());
        let member = Rc::new(vec![true; 120]);
        let native = run(&g, |v| NativeFlood::new(v == 0), 1, Budgets::for_graph(&g));
        let explicit = run(&g, |v| FloodProgram::new(member.clone(), v == 0), 1, Budgets::for_graph(&g));
        assert_eq!(native.rounds, explicit.rounds);
        assert_eq!(native.messages, explicit.messages);
    }
}
