//! Joining class cycles as hypernodes.
//!
//! Each class leader picks a position `r`; the nodes at positions `r` and
//! `r - 1` become the terminals `u` and `v` of the class, and the cycle
//! edge between them is dropped, leaving a Hamiltonian path from `u` to
//! `v`. Rotation then runs over hypernodes. A hypernode on the path has
//! an entry terminal (`in`) and an exit terminal (`out`); the head's exit
//! terminal draws an unused edge to a terminal of another hypernode. A
//! rotation reverses a segment of hypernodes, which swaps `in` and `out`
//! in each of them. A draw that lands on an entry terminal, other than
//! the closing hit on `in(X_1)`, is refused with a retry.

use rand::Rng;

use super::{finish_run, DhcOptions, DhcRun, DhcTrace, NodeState};
use crate::graph::{Graph, NodeId};
use crate::rotation::rotate_index;
use crate::runtime::programs::{ctrl, elect_leaders_among};
use crate::runtime::{step_budget, Audience, Context, FailureReason, Message, MessageKind, Network, NodeProgram};
use crate::verify::Certificate;

/// `⌈√n⌉` colors.
pub fn dhc1_colors(n: usize) -> u32 {
    ((n as f64).sqrt().ceil() as u32).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Inner,
    U,
    V,
}

/// Leader draws the cut position and floods it over the class.
struct PickTerminals {
    leader: bool,
    size: u32,
    index: u32,
    role: Role,
}

impl PickTerminals {
    fn apply(&mut self, r: u32) {
        let v_index = if r == 1 { self.size } else { r - 1 };
        if self.index == r {
            self.role = Role::U;
        } else if self.index == v_index {
            self.role = Role::V;
        }
    }
}

impl NodeProgram for PickTerminals {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.leader {
            let r = ctx.rng().gen_range(1..=self.size);
            self.apply(r);
            ctx.flood(Message::new(MessageKind::Control, &[ctrl::PICK, r]));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i].msg;
            if m.kind() == MessageKind::Control && m.field(0) == ctrl::PICK {
                self.apply(m.field(1));
            }
        }
    }
}

/// Terminals announce themselves; each learns its terminal neighbors in
/// other classes.
struct AnnounceTerminals {
    terminal: bool,
    color: u32,
    found: Vec<NodeId>,
}

impl NodeProgram for AnnounceTerminals {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.terminal {
            ctx.multicast(Message::new(MessageKind::Control, &[ctrl::TERMINAL, self.color]), Audience::All);
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.terminal {
            return;
        }
        for m in ctx.inbox() {
            if m.msg.kind() == MessageKind::Control && m.msg.field(0) == ctrl::TERMINAL && m.msg.field(1) != self.color
            {
                self.found.push(m.from);
            }
        }
        ctx.charge(self.found.len() as u64);
    }
}

/// Rotation state of one terminal.
#[derive(Clone, Debug)]
struct HyperTerminal {
    active: bool,
    partner: NodeId,
    /// Position of the own hypernode on the hyperpath, 0 while off it.
    pos: u32,
    is_in: bool,
    /// Cross edge used by the hyperpath at this terminal.
    link: Option<NodeId>,
    unused: Vec<NodeId>,
    head: bool,
    draw_at: Option<u64>,
    k: u32,
    instance: u32,
    done: bool,
}

impl HyperTerminal {
    fn draw(&mut self, ctx: &mut Context<'_, '_>) {
        if self.unused.is_empty() {
            ctx.fail(FailureReason::UnusedExhausted);
            return;
        }
        let i = ctx.rng().gen_range(0..self.unused.len());
        let t = self.unused.swap_remove(i);
        self.link = Some(t);
        self.head = false;
        ctx.record_step(self.instance);
        ctx.send(t, Message::new(MessageKind::Progress, &[self.pos]));
    }

    fn on_progress(&mut self, ctx: &mut Context<'_, '_>, o: NodeId, pos: u32) {
        if let Some(i) = self.unused.iter().position(|&x| x == o) {
            self.unused.swap_remove(i);
        }
        if self.pos == 0 {
            self.pos = pos + 1;
            self.is_in = true;
            self.link = Some(o);
            ctx.send(self.partner, Message::new(MessageKind::Control, &[ctrl::HEAD, pos + 1]));
        } else if self.pos == 1 && self.is_in && pos == self.k {
            self.link = Some(o);
            self.done = true;
            ctx.flood(Message::new(MessageKind::Control, &[ctrl::SUCCESS]));
        } else if !self.is_in {
            self.link = Some(o);
            ctx.flood(Message::new(MessageKind::Rotation, &[pos, self.pos]));
        } else {
            ctx.send(o, Message::new(MessageKind::Control, &[ctrl::RETRY]));
        }
    }

    fn on_rotation(&mut self, ctx: &mut Context<'_, '_>, h: u32, j: u32, completes_at: u64) {
        if !(j < self.pos && self.pos <= h) {
            return;
        }
        self.pos = rotate_index(self.pos, h, j);
        self.is_in = !self.is_in;
        if self.pos == h && !self.is_in {
            self.link = None;
            self.head = true;
            self.draw_at = Some(completes_at + 1);
            ctx.wake_at(completes_at + 1);
        }
    }
}

impl NodeProgram for HyperTerminal {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.active {
            return;
        }
        ctx.charge(self.unused.len() as u64 + 6);
        if self.pos == 1 && !self.is_in {
            self.head = true;
            self.draw(ctx);
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.active {
            return;
        }
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i];
            match (m.msg.kind(), m.msg.field(0)) {
                (MessageKind::Progress, pos) => self.on_progress(ctx, m.from, pos),
                (MessageKind::Rotation, h) => {
                    let info = m.flood.expect("rotation arrives by flood");
                    self.on_rotation(ctx, h, m.msg.field(1), info.completes_at);
                }
                (MessageKind::Control, ctrl::HEAD) => {
                    self.pos = m.msg.field(1);
                    self.is_in = false;
                    self.head = true;
                    self.draw(ctx);
                }
                (MessageKind::Control, ctrl::RETRY) => {
                    self.link = None;
                    self.head = true;
                    self.draw(ctx);
                }
                (MessageKind::Control, ctrl::SUCCESS) => self.done = true,
                _ => {}
            }
        }
        if self.head && self.draw_at.is_some_and(|t| ctx.round() >= t) {
            self.draw_at = None;
            self.draw(ctx);
        }
    }
}

/// Terminal pairs per adjacent hypernode pair `(i, j)`.
pub type TerminalLinks = Vec<((usize, usize), Vec<(NodeId, NodeId)>)>;

/// Hypernodes `i` and `j` are adjacent when some terminal of one is a
/// graph neighbor of some terminal of the other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypernodeGraph {
    /// Terminal pairs `(x, y)` joining hypernode `i` to `j > i`, per pair.
    pub links: TerminalLinks,
    pub graph: Graph,
}

/// Builds the hypernode graph from the terminals `(u_i, v_i)`.
pub fn build_hypernode_graph(g: &Graph, terminals: &[(NodeId, NodeId)]) -> HypernodeGraph {
    let k = terminals.len();
    let mut links = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (ui, vi) = terminals[i];
            let (uj, vj) = terminals[j];
            let pairs: Vec<(NodeId, NodeId)> =
                [(ui, uj), (ui, vj), (vi, uj), (vi, vj)].into_iter().filter(|&(x, y)| g.has_edge(x, y)).collect();
            if !pairs.is_empty() {
                links.push(((i, j), pairs));
            }
        }
    }
    let graph = Graph::from_edges_dedup(k, links.iter().map(|&((i, j), _)| (i as NodeId, j as NodeId)));
    HypernodeGraph { links, graph }
}

/// Class cycles joined through a rotation over hypernodes, with
/// `⌈√n⌉` colors.
pub fn dhc1(g: &Graph, seed: u64, opts: &DhcOptions) -> DhcRun {
    let n = g.n();
    let k = dhc1_colors(n);
    let mut net = Network::new(g, seed);
    if opts.transcript {
        net.enable_transcript();
    }
    let mut trace = DhcTrace::default();
    let Some(states) = super::phase1(&mut net, k, opts.step_mult, &mut trace) else {
        return finish_run(net, None, trace);
    };
    if k == 1 {
        let cert = Certificate::from_links(states.iter().map(|s| (s.pred, s.succ)).collect());
        return finish_run(net, Some(cert), trace);
    }
    let certificate = join_hypernodes(&mut net, &states, k, opts.step_mult, &mut trace);
    finish_run(net, certificate, trace)
}

fn join_hypernodes(
    net: &mut Network<'_>,
    states: &[NodeState],
    k: u32,
    step_mult: f64,
    trace: &mut DhcTrace,
) -> Option<Certificate> {
    let g = net.graph();
    let mut pick: Vec<PickTerminals> = states
        .iter()
        .enumerate()
        .map(|(v, s)| PickTerminals {
            leader: s.leader == v as NodeId,
            size: s.size,
            index: s.index,
            role: Role::Inner,
        })
        .collect();
    net.run_phase("phase2.pick", &mut pick);
    let roles: Vec<Role> = pick.iter().map(|p| p.role).collect();
    let mut terminals = vec![(NodeId::MAX, NodeId::MAX); k as usize];
    for (v, r) in roles.iter().enumerate() {
        let slot = &mut terminals[states[v].color as usize - 1];
        match r {
            Role::U => slot.0 = v as NodeId,
            Role::V => slot.1 = v as NodeId,
            Role::Inner => {}
        }
    }
    trace.terminals = terminals.clone();
    let is_terminal: Vec<bool> = roles.iter().map(|&r| r != Role::Inner).collect();

    let mut announce: Vec<AnnounceTerminals> = states
        .iter()
        .zip(&is_terminal)
        .map(|(s, &t)| AnnounceTerminals { terminal: t, color: s.color, found: Vec::new() })
        .collect();
    net.run_phase("phase2.announce", &mut announce);
    net.set_groups(states.iter().zip(&is_terminal).map(|(s, &t)| if t { 0 } else { s.color }).collect());

    let leaders = elect_leaders_among(net, "phase2.leader", &is_terminal);
    let hyper_leader = leaders[terminals[0].0 as usize];
    if is_terminal.iter().zip(&leaders).any(|(&t, &l)| t && l != hyper_leader) {
        net.fail(FailureReason::HypernodeGraphDisconnected);
        return None;
    }

    let instance = g.n() as u32;
    net.set_step_budget(instance, step_budget(k as usize, step_mult));
    let mut rot: Vec<HyperTerminal> = announce
        .into_iter()
        .enumerate()
        .map(|(v, a)| {
            let s = states[v];
            let partner = match roles[v] {
                Role::U => s.pred,
                Role::V => s.succ,
                Role::Inner => NodeId::MAX,
            };
            let first = s.color == 1 && a.terminal;
            HyperTerminal {
                active: a.terminal,
                partner,
                pos: if first { 1 } else { 0 },
                is_in: roles[v] == Role::U,
                link: None,
                unused: a.found,
                head: false,
                draw_at: None,
                k,
                instance,
                done: false,
            }
        })
        .collect();
    net.run_phase("phase2.dra", &mut rot);
    if net.failure().is_some() {
        return None;
    }
    let mut links = Vec::with_capacity(states.len());
    for (v, s) in states.iter().enumerate() {
        let t = &rot[v];
        let l = match roles[v] {
            Role::Inner => (s.pred, s.succ),
            Role::U => (t.link?, s.succ),
            Role::V => (s.pred, t.link?),
        };
        if t.active && !t.done {
            return None;
        }
        links.push(l);
    }
    Some(Certificate::from_links(links))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_gnp, GnpParams};
    use crate::verify::check_certificate;

    #[test]
    fn complete_graph_of_256() {
        let g = Graph::complete(256);
        let mut wins = 0;
        for seed in 0..6 {
            let run = dhc1(&g, seed, &DhcOptions::default());
            assert_eq!(run.trace.num_colors, 16);
            assert_eq!(run.report.congest.violations, 0);
            match &run.certificate {
                Some(cert) => {
                    check_certificate(&g, cert).unwrap();
                    wins += 1;
                }
                None => assert_eq!(run.report.failure_reason, Some(FailureReason::UnusedExhausted)),
            }
        }
        assert!(wins >= 2, "{wins} of 6");
    }

    #[test]
    fn hypernode_graph_matches_pair_scan() {
        let runs = (0..5).map(|seed| {
            let g = generate_gnp(GnpParams::new(1024, 0.9, seed).unwrap());
            let run = dhc1(&g, seed, &DhcOptions::default());
            (g, run)
        });
        let (g, run) = runs.into_iter().find(|(_, r)| !r.trace.terminals.is_empty()).expect("some phase 1 succeeds");
        let terms = &run.trace.terminals;
        assert_eq!(terms.len(), 32);
        let hg = build_hypernode_graph(&g, terms);
        for i in 0..terms.len() {
            for j in 0..terms.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (terms[i], terms[j]);
                let scan = [a.0, a.1].iter().any(|&x| [b.0, b.1].iter().any(|&y| g.has_edge(x, y)));
                assert_eq!(hg.graph.has_edge(i as NodeId, j as NodeId), scan, "hypernodes {i} {j}");
            }
        }
    }

    #[test]
    fn successful_runs_close_a_hypercycle() {
        let n = 1024;
        let p = 0.9;
        let mut wins = 0;
        for seed in 0..4 {
            let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
            let run = dhc1(&g, seed, &DhcOptions::default());
            assert_eq!(run.report.congest.violations, 0);
            if let Some(cert) = &run.certificate {
                wins += 1;
                check_certificate(&g, cert).unwrap();
                let hg = build_hypernode_graph(&g, &run.trace.terminals);
                let color_of = |v: NodeId| run.trace.terminals.iter().position(|t| t.0 == v || t.1 == v);
                for (v, &(a, b)) in cert.links().iter().enumerate() {
                    for w in [a, b] {
                        if let (Some(i), Some(j)) = (color_of(v as NodeId), color_of(w)) {
                            if i != j {
                                assert!(hg.graph.has_edge(i as NodeId, j as NodeId));
                            }
                        }
                    }
                }
            }
        }
        assert!(wins >= 2, "only {wins} of 4 runs succeeded");
    }
}
