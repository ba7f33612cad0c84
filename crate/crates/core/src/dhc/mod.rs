//! Hamiltonian cycles by color partitioning.
//!
//! Every node picks a color uniformly from `1..=K`, and path rotation runs
//! inside each color class at the same time. Two ways to join the class
//! cycles follow:
//!
//! * [`dhc1`] cuts one edge of every class cycle, making it a hypernode
//!   with two terminals, and rotates a path through the hypernodes.
//! * [`dhc2`] merges the cycles of colors `2i - 1` and `2i` through a
//!   bridge (two cross edges next to each other on both cycles), halving
//!   the number of cycles per level.

mod hyper;
mod merge;

use rand::Rng;

pub use hyper::{build_hypernode_graph, dhc1, dhc1_colors, HypernodeGraph, TerminalLinks};
pub use merge::{
    cycles_valid, dhc2, dhc2_colors, find_bridges, merge_cycles, merge_levels, renumber_first, renumber_second, Bridge,
    LevelTrace,
};

use crate::graph::NodeId;
use crate::rotation::{DraCore, DraProgram};
use crate::runtime::programs::{convergecast_count, ctrl, elect_leaders};
use crate::runtime::{
    node_rng, step_budget, Audience, Context, FailureReason, Message, MessageKind, Network, NodeProgram,
    SimulationReport,
};
use crate::verify::Certificate;

/// Knobs shared by both variants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DhcOptions {
    /// Rotation budget per class is `⌈step_mult · s ln s⌉` steps.
    pub step_mult: f64,
    /// Validate every class cycle after each merge level.
    pub check_levels: bool,
    /// Keep every discovered bridge in the level trace.
    pub trace_candidates: bool,
    pub transcript: bool,
}

impl Default for DhcOptions {
    fn default() -> Self {
        DhcOptions { step_mult: 7.0, check_levels: false, trace_candidates: false, transcript: false }
    }
}

/// What happened inside a run, for tests and experiments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DhcTrace {
    pub num_colors: u32,
    /// Color of each node.
    pub colors: Vec<u32>,
    /// Class sizes, indexed by `color - 1`.
    pub partition_sizes: Vec<u32>,
    /// `(u_i, v_i)` terminals of each hypernode, indexed by `color - 1`.
    pub terminals: Vec<(NodeId, NodeId)>,
    pub levels: Vec<LevelTrace>,
}

#[derive(Clone, Debug)]
pub struct DhcRun {
    pub report: SimulationReport,
    pub certificate: Option<Certificate>,
    pub trace: DhcTrace,
    pub transcript: Option<Vec<String>>,
}

/// A node's class cycle after the rotation phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct NodeState {
    pub color: u32,
    pub leader: NodeId,
    pub size: u32,
    pub index: u32,
    pub pred: NodeId,
    pub succ: NodeId,
}

/// One-round exchange of colors with all neighbors.
struct ColorExchange {
    color: u32,
    same_color: Vec<NodeId>,
}

impl NodeProgram for ColorExchange {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        ctx.charge(ctx.degree() as u64);
        ctx.multicast(Message::new(MessageKind::Control, &[ctrl::COLOR, self.color]), Audience::All);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for m in ctx.inbox() {
            if m.msg.kind() == MessageKind::Control && m.msg.field(0) == ctrl::COLOR && m.msg.field(1) == self.color {
                self.same_color.push(m.from);
            }
        }
    }
}

pub(crate) fn finish_run(net: Network<'_>, certificate: Option<Certificate>, trace: DhcTrace) -> DhcRun {
    let mut net = net;
    let transcript = net.take_transcript();
    let ok = net.failure().is_none() && certificate.is_some();
    DhcRun { report: net.finish(ok), certificate: if ok { certificate } else { None }, trace, transcript }
}

/// Colors, class leaders, class sizes and class cycles. Returns `None`
/// after recording a failure in `net`.
pub(crate) fn phase1(net: &mut Network<'_>, k: u32, step_mult: f64, trace: &mut DhcTrace) -> Option<Vec<NodeState>> {
    let g = net.graph();
    let seed = net.seed();
    let colors: Vec<u32> = g.nodes().map(|v| node_rng(seed, "color", v).gen_range(1..=k)).collect();
    net.record_local_phase("phase1.color");
    let mut sizes = vec![0u32; k as usize];
    for &c in &colors {
        sizes[c as usize - 1] += 1;
    }
    trace.num_colors = k;
    trace.partition_sizes = sizes.clone();
    trace.colors = colors.clone();

    let mut exchange: Vec<ColorExchange> =
        colors.iter().map(|&color| ColorExchange { color, same_color: Vec::new() }).collect();
    net.run_phase("phase1.exchange", &mut exchange);
    net.set_groups(colors.clone());
    if sizes.contains(&0) {
        net.fail(FailureReason::PartitionDisconnected);
        return None;
    }
    if sizes.iter().any(|&s| s < 3) {
        net.fail(FailureReason::UnusedExhausted);
        return None;
    }

    let leaders = elect_leaders(net, "phase1.leader", true);
    let mut class_leader = vec![NodeId::MAX; k as usize];
    for v in g.nodes() {
        let slot = &mut class_leader[colors[v as usize] as usize - 1];
        if *slot == NodeId::MAX {
            *slot = leaders[v as usize];
        } else if *slot != leaders[v as usize] {
            net.fail(FailureReason::PartitionDisconnected);
            return None;
        }
    }
    let roots: Vec<bool> = g.nodes().map(|v| leaders[v as usize] == v).collect();
    let learned = convergecast_count(net, "phase1.size", &roots);
    for (c, &l) in class_leader.iter().enumerate() {
        net.set_step_budget(l, step_budget(sizes[c] as usize, step_mult));
    }
    let mut dra: Vec<DraProgram> = exchange
        .into_iter()
        .enumerate()
        .map(|(v, x)| {
            let size = learned[v].unwrap_or(0);
            DraProgram { core: DraCore::new(x.same_color, size, leaders[v], leaders[v] == v as NodeId) }
        })
        .collect();
    net.run_phase("phase1.dra", &mut dra);
    if net.failure().is_some() {
        return None;
    }
    let mut states = Vec::with_capacity(dra.len());
    for (v, p) in dra.iter().enumerate() {
        let c = &p.core;
        match (c.done(), c.pred(), c.succ()) {
            (true, Some(pred), Some(succ)) => states.push(NodeState {
                color: colors[v],
                leader: leaders[v],
                size: learned[v].unwrap_or(0),
                index: c.index(),
                pred,
                succ,
            }),
            _ => {
                net.fail(FailureReason::UnusedExhausted);
                return None;
            }
        }
    }
    Some(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn class_cycles_on_complete_graph() {
        let g = Graph::complete(256);
        let mut wins = 0;
        for seed in 0..6 {
            let mut net = Network::new(&g, seed);
            let mut trace = DhcTrace::default();
            let states = phase1(&mut net, 16, 7.0, &mut trace);
            assert_eq!(trace.partition_sizes.iter().sum::<u32>(), 256);
            let Some(states) = states else {
                assert_eq!(net.failure(), Some(FailureReason::UnusedExhausted));
                continue;
            };
            wins += 1;
            for (v, s) in states.iter().enumerate() {
                assert_eq!(s.size, trace.partition_sizes[s.color as usize - 1]);
                assert_eq!(states[s.succ as usize].pred, v as NodeId);
                assert_eq!(states[s.succ as usize].color, s.color);
                assert_eq!(states[s.succ as usize].index, s.index % s.size + 1);
            }
        }
        assert!(wins >= 2, "{wins} of 6");
    }

    #[test]
    fn empty_class_fails() {
        let g = Graph::complete(4);
        let mut net = Network::new(&g, 1);
        let mut trace = DhcTrace::default();
        assert!(phase1(&mut net, 16, 7.0, &mut trace).is_none());
        assert_eq!(net.failure(), Some(FailureReason::PartitionDisconnected));
    }
}
