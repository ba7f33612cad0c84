//! Path rotation: the distributed node program and a sequential solver
//! driven by the same random draws.
//!
//! The path `v_1 .. v_h` grows from its head. The head draws an unused
//! incident edge `(v_h, u)` and sends `Progress(h)` to `u`. A fresh `u`
//! joins as `v_{h+1}` and becomes head. An on-path `u = v_j` floods
//! `Rotation(h, j)` over the scope, and every node with `j < i ≤ h`
//! renumbers itself to `h + j + 1 - i`, which reverses the tail segment
//! and makes the old `v_{j+1}` the head. Once the path has every scope
//! node, a draw that hits `v_1` closes the cycle.

use rand::Rng;

use crate::graph::{Graph, NodeId};
use crate::runtime::programs::{convergecast_count, ctrl, elect_leaders};
use crate::runtime::{
    node_rng, step_budget, Context, FailureReason, Incoming, Message, MessageKind, Network, NodeProgram, NodeRng,
    RoundView, SimulationReport,
};
use crate::verify::Certificate;

/// New index of a node at position `i` after a rotation with head `h`
/// that hit `v_j`. Positions outside `j+1..=h` are unchanged.
pub fn rotate_index(i: u32, h: u32, j: u32) -> u32 {
    if j < i && i <= h {
        h + j + 1 - i
    } else {
        i
    }
}

/// Rotation state of one node in one scope.
#[derive(Clone, Debug)]
pub struct DraCore {
    index: u32,
    pred: Option<NodeId>,
    succ: Option<NodeId>,
    unused: Vec<NodeId>,
    is_head: bool,
    start: bool,
    scope_size: u32,
    instance: u32,
    draw_at: Option<u64>,
    done: bool,
}

impl DraCore {
    /// `unused` holds the node's scope neighbors, `instance` names the
    /// scope for step accounting, and `start` marks the initial head.
    pub fn new(unused: Vec<NodeId>, scope_size: u32, instance: u32, start: bool) -> DraCore {
        DraCore {
            index: 0,
            pred: None,
            succ: None,
            unused,
            is_head: false,
            start,
            scope_size,
            instance,
            draw_at: None,
            done: false,
        }
    }

    /// Path position, 0 while off the path.
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn pred(&self) -> Option<NodeId> {
        self.pred
    }

    pub fn succ(&self) -> Option<NodeId> {
        self.succ
    }

    pub fn unused(&self) -> &[NodeId] {
        &self.unused
    }

    pub fn is_head(&self) -> bool {
        self.is_head
    }

    /// Whether the node has learned that its scope closed a cycle.
    pub fn done(&self) -> bool {
        self.done
    }

    pub fn init(&mut self, ctx: &mut Context<'_, '_>) {
        ctx.charge(self.unused.len() as u64 + 6);
        if !self.start {
            return;
        }
        self.index = 1;
        if self.scope_size == 1 {
            self.pred = Some(ctx.id());
            self.succ = Some(ctx.id());
            self.done = true;
            return;
        }
        self.is_head = true;
        self.draw(ctx);
    }

    /// Handles one message; returns false if it is not a rotation message.
    pub fn handle(&mut self, ctx: &mut Context<'_, '_>, m: &Incoming) -> bool {
        match m.msg.kind() {
            MessageKind::Progress => self.on_progress(ctx, m.from, m.msg.field(0)),
            MessageKind::Rotation => {
                let info = m.flood.expect("rotation arrives by flood");
                self.on_rotation(ctx, m.msg.field(0), m.msg.field(1), info.origin, info.completes_at);
            }
            MessageKind::Control if m.msg.field(0) == ctrl::SUCCESS => self.done = true,
            _ => return false,
        }
        true
    }

    /// Lets a settled head take its next draw. Call once per round after
    /// the inbox.
    pub fn tick(&mut self, ctx: &mut Context<'_, '_>) {
        if self.is_head && self.draw_at.is_some_and(|t| ctx.round() >= t) {
            self.draw_at = None;
            self.draw(ctx);
        }
    }

    fn draw(&mut self, ctx: &mut Context<'_, '_>) {
        if self.unused.is_empty() {
            ctx.fail(FailureReason::UnusedExhausted);
            return;
        }
        let k = ctx.rng().gen_range(0..self.unused.len());
        let u = self.unused.swap_remove(k);
        self.is_head = false;
        // Tentative: confirmed by an extension, turned into the new
        // predecessor by the swap of a rotation.
        self.succ = Some(u);
        ctx.record_step(self.instance);
        ctx.send(u, Message::new(MessageKind::Progress, &[self.index]));
    }

    fn on_progress(&mut self, ctx: &mut Context<'_, '_>, from: NodeId, pos: u32) {
        if let Some(k) = self.unused.iter().position(|&x| x == from) {
            self.unused.swap_remove(k);
        }
        if pos == self.scope_size && self.index == 1 {
            self.pred = Some(from);
            self.done = true;
            ctx.flood(Message::new(MessageKind::Control, &[ctrl::SUCCESS]));
            return;
        }
        if self.index == 0 {
            self.index = pos + 1;
            self.pred = Some(from);
            self.is_head = true;
            self.draw(ctx);
        } else {
            self.succ = Some(from);
            ctx.flood(Message::new(MessageKind::Rotation, &[pos, self.index]));
        }
    }

    fn on_rotation(&mut self, ctx: &mut Context<'_, '_>, h: u32, j: u32, vj: NodeId, completes_at: u64) {
        if !(j < self.index && self.index <= h) {
            return;
        }
        self.index = rotate_index(self.index, h, j);
        std::mem::swap(&mut self.pred, &mut self.succ);
        if self.index == j + 1 {
            self.pred = Some(vj);
        }
        if self.index == h {
            self.succ = None;
            self.is_head = true;
            // Draw once the renumbering has reached the whole scope.
            self.draw_at = Some(completes_at + 1);
            ctx.wake_at(completes_at + 1);
        }
    }
}

/// Standalone node program around a [`DraCore`].
#[derive(Clone, Debug)]
pub struct DraProgram {
    pub core: DraCore,
}

impl NodeProgram for DraProgram {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        self.core.init(ctx);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i];
            self.core.handle(ctx, &m);
        }
        self.core.tick(ctx);
    }
}

/// Result of [`run_dra`].
#[derive(Clone, Debug)]
pub struct DraRun {
    pub report: SimulationReport,
    pub certificate: Option<Certificate>,
    pub transcript: Option<Vec<String>>,
}

/// Rotation over the whole graph: elect the minimum id, count the nodes,
/// then rotate from the leader with a budget of `⌈mult · n ln n⌉` steps.
pub fn run_dra(g: &Graph, seed: u64, step_mult: f64) -> DraRun {
    dra_inner(g, seed, step_mult, false, |_, _| {})
}

/// [`run_dra`] recording every delivered message.
pub fn run_dra_with_transcript(g: &Graph, seed: u64, step_mult: f64) -> DraRun {
    dra_inner(g, seed, step_mult, true, |_, _| {})
}

/// [`run_dra`] with a callback after every round of the rotation phase.
pub fn run_dra_observed<O>(g: &Graph, seed: u64, step_mult: f64, observe: O) -> DraRun
where
    O: FnMut(&RoundView, &[DraProgram]),
{
    dra_inner(g, seed, step_mult, false, observe)
}

fn dra_inner<O>(g: &Graph, seed: u64, step_mult: f64, transcript: bool, observe: O) -> DraRun
where
    O: FnMut(&RoundView, &[DraProgram]),
{
    let n = g.n();
    let mut net = Network::new(g, seed);
    if transcript {
        net.enable_transcript();
    }
    let leaders = elect_leaders(&mut net, "leader", false);
    if leaders.iter().any(|&l| l != leaders[0]) {
        net.fail(FailureReason::PartitionDisconnected);
        let transcript = net.take_transcript();
        return DraRun { report: net.finish(false), certificate: None, transcript };
    }
    let leader = leaders[0];
    let roots: Vec<bool> = g.nodes().map(|v| v == leader).collect();
    let sizes = convergecast_count(&mut net, "size", &roots);
    net.set_step_budget(leader, step_budget(n, step_mult));
    let mut programs: Vec<DraProgram> = g
        .nodes()
        .map(|v| DraProgram {
            core: DraCore::new(g.neighbors(v).to_vec(), sizes[v as usize].unwrap_or(0), leader, v == leader),
        })
        .collect();
    net.run_phase_observed("dra", &mut programs, observe);
    let cores: Vec<&DraCore> = programs.iter().map(|p| &p.core).collect();
    let certificate = certificate_from_cores(&cores);
    let ok = net.failure().is_none() && certificate.is_some();
    let transcript = net.take_transcript();
    DraRun { report: net.finish(ok), certificate: if ok { certificate } else { None }, transcript }
}

/// Certificate from every node's predecessor and successor, if all nodes
/// have both.
pub fn certificate_from_cores(cores: &[&DraCore]) -> Option<Certificate> {
    let links: Option<Vec<(NodeId, NodeId)>> =
        cores.iter().map(|c| if c.done { Some((c.pred?, c.succ?)) } else { None }).collect();
    links.map(Certificate::from_links)
}

/// The current path read off the nodes' indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSnapshot {
    /// `nodes[i]` holds index `i + 1`.
    pub nodes: Vec<NodeId>,
}

impl PathSnapshot {
    /// Fails unless the nonzero indices are exactly `1..=h`.
    pub fn from_indices(indices: impl IntoIterator<Item = (NodeId, u32)>) -> Result<PathSnapshot, String> {
        let mut on: Vec<(u32, NodeId)> = indices.into_iter().filter(|&(_, i)| i > 0).map(|(v, i)| (i, v)).collect();
        on.sort_unstable();
        for (k, &(i, v)) in on.iter().enumerate() {
            if i as usize != k + 1 {
                return Err(format!("node {v} holds index {i}, expected {}", k + 1));
            }
        }
        Ok(PathSnapshot { nodes: on.into_iter().map(|(_, v)| v).collect() })
    }

    /// Every consecutive pair must be an edge.
    pub fn check_adjacent(&self, g: &Graph) -> Result<(), String> {
        match self.nodes.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
            Some(w) => Err(format!("{} and {} are consecutive but not adjacent", w[0], w[1])),
            None => Ok(()),
        }
    }
}

/// Source of the head's draws for [`sequential_rotation_solve`].
pub trait DrawSource {
    /// Uniform index in `0..len` for a draw made by `node`.
    fn draw(&mut self, node: NodeId, len: usize) -> usize;
}

/// One random stream per node, matching the distributed program's streams
/// for the same seed and phase label.
pub struct NodeStreams {
    seed: u64,
    label: String,
    rngs: Vec<Option<NodeRng>>,
}

impl NodeStreams {
    pub fn new(seed: u64, label: &str, n: usize) -> NodeStreams {
        NodeStreams { seed, label: label.to_string(), rngs: (0..n).map(|_| None).collect() }
    }
}

impl DrawSource for NodeStreams {
    fn draw(&mut self, node: NodeId, len: usize) -> usize {
        let (seed, label) = (self.seed, &self.label);
        self.rngs[node as usize].get_or_insert_with(|| node_rng(seed, label, node)).gen_range(0..len)
    }
}

/// A single stream shared by all nodes.
pub struct SingleStream<R: Rng>(pub R);

impl<R: Rng> DrawSource for SingleStream<R> {
    fn draw(&mut self, _node: NodeId, len: usize) -> usize {
        self.0.gen_range(0..len)
    }
}

/// A cycle found by [`sequential_rotation_solve`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolvedCycle {
    /// Node order starting at the initial head.
    pub order: Vec<NodeId>,
    pub steps: u64,
}

/// Why [`sequential_rotation_solve`] gave up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveFailure {
    pub reason: FailureReason,
    pub steps: u64,
}

/// Centralized rotation from `start` with the same edge bookkeeping as
/// the node program: unused lists start as the sorted neighbor lists, a
/// draw swap-removes at the head, and the receiver swap-removes the head.
pub fn sequential_rotation_solve(
    g: &Graph,
    start: NodeId,
    draws: &mut impl DrawSource,
    max_steps: Option<u64>,
) -> Result<SolvedCycle, SolveFailure> {
    let n = g.n();
    let mut unused: Vec<Vec<NodeId>> = g.nodes().map(|v| g.neighbors(v).to_vec()).collect();
    // pos[v] is the 1-based path index, 0 when off the path.
    let mut pos = vec![0u32; n];
    let mut path = vec![start];
    pos[start as usize] = 1;
    let mut steps = 0u64;
    if n == 1 {
        return Ok(SolvedCycle { order: path, steps });
    }
    loop {
        let head = *path.last().expect("nonempty");
        let list = &mut unused[head as usize];
        if list.is_empty() {
            return Err(SolveFailure { reason: FailureReason::UnusedExhausted, steps });
        }
        let k = draws.draw(head, list.len());
        let u = list.swap_remove(k);
        steps += 1;
        if max_steps.is_some_and(|b| steps > b) {
            return Err(SolveFailure { reason: FailureReason::StepBudgetExceeded, steps });
        }
        let back = &mut unused[u as usize];
        if let Some(k) = back.iter().position(|&x| x == head) {
            back.swap_remove(k);
        }
        let h = path.len();
        if h == n && pos[u as usize] == 1 {
            return Ok(SolvedCycle { order: path, steps });
        }
        match pos[u as usize] as usize {
            0 => {
                path.push(u);
                pos[u as usize] = h as u32 + 1;
            }
            j => {
                path[j..].reverse();
                for (i, &v) in path.iter().enumerate().skip(j) {
                    pos[v as usize] = i as u32 + 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_gnp, GnpParams};
    use crate::verify::check_certificate;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn renumber_example() {
        let new: Vec<u32> = (1..=5).map(|i| rotate_index(i, 5, 2)).collect();
        assert_eq!(new, vec![1, 2, 5, 4, 3]);
        // The old v_3 now holds index h = 5 and is the head.
        assert_eq!(rotate_index(3, 5, 2), 5);
    }

    #[test]
    fn hitting_predecessor_changes_nothing() {
        for h in 2..20 {
            for i in 1..=h {
                assert_eq!(rotate_index(i, h, h - 1), i);
            }
        }
    }

    #[test]
    fn triangle() {
        let g = Graph::complete(3);
        let run = run_dra(&g, 5, 7.0);
        assert!(run.report.success, "{:?}", run.report.failure_reason);
        let cert = run.certificate.unwrap();
        assert_eq!(check_certificate(&g, &cert), Ok(()));
        assert_eq!(run.report.congest.violations, 0);
    }

    #[test]
    fn single_node_and_pair() {
        let run = run_dra(&Graph::empty(1), 0, 7.0);
        assert!(run.report.success);
        let run = run_dra(&Graph::path(2), 0, 7.0);
        assert!(!run.report.success);
        assert_eq!(run.report.failure_reason, Some(FailureReason::UnusedExhausted));
    }

    #[test]
    fn disconnected_graph_fails_up_front() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
        let run = run_dra(&g, 0, 7.0);
        assert_eq!(run.report.failure_reason, Some(FailureReason::PartitionDisconnected));
    }

    #[test]
    fn sequential_on_k4_and_cycles() {
        let k4 = Graph::complete(4);
        for seed in 0..20 {
            let mut s = SingleStream(ChaCha8Rng::seed_from_u64(seed));
            if let Ok(c) = sequential_rotation_solve(&k4, 0, &mut s, None) {
                assert_eq!(check_certificate(&k4, &Certificate::from_cycle(&c.order)), Ok(()));
            }
        }
        for n in 3..30 {
            let g = Graph::cycle(n);
            let mut s = SingleStream(ChaCha8Rng::seed_from_u64(n as u64));
            // On a cycle the path can only ever extend, so the solve is
            // forced to find the unique Hamiltonian cycle.
            match sequential_rotation_solve(&g, 0, &mut s, None) {
                Ok(c) => {
                    let mut canon = c.order.clone();
                    if canon[1] != 1 {
                        canon[1..].reverse();
                    }
                    assert_eq!(canon, (0..n as NodeId).collect::<Vec<_>>());
                }
                Err(f) => assert_eq!(f.reason, FailureReason::UnusedExhausted),
            }
        }
    }

    #[test]
    fn cycle_graph_always_closes_when_walking_away_from_start() {
        // From node 0 the first draw fixes a direction; every later draw is
        // forced, and the closing draw reaches node 0.
        let g = Graph::cycle(10);
        for seed in 0..10 {
            let mut s = SingleStream(ChaCha8Rng::seed_from_u64(seed));
            let c = sequential_rotation_solve(&g, 0, &mut s, None).unwrap();
            assert_eq!(c.steps, 10);
        }
    }

    #[test]
    fn sequential_succeeds_on_dense_random_graphs() {
        let n = 500;
        let p = 15.0 * (n as f64).ln() / n as f64;
        let mut ok = 0;
        for seed in 0..50 {
            let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
            let mut s = SingleStream(ChaCha8Rng::seed_from_u64(seed + 1000));
            if let Ok(c) = sequential_rotation_solve(&g, 0, &mut s, Some(step_budget(n, 7.0))) {
                assert_eq!(check_certificate(&g, &Certificate::from_cycle(&c.order)), Ok(()));
                ok += 1;
            }
        }
        assert!(ok >= 48, "{ok}/50");
    }

    #[test]
    fn lockstep_with_sequential() {
        let mut compared = 0;
        for seed in 0..40u64 {
            let n = 8 + (seed as usize % 57);
            let p = (6.0 * (n as f64).ln() / n as f64).min(1.0);
            let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
            if !g.is_connected() {
                continue;
            }
            let run = run_dra(&g, seed, 1e6);
            let mut streams = NodeStreams::new(seed, "dra", n);
            let seq = sequential_rotation_solve(&g, 0, &mut streams, None);
            match seq {
                Ok(c) => {
                    assert!(run.report.success, "seed {seed}");
                    assert_eq!(run.certificate.unwrap(), Certificate::from_cycle(&c.order));
                    assert_eq!(run.report.steps, c.steps);
                }
                Err(f) => {
                    assert_eq!(run.report.failure_reason, Some(f.reason));
                    assert_eq!(run.report.steps, f.steps);
                }
            }
            compared += 1;
        }
        assert!(compared >= 30);
    }

    #[test]
    fn paths_stay_simple_between_events() {
        let g = generate_gnp(GnpParams::new(120, 0.2, 4).unwrap());
        let mut checked = 0;
        let mut unused_total = u64::MAX;
        let run = run_dra_observed(&g, 9, 7.0, |view, progs| {
            let total: u64 = progs.iter().map(|p| p.core.unused().len() as u64).sum();
            assert!(total <= unused_total);
            unused_total = total;
            if view.floods_in_flight > 0 {
                return;
            }
            let snap = PathSnapshot::from_indices(progs.iter().enumerate().map(|(v, p)| (v as NodeId, p.core.index())))
                .unwrap();
            snap.check_adjacent(&g).unwrap();
            checked += 1;
        });
        assert!(run.report.success, "{:?}", run.report.failure_reason);
        assert!(checked > 100);
        assert_eq!(run.report.congest.violations, 0);
    }

    proptest! {
        #[test]
        fn renumbering_is_an_involution(h in 2u32..500, j_frac in 0.0f64..1.0, i_frac in 0.0f64..1.0) {
            let j = 1 + ((h - 1) as f64 * j_frac) as u32;
            let j = j.min(h - 1);
            let i = 1 + ((h - 1) as f64 * i_frac) as u32;
            prop_assert_eq!(rotate_index(rotate_index(i, h, j), h, j), i);
            let r = rotate_index(i, h, j);
            prop_assert!((1..=h).contains(&r));
        }
    }
}
