use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use crate::graph::{Graph, NodeId};

use super::flood::{DenseRows, FloodPlan};
use super::message::{bandwidth_bits, Message};
use super::rng::{node_rng, NodeRng};
use super::{CongestStats, FailureReason, SimulationReport};

/// Behavior of one node. The executor calls `on_init` once at the start
/// of a phase and `on_round` in every round in which the node has mail or
/// asked to be woken.
pub trait NodeProgram {
    fn on_init(&mut self, _ctx: &mut Context<'_, '_>) {}
    fn on_round(&mut self, ctx: &mut Context<'_, '_>);
}

/// Recipients of a [`Context::multicast`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Audience {
    /// Every graph neighbor.
    All,
    /// Neighbors whose group label equals the given one.
    Group(u32),
}

/// A received message. Flood deliveries carry the round in which the
/// flood has reached every member of its scope.
#[derive(Clone, Copy, Debug)]
pub struct Incoming {
    pub from: NodeId,
    pub msg: Message,
    pub flood: Option<FloodInfo>,
}

#[derive(Clone, Copy, Debug)]
pub struct FloodInfo {
    pub origin: NodeId,
    pub completes_at: u64,
    plan: u32,
}

/// Round-level snapshot passed to phase observers.
#[derive(Clone, Copy, Debug)]
pub struct RoundView {
    pub round: u64,
    pub floods_in_flight: usize,
    pub steps: u64,
}

#[derive(Debug)]
struct ActiveFlood {
    plan: u32,
    start: u64,
    msg: Message,
}

struct Core<'g> {
    graph: &'g Graph,
    n: usize,
    bandwidth: u32,
    groups: Vec<u32>,
    uniform_groups: bool,
    group_sizes: HashMap<u32, usize>,
    internal: Option<(Vec<usize>, Vec<NodeId>)>,
    plans: Vec<FloodPlan>,
    dense: Option<DenseRows>,
    plan_index: HashMap<NodeId, u32>,
    bfs_dist: Vec<u32>,
    round: u64,
    messages: u64,
    steps: u64,
    instance_steps: HashMap<u32, u64>,
    step_budgets: HashMap<u32, u64>,
    max_rounds: u64,
    mem_cur: Vec<u64>,
    mem_peak: Vec<u64>,
    failure: Option<FailureReason>,
    congest: CongestStats,
    out_p2p: Vec<(NodeId, NodeId, Message)>,
    out_casts: Vec<(NodeId, Message, Audience)>,
    floods: Vec<ActiveFlood>,
    wakes: BinaryHeap<Reverse<(u64, NodeId)>>,
    transcript: Option<Vec<String>>,
}

impl Core<'_> {
    fn violation(&mut self, what: impl FnOnce() -> String) {
        self.congest.violations += 1;
        if self.congest.first_violation.is_none() {
            self.congest.first_violation = Some(format!("round {}: {}", self.round, what()));
        }
    }

    fn fail(&mut self, reason: FailureReason) {
        if self.failure.is_none() {
            self.failure = Some(reason);
        }
    }

    fn admits(&self, aud: Audience, w: NodeId) -> bool {
        match aud {
            Audience::All => true,
            Audience::Group(g) => self.groups[w as usize] == g,
        }
    }

    fn check_message(&mut self, from: NodeId, msg: &Message) -> bool {
        let bits = msg.size_bits(self.n);
        self.congest.max_message_bits = self.congest.max_message_bits.max(bits);
        if bits > self.bandwidth || !msg.fits(self.n) {
            self.violation(|| format!("oversized message {msg:?} from {from}"));
            return false;
        }
        true
    }

    fn ensure_internal(&mut self) {
        if self.uniform_groups || self.internal.is_some() {
            return;
        }
        let g = self.graph;
        let mut offsets = Vec::with_capacity(self.n + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        for u in g.nodes() {
            let gu = self.groups[u as usize];
            targets.extend(g.neighbors(u).iter().copied().filter(|&w| self.groups[w as usize] == gu));
            offsets.push(targets.len());
        }
        self.internal = Some((offsets, targets));
    }

    fn plan_for(&mut self, origin: NodeId) -> u32 {
        if let Some(&i) = self.plan_index.get(&origin) {
            return i;
        }
        if self.uniform_groups && DenseRows::pays_off(self.n, 2 * self.graph.m()) {
            let g = self.graph;
            let rows = self.dense.get_or_insert_with(|| DenseRows::new(g.n(), |u| g.neighbors(u).to_vec()));
            let i = self.plans.len() as u32;
            self.plans.push(FloodPlan::build_dense(origin, self.groups[origin as usize], rows));
            self.plan_index.insert(origin, i);
            return i;
        }
        self.ensure_internal();
        let group = self.groups[origin as usize];
        let scope_size = self.group_sizes[&group];
        let plan = {
            let graph = self.graph;
            let uniform = self.uniform_groups;
            let internal = &self.internal;
            let nb = |u: NodeId| -> &[NodeId] {
                match internal {
                    Some((off, tg)) if !uniform => &tg[off[u as usize]..off[u as usize + 1]],
                    _ => graph.neighbors(u),
                }
            };
            FloodPlan::build(origin, group, scope_size, nb, &mut self.bfs_dist)
        };
        let i = self.plans.len() as u32;
        self.plans.push(plan);
        self.plan_index.insert(origin, i);
        i
    }

    fn charge(&mut self, v: NodeId, words: u64) {
        let c = &mut self.mem_cur[v as usize];
        *c += words;
        let p = &mut self.mem_peak[v as usize];
        *p = (*p).max(*c);
    }
}

/// Per-node view handed to a program during a callback.
pub struct Context<'a, 'g> {
    core: &'a mut Core<'g>,
    node: NodeId,
    inbox: &'a [Incoming],
    rng: &'a mut NodeRng,
    sent_to: &'a mut Vec<NodeId>,
    cast: Option<Audience>,
    originated: Option<u32>,
    halted: &'a mut bool,
}

impl<'g> Context<'_, 'g> {
    pub fn id(&self) -> NodeId {
        self.node
    }

    pub fn round(&self) -> u64 {
        self.core.round
    }

    pub fn n(&self) -> usize {
        self.core.n
    }

    pub fn inbox(&self) -> &[Incoming] {
        self.inbox
    }

    /// The node's port table.
    pub fn neighbors(&self) -> &'g [NodeId] {
        self.core.graph.neighbors(self.node)
    }

    pub fn degree(&self) -> usize {
        self.core.graph.degree(self.node)
    }

    pub fn has_neighbor(&self, v: NodeId) -> bool {
        self.core.graph.has_edge(self.node, v)
    }

    /// Own group label (scope of floods started here).
    pub fn group(&self) -> u32 {
        self.core.groups[self.node as usize]
    }

    /// Number of neighbors in the node's own group.
    pub fn scope_degree(&self) -> usize {
        let g = self.group();
        let groups = &self.core.groups;
        self.neighbors().iter().filter(|&&w| groups[w as usize] == g).count()
    }

    pub fn rng(&mut self) -> &mut NodeRng {
        self.rng
    }

    /// Point-to-point message, delivered next round.
    pub fn send(&mut self, to: NodeId, msg: Message) {
        let me = self.node;
        if !self.core.graph.has_edge(me, to) {
            self.core.violation(|| format!("{me} addressed non-neighbor {to}"));
            return;
        }
        if !self.core.check_message(me, &msg) {
            return;
        }
        if let Some(aud) = self.cast {
            if self.core.admits(aud, to) {
                self.core.violation(|| format!("{me} sent to {to} on an edge already used by its multicast"));
            }
        }
        if self.forwards_flood_to(to) {
            self.core.violation(|| format!("{me} sent to {to} on an edge carrying a flood"));
        }
        self.sent_to.push(to);
        self.core.messages += 1;
        self.core.out_p2p.push((to, me, msg));
    }

    /// One copy of `msg` to every neighbor in `aud`, delivered next round.
    pub fn multicast(&mut self, msg: Message, aud: Audience) {
        let me = self.node;
        if !self.core.check_message(me, &msg) {
            return;
        }
        if self.cast.is_some() {
            self.core.violation(|| format!("{me} multicast twice in one round"));
            return;
        }
        if self.sent_to.iter().any(|&t| self.core.admits(aud, t)) {
            self.core.violation(|| format!("{me} multicast over an edge already used this round"));
        }
        let flood_groups: Vec<u32> = self.forwarded_plans().map(|p| self.core.plans[p as usize].group).collect();
        if flood_groups.iter().any(|&g| matches!(aud, Audience::All) || aud == Audience::Group(g)) {
            self.core.violation(|| format!("{me} multicast while forwarding a flood"));
        }
        self.cast = Some(aud);
        self.core.out_casts.push((me, msg, aud));
    }

    /// Floods `msg` over this node's group. Returns the round in which the
    /// last member receives it, or `None` (after recording a failure) when
    /// the scope is not connected.
    pub fn flood(&mut self, msg: Message) -> Option<u64> {
        let me = self.node;
        if !self.core.check_message(me, &msg) {
            return None;
        }
        let pi = self.core.plan_for(me);
        let (spans, ecc, scope_msgs) = {
            let p = &self.core.plans[pi as usize];
            (p.spans_scope, p.ecc, p.messages)
        };
        if !spans {
            self.core.fail(FailureReason::PartitionDisconnected);
            return None;
        }
        if ecc > 0 {
            let group = self.group();
            let clash_p2p = self.sent_to.iter().any(|&t| self.core.plans[pi as usize].distance(t).is_some());
            let clash_cast = matches!(self.cast, Some(Audience::All)) || self.cast == Some(Audience::Group(group));
            let clash_flood = self.originated.is_some() || self.inbox.iter().any(|m| m.flood.is_some());
            if clash_p2p || clash_cast || clash_flood {
                self.core.violation(|| format!("{me} started a flood over edges already used this round"));
            }
            self.originated = Some(pi);
            self.core.messages += scope_msgs;
            let start = self.core.round;
            self.core.floods.push(ActiveFlood { plan: pi, start, msg });
        }
        Some(self.core.round + ecc as u64)
    }

    fn forwarded_plans(&self) -> impl Iterator<Item = u32> + '_ {
        self.inbox.iter().filter_map(|m| m.flood.map(|f| f.plan)).chain(self.originated)
    }

    fn forwards_flood_to(&self, to: NodeId) -> bool {
        self.forwarded_plans().any(|pi| {
            let p = &self.core.plans[pi as usize];
            match (p.distance(self.node), p.distance(to)) {
                (Some(dx), Some(dt)) => dt >= dx,
                _ => false,
            }
        })
    }

    /// Requests an `on_round` call in round `at` (must be in the future).
    pub fn wake_at(&mut self, at: u64) {
        let at = at.max(self.core.round + 1);
        self.core.wakes.push(Reverse((at, self.node)));
    }

    pub fn wake_next_round(&mut self) {
        self.wake_at(self.core.round + 1);
    }

    /// Stops this node for the rest of the phase.
    pub fn halt(&mut self) {
        *self.halted = true;
    }

    /// Ends the whole run with `reason`.
    pub fn fail(&mut self, reason: FailureReason) {
        self.core.fail(reason);
    }

    pub fn failed(&self) -> bool {
        self.core.failure.is_some()
    }

    /// Counts one algorithmic step against `instance`'s budget.
    pub fn record_step(&mut self, instance: u32) {
        self.core.steps += 1;
        let c = self.core.instance_steps.entry(instance).or_insert(0);
        *c += 1;
        let c = *c;
        if let Some(&b) = self.core.step_budgets.get(&instance) {
            if c > b {
                self.core.fail(FailureReason::StepBudgetExceeded);
            }
        }
    }

    pub fn charge(&mut self, words: u64) {
        self.core.charge(self.node, words);
    }

    pub fn release(&mut self, words: u64) {
        let c = &mut self.core.mem_cur[self.node as usize];
        *c = c.saturating_sub(words);
    }
}

/// A simulated network over a fixed graph. Phases run one after another
/// over the same global round counter; each phase runs until quiescence.
pub struct Network<'g> {
    core: Core<'g>,
    seed: u64,
    phases: Vec<(String, u64)>,
    cast_slot: Vec<u32>,
    cast_mark: Vec<u64>,
    touched_mark: Vec<u64>,
    bucket_start: Vec<u32>,
    p2p_sorted: Vec<(NodeId, NodeId, Message)>,
}

impl<'g> Network<'g> {
    pub fn new(graph: &'g Graph, seed: u64) -> Network<'g> {
        let n = graph.n();
        let mut group_sizes = HashMap::new();
        group_sizes.insert(0, n);
        Network {
            core: Core {
                graph,
                n,
                bandwidth: bandwidth_bits(n),
                groups: vec![0; n],
                uniform_groups: true,
                group_sizes,
                internal: None,
                plans: Vec::new(),
                dense: None,
                plan_index: HashMap::new(),
                bfs_dist: vec![u32::MAX; n],
                round: 0,
                messages: 0,
                steps: 0,
                instance_steps: HashMap::new(),
                step_budgets: HashMap::new(),
                max_rounds: default_max_rounds(n),
                mem_cur: vec![0; n],
                mem_peak: vec![0; n],
                failure: None,
                congest: CongestStats { bandwidth_bits: bandwidth_bits(n), ..CongestStats::default() },
                out_p2p: Vec::new(),
                out_casts: Vec::new(),
                floods: Vec::new(),
                wakes: BinaryHeap::new(),
                transcript: None,
            },
            seed,
            phases: Vec::new(),
            cast_slot: vec![u32::MAX; n],
            cast_mark: vec![u64::MAX; n],
            touched_mark: vec![u64::MAX; n],
            bucket_start: Vec::new(),
            p2p_sorted: Vec::new(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.core.graph
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round(&self) -> u64 {
        self.core.round
    }

    pub fn set_max_rounds(&mut self, max_rounds: u64) {
        self.core.max_rounds = max_rounds.max(1);
    }

    pub fn set_step_budget(&mut self, instance: u32, budget: u64) {
        self.core.step_budgets.insert(instance, budget);
    }

    /// Counts steps of a local computation (e.g. a solve at one node).
    pub fn add_steps(&mut self, instance: u32, steps: u64) {
        self.core.steps += steps;
        *self.core.instance_steps.entry(instance).or_insert(0) += steps;
    }

    pub fn instance_steps(&self, instance: u32) -> u64 {
        self.core.instance_steps.get(&instance).copied().unwrap_or(0)
    }

    pub fn steps(&self) -> u64 {
        self.core.steps
    }

    pub fn messages(&self) -> u64 {
        self.core.messages
    }

    pub fn enable_transcript(&mut self) {
        self.core.transcript.get_or_insert_with(Vec::new);
    }

    pub fn take_transcript(&mut self) -> Option<Vec<String>> {
        self.core.transcript.take()
    }

    /// Replaces the group labels. Flood scopes and group multicasts follow
    /// these labels, which mirror what nodes have learned about each other.
    pub fn set_groups(&mut self, groups: Vec<u32>) {
        assert_eq!(groups.len(), self.core.n);
        let mut sizes = HashMap::new();
        for &g in &groups {
            *sizes.entry(g).or_insert(0usize) += 1;
        }
        self.core.uniform_groups = sizes.len() <= 1;
        self.core.group_sizes = sizes;
        self.core.groups = groups;
        self.core.internal = None;
        self.core.plans.clear();
        self.core.plan_index.clear();
    }

    pub fn groups(&self) -> &[u32] {
        &self.core.groups
    }

    /// Flood eccentricity of `origin` in its current group scope.
    pub fn flood_eccentricity(&mut self, origin: NodeId) -> Option<u32> {
        let pi = self.core.plan_for(origin);
        let p = &self.core.plans[pi as usize];
        p.spans_scope.then_some(p.ecc)
    }

    pub fn failure(&self) -> Option<FailureReason> {
        self.core.failure
    }

    pub fn fail(&mut self, reason: FailureReason) {
        self.core.fail(reason);
    }

    /// Harness-side memory charge (e.g. for a local computation).
    pub fn charge(&mut self, node: NodeId, words: u64) {
        self.core.charge(node, words);
    }

    pub fn release(&mut self, node: NodeId, words: u64) {
        let c = &mut self.core.mem_cur[node as usize];
        *c = c.saturating_sub(words);
    }

    pub fn peak_memory(&self) -> &[u64] {
        &self.core.mem_peak
    }

    /// Records a phase that took no communication rounds.
    pub fn record_local_phase(&mut self, label: &str) {
        self.phases.push((label.to_string(), 0));
    }

    pub fn run_phase<P: NodeProgram>(&mut self, label: &str, programs: &mut [P]) -> u64 {
        self.run_phase_observed(label, programs, |_, _| {})
    }

    /// Runs one phase to quiescence, calling `observe` after every round.
    pub fn run_phase_observed<P, O>(&mut self, label: &str, programs: &mut [P], mut observe: O) -> u64
    where
        P: NodeProgram,
        O: FnMut(&RoundView, &[P]),
    {
        let n = self.core.n;
        assert_eq!(programs.len(), n, "one program per node");
        let start_round = self.core.round;
        if self.core.failure.is_some() {
            self.phases.push((label.to_string(), 0));
            return 0;
        }
        let mut rngs: Vec<NodeRng> = (0..n as NodeId).map(|v| node_rng(self.seed, label, v)).collect();
        let mut halted = vec![false; n];
        let mut sent_to = Vec::new();
        for v in 0..n {
            sent_to.clear();
            let mut ctx = Context {
                core: &mut self.core,
                node: v as NodeId,
                inbox: &[],
                rng: &mut rngs[v],
                sent_to: &mut sent_to,
                cast: None,
                originated: None,
                halted: &mut halted[v],
            };
            programs[v].on_init(&mut ctx);
        }
        let mut inbox: Vec<Incoming> = Vec::new();
        let mut touched: Vec<NodeId> = Vec::new();
        let mut flood_deliv: Vec<(NodeId, Incoming)> = Vec::new();
        loop {
            let c = &mut self.core;
            if c.failure.is_some() {
                break;
            }
            let pending =
                !c.out_p2p.is_empty() || !c.out_casts.is_empty() || !c.floods.is_empty() || !c.wakes.is_empty();
            if !pending {
                break;
            }
            if c.round >= c.max_rounds {
                c.fail(FailureReason::RoundBudgetExceeded);
                break;
            }
            c.round += 1;
            let r = c.round;
            let mut p2p = std::mem::take(&mut c.out_p2p);
            group_by_receiver(&mut p2p, &mut self.p2p_sorted, &mut self.bucket_start, c.graph.n());
            let casts = std::mem::take(&mut c.out_casts);
            touched.clear();
            flood_deliv.clear();

            // Flood deliveries for this round.
            let mut floods = std::mem::take(&mut c.floods);
            for f in &floods {
                let k = (r - f.start) as u32;
                let plan = &c.plans[f.plan as usize];
                let (members, parents) = plan.level(k);
                let info = FloodInfo { origin: plan.origin, completes_at: f.start + plan.ecc as u64, plan: f.plan };
                for (&m, &p) in members.iter().zip(parents) {
                    flood_deliv.push((m, Incoming { from: p, msg: f.msg, flood: Some(info) }));
                }
                if let Some(t) = c.transcript.as_mut() {
                    let (senders, _) = plan.level(k - 1);
                    for &x in senders {
                        for &y in scope_nb(&c.internal, c.uniform_groups, c.graph, x) {
                            if plan.distance(y).is_some_and(|dy| dy + 1 >= k) {
                                push_line(t, r, x, y, &f.msg);
                            }
                        }
                    }
                }
            }
            floods.retain(|f| r - f.start < c.plans[f.plan as usize].last_transit as u64);
            c.floods = floods;
            flood_deliv.sort_unstable_by_key(|&(to, ref m)| (to, m.from));

            while let Some(&Reverse((at, v))) = c.wakes.peek() {
                if at > r {
                    break;
                }
                c.wakes.pop();
                if self.touched_mark[v as usize] != r {
                    self.touched_mark[v as usize] = r;
                    touched.push(v);
                }
            }
            for &(to, _, _) in &p2p {
                if self.touched_mark[to as usize] != r {
                    self.touched_mark[to as usize] = r;
                    touched.push(to);
                }
            }
            for &(to, _) in &flood_deliv {
                if self.touched_mark[to as usize] != r {
                    self.touched_mark[to as usize] = r;
                    touched.push(to);
                }
            }
            if let Some(t) = c.transcript.as_mut() {
                for &(to, from, ref msg) in &p2p {
                    push_line(t, r, from, to, msg);
                }
            }
            let mut own_group_casts = true;
            for (i, &(x, ref msg, aud)) in casts.iter().enumerate() {
                self.cast_slot[x as usize] = i as u32;
                let own = aud == Audience::Group(c.groups[x as usize]);
                own_group_casts &= own;
                let list: &[NodeId] = if own {
                    c.ensure_internal();
                    scope_nb(&c.internal, c.uniform_groups, c.graph, x)
                } else {
                    c.graph.neighbors(x)
                };
                let mut count = 0;
                for &w in list {
                    if !own && !c.admits(aud, w) {
                        continue;
                    }
                    count += 1;
                    self.cast_mark[w as usize] = r;
                    if self.touched_mark[w as usize] != r {
                        self.touched_mark[w as usize] = r;
                        touched.push(w);
                    }
                    if let Some(t) = c.transcript.as_mut() {
                        push_line(t, r, x, w, msg);
                    }
                }
                c.messages += count;
            }
            touched.sort_unstable();

            let (mut pi, mut fi) = (0usize, 0usize);
            for &w in &touched {
                inbox.clear();
                while pi < p2p.len() && p2p[pi].0 < w {
                    pi += 1;
                }
                while pi < p2p.len() && p2p[pi].0 == w {
                    inbox.push(Incoming { from: p2p[pi].1, msg: p2p[pi].2, flood: None });
                    pi += 1;
                }
                while fi < flood_deliv.len() && flood_deliv[fi].0 < w {
                    fi += 1;
                }
                while fi < flood_deliv.len() && flood_deliv[fi].0 == w {
                    inbox.push(flood_deliv[fi].1);
                    fi += 1;
                }
                if !casts.is_empty() && self.cast_mark[w as usize] == r {
                    let list: &[NodeId] = if own_group_casts {
                        scope_nb(&c.internal, c.uniform_groups, c.graph, w)
                    } else {
                        c.graph.neighbors(w)
                    };
                    for &x in list {
                        let slot = self.cast_slot[x as usize];
                        if slot != u32::MAX {
                            let (_, msg, aud) = casts[slot as usize];
                            if c.admits(aud, w) {
                                inbox.push(Incoming { from: x, msg, flood: None });
                            }
                        }
                    }
                }
                if halted[w as usize] {
                    continue;
                }
                inbox.sort_by_key(|m| m.from);
                if let Some(d) = inbox.windows(2).find(|p| p[0].from == p[1].from) {
                    let (from, kind) = (d[0].from, d[1].msg.kind());
                    c.violation(|| format!("edge {from}->{w} carried two messages (second: {})", kind.name()));
                }
                sent_to.clear();
                let mut ctx = Context {
                    core: c,
                    node: w,
                    inbox: &inbox,
                    rng: &mut rngs[w as usize],
                    sent_to: &mut sent_to,
                    cast: None,
                    originated: None,
                    halted: &mut halted[w as usize],
                };
                programs[w as usize].on_round(&mut ctx);
                if c.failure.is_some() {
                    break;
                }
            }
            for &(x, _, _) in &casts {
                self.cast_slot[x as usize] = u32::MAX;
            }
            let view = RoundView { round: r, floods_in_flight: c.floods.len(), steps: c.steps };
            observe(&view, programs);
        }
        if self.core.failure.is_some() {
            self.core.out_p2p.clear();
            self.core.out_casts.clear();
            self.core.floods.clear();
            self.core.wakes.clear();
        }
        let rounds = self.core.round - start_round;
        self.phases.push((label.to_string(), rounds));
        rounds
    }

    /// Closes the run. `success` is the caller's verdict; it is forced to
    /// false when a failure was recorded.
    pub fn finish(self, success: bool) -> SimulationReport {
        let failure = self.core.failure;
        SimulationReport {
            rounds: self.core.round,
            steps: self.core.steps,
            messages: self.core.messages,
            peak_memory_words: self.core.mem_peak,
            success: success && failure.is_none(),
            failure_reason: failure,
            phase_rounds: self.phases,
            congest: self.core.congest,
        }
    }
}

/// Stable reorder of `msgs` by receiver. Large batches use a counting
/// pass over all `n` receivers; small ones a merge sort. Both give the
/// same order.
fn group_by_receiver(
    msgs: &mut Vec<(NodeId, NodeId, Message)>,
    scratch: &mut Vec<(NodeId, NodeId, Message)>,
    start: &mut Vec<u32>,
    n: usize,
) {
    if msgs.is_empty() {
        return;
    }
    if msgs.len() * 4 < n {
        msgs.sort_by_key(|&(to, _, _)| to);
        return;
    }
    start.clear();
    start.resize(n + 1, 0);
    for &(to, _, _) in msgs.iter() {
        start[to as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    scratch.clear();
    scratch.resize(msgs.len(), msgs[0]);
    for &m in msgs.iter() {
        let slot = &mut start[m.0 as usize];
        scratch[*slot as usize] = m;
        *slot += 1;
    }
    std::mem::swap(msgs, scratch);
}

fn scope_nb<'a>(
    internal: &'a Option<(Vec<usize>, Vec<NodeId>)>,
    uniform: bool,
    graph: &'a Graph,
    u: NodeId,
) -> &'a [NodeId] {
    match internal {
        Some((off, tg)) if !uniform => &tg[off[u as usize]..off[u as usize + 1]],
        _ => graph.neighbors(u),
    }
}

fn push_line(t: &mut Vec<String>, round: u64, from: NodeId, to: NodeId, msg: &Message) {
    let mut line = format!("{round} {from} {to} {}", msg.kind().name());
    for i in 0..4 {
        if i < msg.arity() {
            let _ = write!(line, " {}", msg.field(i));
        } else {
            line.push_str(" -");
        }
    }
    t.push(line);
}

/// Global safety net: `64 · n · ln²n` rounds.
pub fn default_max_rounds(n: usize) -> u64 {
    let ln = (n.max(3) as f64).ln();
    (64.0 * n as f64 * ln * ln).ceil() as u64
}
