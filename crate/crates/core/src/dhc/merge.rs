//! Pairwise merging of class cycles.
//!
//! At every level the cycle of odd color `c` (active) looks for a bridge
//! to the cycle of color `c + 1` (passive): a cycle edge `(a, succ a)`
//! and a cycle edge `(b, b')` with `a ~ b` and `succ a ~ b'`. Removing the
//! two cycle edges and adding the two cross edges gives one cycle.
//!
//! Discovery: every active `v` sends `succ v` to its passive neighbors.
//! A passive `w` asks its own cycle neighbors, one query per round,
//! whether they are adjacent to that node; a query and the answer to the
//! neighbor's previous query share one message. Each confirmation becomes
//! a candidate reported back to `v`. The active class then agrees on the
//! candidate with the smallest key, and its endpoints renumber both
//! cycles into one, starting at `succ a`.

use std::collections::VecDeque;

use super::{finish_run, phase1, DhcOptions, DhcRun, DhcTrace, NodeState};
use crate::graph::{Graph, NodeId};
use crate::runtime::programs::ctrl;
use crate::runtime::{Audience, Context, FailureReason, Message, MessageKind, Network, NodeProgram};
use crate::verify::Certificate;

/// `⌈n^(1-δ)⌉` colors.
pub fn dhc2_colors(n: usize, delta: f64) -> u32 {
    ((n as f64).powf(1.0 - delta).ceil() as u32).max(1)
}

/// `⌈log₂ k⌉` merge levels.
pub fn merge_levels(k: u32) -> u32 {
    k.next_power_of_two().trailing_zeros()
}

/// Cycle edge `(a, sa)` of the active cycle, `sa = succ a`, and cycle
/// edge `(b, b2)` of the passive cycle, with cross edges `a ~ b` and
/// `sa ~ b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bridge {
    pub a: NodeId,
    pub sa: NodeId,
    pub b: NodeId,
    pub b2: NodeId,
}

impl Bridge {
    /// Total order used to agree on one bridge: both undirected cycle
    /// edges, then the endpoint `b`.
    pub fn key(&self) -> (NodeId, NodeId, NodeId, NodeId, NodeId) {
        (self.a.min(self.sa), self.a.max(self.sa), self.b.min(self.b2), self.b.max(self.b2), self.b)
    }

    fn fields(&self) -> [u32; 4] {
        [self.a, self.sa, self.b, self.b2]
    }

    fn from_fields(f: &[u32]) -> Bridge {
        Bridge { a: f[0], sa: f[1], b: f[2], b2: f[3] }
    }
}

/// All bridges between two cycles given in successor order.
pub fn find_bridges(g: &Graph, ci: &[NodeId], cj: &[NodeId]) -> Vec<Bridge> {
    let mut out = Vec::new();
    let (si, sj) = (ci.len(), cj.len());
    for p in 0..si {
        let (a, sa) = (ci[p], ci[(p + 1) % si]);
        for q in 0..sj {
            let b = cj[q];
            if !g.has_edge(a, b) {
                continue;
            }
            let mut nb = vec![cj[(q + 1) % sj], cj[(q + sj - 1) % sj]];
            nb.dedup();
            for b2 in nb {
                if b2 != b && g.has_edge(sa, b2) {
                    out.push(Bridge { a, sa, b, b2 });
                }
            }
        }
    }
    out
}

/// The merged cycle in successor order, starting at `sa`.
pub fn merge_cycles(ci: &[NodeId], cj: &[NodeId], br: &Bridge) -> Vec<NodeId> {
    let (si, sj) = (ci.len(), cj.len());
    let pa = ci.iter().position(|&x| x == br.sa).expect("sa on the active cycle");
    let pb = cj.iter().position(|&x| x == br.b).expect("b on the passive cycle");
    let mut order: Vec<NodeId> = (0..si).map(|t| ci[(pa + t) % si]).collect();
    let forward = cj[(pb + sj - 1) % sj] == br.b2;
    for t in 0..sj {
        order.push(if forward { cj[(pb + t) % sj] } else { cj[(pb + sj - t) % sj] });
    }
    order
}

/// New index of position `i` on the active cycle of size `si` when the
/// bridge leaves at position `ia`.
pub fn renumber_first(i: u32, ia: u32, si: u32) -> u32 {
    (i - 1 + si - ia) % si + 1
}

/// New index of position `k` on the passive cycle of size `sj` when the
/// bridge enters at position `ib`. `reverse` is set when `b2 = succ b`,
/// so the merged cycle walks the passive cycle backwards.
pub fn renumber_second(k: u32, ib: u32, si: u32, sj: u32, reverse: bool) -> u32 {
    if reverse {
        si + (ib + sj - k) % sj + 1
    } else {
        si + (k + sj - ib) % sj + 1
    }
}

/// Per-level record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelTrace {
    pub level: u32,
    /// Number of (odd, even) color pairs at this level.
    pub pairs: u32,
    pub bridged: u32,
    /// Candidate reports received by active nodes.
    pub candidates: u64,
    pub rounds: u64,
    /// Whether every class was a valid cycle after the level, if checked.
    pub cycles_valid: Option<bool>,
    /// Every candidate, when requested.
    pub all_candidates: Vec<Bridge>,
    /// The bridge each pair built, when candidates are requested.
    pub winners: Vec<Bridge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Active,
    Passive,
    Idle,
}

fn role(color: u32, k: u32) -> Role {
    if color.is_multiple_of(2) {
        Role::Passive
    } else if color < k {
        Role::Active
    } else {
        Role::Idle
    }
}

/// Queued point-to-point messages, at most one per destination per round.
#[derive(Clone, Debug, Default)]
struct Outbox {
    queue: Vec<(NodeId, Message)>,
    used: Vec<NodeId>,
}

impl Outbox {
    fn push(&mut self, ctx: &mut Context<'_, '_>, to: NodeId, msg: Message) {
        ctx.charge(2);
        self.queue.push((to, msg));
    }

    fn flush(&mut self, ctx: &mut Context<'_, '_>) {
        if self.queue.is_empty() {
            return;
        }
        self.used.clear();
        let mut kept = 0;
        for i in 0..self.queue.len() {
            let (to, msg) = self.queue[i];
            if self.used.contains(&to) {
                self.queue[kept] = (to, msg);
                kept += 1;
            } else {
                self.used.push(to);
                ctx.send(to, msg);
                ctx.release(2);
            }
        }
        self.queue.truncate(kept);
    }
}

/// Passive side of one cycle edge: answers owed to that neighbor.
#[derive(Clone, Debug, Default)]
struct Side {
    answers: VecDeque<(NodeId, bool)>,
}

struct Discover {
    state: NodeState,
    role: Role,
    /// Passive side: `(v, succ v)` still to be asked about.
    queue: VecDeque<(NodeId, NodeId)>,
    /// Passive side: `(succ v, v, replies seen)` of open queries.
    pending: VecDeque<(NodeId, NodeId, u8)>,
    /// Answers owed to `succ` and `pred`.
    sides: [Side; 2],
    out: Outbox,
    best: Option<(Bridge, u32)>,
    found: u64,
    keep_all: bool,
    all: Vec<Bridge>,
}

impl Discover {
    fn new(state: NodeState, k: u32, keep_all: bool) -> Discover {
        Discover {
            state,
            role: role(state.color, k),
            queue: VecDeque::new(),
            pending: VecDeque::new(),
            sides: Default::default(),
            out: Outbox::default(),
            best: None,
            found: 0,
            keep_all,
            all: Vec::new(),
        }
    }

    fn on_check(&mut self, ctx: &mut Context<'_, '_>, from: NodeId, f: &[u32]) {
        // Ids travel offset by one so that 0 can mean "nothing".
        let (ask, answer, yes) = (f[1], f[2], f[3] == 1);
        if ask > 0 {
            let side = usize::from(from != self.state.succ);
            ctx.charge(1);
            self.sides[side].answers.push_back((ask - 1, ctx.has_neighbor(ask - 1)));
        }
        if answer == 0 {
            return;
        }
        let x = answer - 1;
        let Some(i) = self.pending.iter().position(|p| p.0 == x) else { return };
        let v = self.pending[i].1;
        if yes {
            let size = self.state.size;
            self.out.push(ctx, v, Message::new(MessageKind::Verified, &[from, size]));
        }
        self.pending[i].2 += 1;
        if self.pending[i].2 == 2 {
            self.pending.remove(i);
            ctx.release(2);
        }
    }

    fn on_verified(&mut self, ctx: &mut Context<'_, '_>, from: NodeId, y: NodeId, size: u32) {
        let br = Bridge { a: ctx.id(), sa: self.state.succ, b: from, b2: y };
        self.found += 1;
        if self.keep_all {
            self.all.push(br);
        }
        if self.best.is_none_or(|(cur, _)| br.key() < cur.key()) {
            self.best = Some((br, size));
        }
    }

    /// One combined message per cycle edge: the next query and the oldest
    /// answer owed to that neighbor.
    fn exchange(&mut self, ctx: &mut Context<'_, '_>) {
        let ask = self.queue.pop_front().map(|(v, x)| {
            ctx.release(2);
            ctx.charge(2);
            self.pending.push_back((x, v, 0));
            x + 1
        });
        let s = self.state;
        for (side, to) in [(0, s.succ), (1, s.pred)] {
            let answer = self.sides[side].answers.pop_front();
            if ask.is_none() && answer.is_none() {
                continue;
            }
            if answer.is_some() {
                ctx.release(1);
            }
            let (a, yes) = answer.map_or((0, 0), |(x, y)| (x + 1, y as u32));
            ctx.send(to, Message::new(MessageKind::Control, &[ctrl::CHECK, ask.unwrap_or(0), a, yes]));
        }
    }
}

impl NodeProgram for Discover {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.role == Role::Active {
            ctx.charge(6);
            let msg = Message::new(MessageKind::Verify, &[self.state.succ]);
            ctx.multicast(msg, Audience::Group(self.state.color + 1));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i];
            match (m.msg.kind(), m.msg.field(0)) {
                (MessageKind::Verify, x) => {
                    ctx.charge(2);
                    self.queue.push_back((m.from, x));
                }
                (MessageKind::Control, ctrl::CHECK) => self.on_check(ctx, m.from, m.msg.fields()),
                (MessageKind::Verified, y) => self.on_verified(ctx, m.from, y, m.msg.field(1)),
                _ => {}
            }
        }
        self.exchange(ctx);
        self.out.flush(ctx);
        let owed = self.sides.iter().any(|s| !s.answers.is_empty());
        if !self.queue.is_empty() || !self.out.queue.is_empty() || owed {
            ctx.wake_next_round();
        }
    }
}

/// Min-flooding of the best candidate over the active class.
struct Select {
    active: bool,
    color: u32,
    best: Option<Bridge>,
}

impl NodeProgram for Select {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if let (true, Some(b)) = (self.active, self.best) {
            ctx.multicast(Message::new(MessageKind::Verified, &b.fields()), Audience::Group(self.color));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        if !self.active {
            return;
        }
        let heard = ctx.inbox().iter().map(|m| Bridge::from_fields(m.msg.fields())).min_by_key(|b| b.key());
        if let Some(b) = heard {
            if self.best.is_none_or(|cur| b.key() < cur.key()) {
                self.best = Some(b);
                ctx.multicast(Message::new(MessageKind::Verified, &b.fields()), Audience::Group(self.color));
            }
        }
    }
}

/// Joins the two cycles along the agreed bridge.
struct Build {
    state: NodeState,
    role: Role,
    level: u32,
    best: Option<Bridge>,
    /// Passive size, known to `a` from its own discovery.
    other_size: Option<u32>,
}

impl NodeProgram for Build {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.role != Role::Active {
            return;
        }
        let c = self.state.color;
        let Some(br) = self.best else {
            ctx.fail(FailureReason::NoBridgeFound { level: self.level, pair: (c, c + 1) });
            return;
        };
        if br.a != ctx.id() {
            return;
        }
        let s = &mut self.state;
        let sj = self.other_size.expect("the winner discovered its own bridge");
        ctx.send(br.b, Message::new(MessageKind::BuildBridge, &[br.b2, br.sa, s.size]));
        ctx.flood(Message::new(MessageKind::Renumber, &[s.index, sj, br.b2]));
        s.index = s.size;
        s.succ = br.b;
        s.size += sj;
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        let s = &mut self.state;
        for i in 0..ctx.inbox().len() {
            let m = ctx.inbox()[i];
            let f = m.msg.fields();
            match m.msg.kind() {
                MessageKind::BuildBridge => {
                    let (b2, sa, si) = (f[0], f[1], f[2]);
                    let reverse = b2 == s.succ;
                    ctx.flood(Message::new(MessageKind::Renumber, &[s.index, si, reverse as u32, sa]));
                    s.index = si + 1;
                    if reverse {
                        std::mem::swap(&mut s.pred, &mut s.succ);
                    }
                    s.pred = m.from;
                    s.size += si;
                }
                MessageKind::Renumber if f.len() == 3 => {
                    let (ia, sj, b2) = (f[0], f[1], f[2]);
                    let old = s.index;
                    s.index = renumber_first(old, ia, s.size);
                    if old == ia % s.size + 1 {
                        s.pred = b2;
                    }
                    s.size += sj;
                }
                MessageKind::Renumber => {
                    let (ib, si, reverse, sa) = (f[0], f[1], f[2] == 1, f[3]);
                    let old = s.index;
                    s.index = renumber_second(old, ib, si, s.size, reverse);
                    let b2_index = if reverse { ib % s.size + 1 } else { (ib + s.size - 2) % s.size + 1 };
                    if reverse {
                        std::mem::swap(&mut s.pred, &mut s.succ);
                    }
                    if old == b2_index {
                        s.succ = sa;
                    }
                    s.size += si;
                }
                _ => {}
            }
        }
    }
}

/// Whether the nodes of every color form a cycle through `succ`, with
/// matching `pred`, consecutive indices and the right sizes.
pub(crate) fn states_valid(g: &Graph, states: &[NodeState]) -> bool {
    let mut count = std::collections::HashMap::new();
    for s in states {
        *count.entry(s.color).or_insert(0u32) += 1;
    }
    states.iter().enumerate().all(|(v, s)| {
        let t = &states[s.succ as usize];
        g.has_edge(v as NodeId, s.succ)
            && t.pred == v as NodeId
            && t.color == s.color
            && s.size == count[&s.color]
            && t.index == s.index % s.size + 1
    })
}

/// Whether `(pred, succ)` links describe, per color, one cycle through
/// graph edges.
pub fn cycles_valid(g: &Graph, colors: &[u32], pred: &[NodeId], succ: &[NodeId]) -> bool {
    let n = g.n();
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let members = colors.iter().filter(|&&c| c == colors[s]).count();
        let mut cur = s;
        let mut len = 0;
        loop {
            if seen[cur] && cur != s {
                return false;
            }
            seen[cur] = true;
            len += 1;
            let nx = succ[cur] as usize;
            if !g.has_edge(cur as NodeId, nx as NodeId) || pred[nx] as usize != cur || colors[nx] != colors[s] {
                return false;
            }
            cur = nx;
            if cur == s || len > members {
                break;
            }
        }
        if len != members {
            return false;
        }
    }
    true
}

/// Class cycles merged pairwise over `⌈log₂ K⌉` levels, with
/// `⌈n^(1-δ)⌉` colors.
pub fn dhc2(g: &Graph, seed: u64, delta: f64, opts: &DhcOptions) -> DhcRun {
    let k = dhc2_colors(g.n(), delta);
    let mut net = Network::new(g, seed);
    if opts.transcript {
        net.enable_transcript();
    }
    let mut trace = DhcTrace::default();
    let Some(mut states) = phase1(&mut net, k, opts.step_mult, &mut trace) else {
        return finish_run(net, None, trace);
    };
    let mut kl = k;
    for level in 1..=merge_levels(k) {
        let start = net.round();
        let mut lt = LevelTrace { level, pairs: kl / 2, ..LevelTrace::default() };
        net.set_groups(states.iter().map(|s| s.color).collect());

        let tag = format!("phase2.level{level}");
        let mut disc: Vec<Discover> = states.iter().map(|&s| Discover::new(s, kl, opts.trace_candidates)).collect();
        net.run_phase(&format!("{tag}.discover"), &mut disc);
        let mut select: Vec<Select> = disc
            .iter()
            .map(|d| Select { active: d.role == Role::Active, color: d.state.color, best: d.best.map(|b| b.0) })
            .collect();
        net.run_phase(&format!("{tag}.select"), &mut select);
        lt.candidates = disc.iter().map(|d| d.found).sum();
        if opts.trace_candidates {
            lt.all_candidates = disc.iter().flat_map(|d| d.all.iter().copied()).collect();
        }
        let mut build: Vec<Build> = disc
            .iter()
            .zip(&select)
            .map(|(d, sel)| {
                let own = d.best.filter(|b| Some(b.0) == sel.best).map(|b| b.1);
                Build { state: d.state, role: d.role, level, best: sel.best, other_size: own }
            })
            .collect();
        net.run_phase(&format!("{tag}.build"), &mut build);
        lt.bridged = build
            .iter()
            .enumerate()
            .filter(|(v, b)| b.role == Role::Active && b.best.is_some_and(|br| br.a == *v as NodeId))
            .count() as u32;
        if opts.trace_candidates {
            lt.winners = build
                .iter()
                .enumerate()
                .filter_map(|(v, b)| b.best.filter(|br| b.role == Role::Active && br.a == v as NodeId))
                .collect();
        }
        lt.rounds = net.round() - start;
        if net.failure().is_some() {
            trace.levels.push(lt);
            return finish_run(net, None, trace);
        }
        states = build.into_iter().map(|b| NodeState { color: b.state.color.div_ceil(2), ..b.state }).collect();
        kl = kl.div_ceil(2);
        if opts.check_levels {
            lt.cycles_valid = Some(states_valid(g, &states));
        }
        trace.levels.push(lt);
    }
    let cert = Certificate::from_links(states.iter().map(|s| (s.pred, s.succ)).collect());
    finish_run(net, Some(cert), trace)
}
