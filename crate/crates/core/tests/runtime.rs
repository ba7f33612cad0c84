use std::collections::HashMap;

use dhc::graph::{generate_gnp, GnpParams, Graph, NodeId};
use dhc::runtime::{
    bandwidth_bits, run, run_with_transcript, Audience, Budgets, Context, Message, MessageKind, Network, NodeProgram,
    TAG_BITS,
};
use proptest::prelude::*;
use rand::Rng;

/// Sends the listed messages in round 1 and records what arrives.
#[derive(Default)]
struct Script {
    sends: Vec<(NodeId, Message)>,
    cast: Option<(Message, Audience)>,
    got: Vec<(NodeId, Message)>,
}

impl NodeProgram for Script {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if let Some((m, aud)) = self.cast {
            ctx.multicast(m, aud);
        }
        for &(to, m) in &self.sends {
            ctx.send(to, m);
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        self.got.extend(ctx.inbox().iter().map(|m| (m.from, m.msg)));
    }
}

fn script_run(g: &Graph, mut progs: Vec<Script>) -> (dhc::runtime::SimulationReport, Vec<Script>) {
    let mut net = Network::new(g, 1);
    net.run_phase("main", &mut progs);
    (net.finish(true), progs)
}

fn ping(x: u32) -> Message {
    Message::new(MessageKind::Control, &[1, x])
}

#[test]
fn two_messages_on_one_edge_is_a_violation() {
    let g = Graph::path(2);
    let mut progs: Vec<Script> = (0..2).map(|_| Script::default()).collect();
    progs[0].sends = vec![(1, ping(1)), (1, ping(2))];
    let (rep, _) = script_run(&g, progs);
    assert_eq!(rep.congest.violations, 1);
    assert!(rep.congest.first_violation.unwrap().contains("0->1"));
}

#[test]
fn both_directions_may_carry_a_message() {
    let g = Graph::path(2);
    let mut progs: Vec<Script> = (0..2).map(|_| Script::default()).collect();
    progs[0].sends = vec![(1, ping(1))];
    progs[1].sends = vec![(0, ping(2))];
    let (rep, progs) = script_run(&g, progs);
    assert_eq!(rep.congest.violations, 0);
    assert_eq!(progs[0].got, vec![(1, ping(2))]);
    assert_eq!(progs[1].got, vec![(0, ping(1))]);
}

#[test]
fn non_neighbor_and_oversized_messages_are_violations() {
    let g = Graph::path(3);
    let mut progs: Vec<Script> = (0..3).map(|_| Script::default()).collect();
    progs[0].sends = vec![(2, ping(1))];
    let (rep, progs) = script_run(&g, progs);
    assert_eq!(rep.congest.violations, 1);
    assert!(progs[2].got.is_empty());

    let mut progs: Vec<Script> = (0..3).map(|_| Script::default()).collect();
    // A field larger than n does not fit in ⌈log₂ n⌉ bits.
    progs[0].sends = vec![(1, Message::new(MessageKind::Progress, &[1000]))];
    let (rep, _) = script_run(&g, progs);
    assert_eq!(rep.congest.violations, 1);
}

#[test]
fn multicast_then_send_on_same_edge_is_a_violation() {
    let g = Graph::star(4);
    let mut progs: Vec<Script> = (0..4).map(|_| Script::default()).collect();
    progs[0].cast = Some((ping(3), Audience::All));
    progs[0].sends = vec![(2, ping(2))];
    let (rep, progs) = script_run(&g, progs);
    // Flagged once by the sender and once when leaf 2 gets two messages.
    assert_eq!(rep.congest.violations, 2);
    for leaf in &progs[1..] {
        assert!(leaf.got.contains(&(0, ping(3))));
    }
}

#[test]
fn inbox_is_sorted_by_sender() {
    let g = Graph::complete(9);
    let mut progs: Vec<Script> = (0..9).map(|_| Script::default()).collect();
    for (v, p) in progs.iter_mut().enumerate().skip(1).rev() {
        p.sends = vec![(0, ping(v as u32))];
    }
    let (_, progs) = script_run(&g, progs);
    let from: Vec<NodeId> = progs[0].got.iter().map(|g| g.0).collect();
    assert_eq!(from, (1..9).collect::<Vec<_>>());
}

#[test]
fn largest_message_fits_the_bandwidth() {
    for n in [2usize, 3, 8, 9, 1000, 4096, 16384] {
        let lg = (n as f64).log2().ceil().max(1.0) as u32;
        assert_eq!(bandwidth_bits(n), TAG_BITS + 4 * lg, "n = {n}");
        let m = Message::new(MessageKind::Verified, &[n as u32, n as u32, n as u32, n as u32]);
        assert!(m.fits(n));
        assert!(m.size_bits(n) <= bandwidth_bits(n));
    }
}

/// Floods once from node 0 and counts receipts.
struct FloodCount {
    start: bool,
    receipts: u32,
    done_at: Option<u64>,
}

impl NodeProgram for FloodCount {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        if self.start {
            self.done_at = ctx.flood(ping(1));
        }
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        for m in ctx.inbox() {
            if let Some(f) = m.flood {
                self.receipts += 1;
                self.done_at = Some(f.completes_at);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn flood_reaches_every_group_member_once(n in 2usize..60, p in 0.1f64..0.9, seed in 0u64..500, k in 1u32..4) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let mut rng = dhc::runtime::node_rng(seed, "groups", 0);
        let groups: Vec<u32> = (0..n).map(|v| if v == 0 { 0 } else { rng.gen_range(0..k) }).collect();
        let mut net = Network::new(&g, seed);
        net.set_groups(groups.clone());
        let mut progs: Vec<FloodCount> =
            (0..n).map(|v| FloodCount { start: v == 0, receipts: 0, done_at: None }).collect();
        let rounds = net.run_phase("flood", &mut progs);
        let members: Vec<NodeId> = g.induced(&(0..n as NodeId).filter(|&v| groups[v as usize] == 0).collect::<Vec<_>>())
            .members().to_vec();
        let connected = g.induced(&members).is_connected();
        let rep = net.finish(true);
        prop_assert_eq!(rep.congest.violations, 0);
        if connected {
            prop_assert!(rep.failure_reason.is_none());
            for v in 1..n {
                let want = u32::from(groups[v] == 0);
                prop_assert_eq!(progs[v].receipts, want, "node {}", v);
            }
            let ecc = g.induced(&members).eccentricity(0).unwrap() as u64;
            prop_assert_eq!(progs[0].done_at, Some(ecc));
            prop_assert!(rounds >= ecc);
        } else {
            prop_assert!(rep.failure_reason.is_some());
        }
    }
}

/// Each round, sends to a random subset of neighbors, one message each.
struct Chatter {
    rounds: u64,
    sent: Vec<(u64, NodeId, u32)>,
    got: Vec<(u64, NodeId, u32)>,
}

impl Chatter {
    fn talk(&mut self, ctx: &mut Context<'_, '_>) {
        if ctx.round() >= self.rounds {
            return;
        }
        let nb = ctx.neighbors();
        let n = ctx.n() as u32;
        for &w in nb {
            if ctx.rng().gen_bool(0.4) {
                let x = ctx.rng().gen_range(0..n);
                ctx.send(w, ping(x));
                self.sent.push((ctx.round() + 1, w, x));
            }
        }
        ctx.wake_next_round();
    }
}

impl NodeProgram for Chatter {
    fn on_init(&mut self, ctx: &mut Context<'_, '_>) {
        self.talk(ctx);
    }

    fn on_round(&mut self, ctx: &mut Context<'_, '_>) {
        let r = ctx.round();
        for m in ctx.inbox() {
            self.got.push((r, m.from, m.msg.field(1)));
        }
        self.talk(ctx);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn delivered_equals_sent(n in 2usize..40, p in 0.05f64..1.0, seed in 0u64..1000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let mut net = Network::new(&g, seed);
        let mut progs: Vec<Chatter> = (0..n).map(|_| Chatter { rounds: 5, sent: vec![], got: vec![] }).collect();
        net.run_phase("chatter", &mut progs);
        let rep = net.finish(true);
        prop_assert_eq!(rep.congest.violations, 0);
        let mut sent: HashMap<(u64, NodeId, NodeId), u32> = HashMap::new();
        for (v, pr) in progs.iter().enumerate() {
            for &(r, to, x) in &pr.sent {
                sent.insert((r, v as NodeId, to), x);
            }
        }
        let mut got = HashMap::new();
        for (v, pr) in progs.iter().enumerate() {
            for &(r, from, x) in &pr.got {
                prop_assert!(got.insert((r, from, v as NodeId), x).is_none());
            }
        }
        prop_assert_eq!(rep.messages as usize, sent.len());
        prop_assert_eq!(sent, got);
    }

    #[test]
    fn equal_inputs_give_equal_reports(n in 2usize..40, p in 0.05f64..1.0, seed in 0u64..1000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let mk = |_| Chatter { rounds: 4, sent: vec![], got: vec![] };
        let a = run_with_transcript(&g, mk, seed, Budgets::for_graph(&g), true);
        let b = run_with_transcript(&g, mk, seed, Budgets::for_graph(&g), true);
        prop_assert_eq!(&a.0, &b.0);
        prop_assert_eq!(&a.1, &b.1);
        prop_assert_eq!(a.0, run(&g, mk, seed, Budgets::for_graph(&g)));
    }
}
