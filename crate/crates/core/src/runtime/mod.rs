//! Synchronous round-based CONGEST executor.
//!
//! A [`Network`] owns the round counter, the delivery queues and all
//! accounting for one run. Algorithms supply one [`NodeProgram`] per node
//! and advance through named phases; each phase runs until no message is
//! in flight and no node asked to be woken.
//!
//! Three ways to put bits on the wire are available to programs:
//! point-to-point [`Context::send`], neighborhood [`Context::multicast`]
//! (one copy per addressed neighbor, counted individually), and
//! [`Context::flood`], a broadcast over the sender's group that delivers
//! to a member at distance `d` exactly `d` rounds after it starts.
//!
//! Every edge may carry at most one message per direction per round and
//! every message must fit a tag plus four fields of `⌈log₂ n⌉` bits.
//! Breaches are counted in [`CongestStats`], never silently accepted.
//!
//! Memory is counted in words; one word holds one identifier, one index or
//! one queued record. The port table (adjacency list) is input and is not
//! charged.

mod flood;
mod message;
mod network;
pub mod programs;
mod rng;

use std::fmt;

pub use message::{bandwidth_bits, field_bits, Message, MessageKind, MAX_FIELDS, SUBTYPES, TAG_BITS};
pub use network::{default_max_rounds, Audience, Context, FloodInfo, Incoming, Network, NodeProgram, RoundView};
pub use rng::{derive_seed, domain_hash, node_rng, NodeRng};

use crate::graph::{Graph, NodeId};

/// Why a run stopped without producing a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailureReason {
    UnusedExhausted,
    PartitionDisconnected,
    RootSolveFailed,
    StepBudgetExceeded,
    RoundBudgetExceeded,
    HypernodeGraphDisconnected,
    NoBridgeFound { level: u32, pair: (u32, u32) },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::UnusedExhausted => f.write_str("unused_exhausted"),
            FailureReason::PartitionDisconnected => f.write_str("partition_disconnected"),
            FailureReason::RootSolveFailed => f.write_str("root_solve_failed"),
            FailureReason::StepBudgetExceeded => f.write_str("step_budget_exceeded"),
            FailureReason::RoundBudgetExceeded => f.write_str("round_budget_exceeded"),
            FailureReason::HypernodeGraphDisconnected => f.write_str("hypernode_graph_disconnected"),
            FailureReason::NoBridgeFound { level, pair } => {
                write!(f, "no_bridge_found(level={level};pair={}-{})", pair.0, pair.1)
            }
        }
    }
}

/// Bandwidth accounting for a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CongestStats {
    pub violations: u64,
    pub max_message_bits: u32,
    pub bandwidth_bits: u32,
    pub first_violation: Option<String>,
}

/// Outcome and cost of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationReport {
    pub rounds: u64,
    /// Rotation-algorithm steps (extensions plus rotations) over all instances.
    pub steps: u64,
    pub messages: u64,
    /// Peak charged words, indexed by node.
    pub peak_memory_words: Vec<u64>,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    /// Rounds per phase in execution order; sums to `rounds`.
    pub phase_rounds: Vec<(String, u64)>,
    pub congest: CongestStats,
}

impl SimulationReport {
    pub fn phase(&self, label: &str) -> u64 {
        self.phase_rounds.iter().filter(|(l, _)| l == label).map(|(_, r)| r).sum()
    }

    /// Sum over phases whose label starts with `prefix`.
    pub fn phases_with_prefix(&self, prefix: &str) -> u64 {
        self.phase_rounds.iter().filter(|(l, _)| l.starts_with(prefix)).map(|(_, r)| r).sum()
    }

    pub fn max_peak_memory(&self) -> u64 {
        self.peak_memory_words.iter().copied().max().unwrap_or(0)
    }
}

/// Limits for a single-phase [`run`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub max_rounds: u64,
    /// Step budget of instance 0, if any.
    pub max_steps: Option<u64>,
}

impl Budgets {
    pub fn for_graph(g: &Graph) -> Budgets {
        Budgets { max_rounds: default_max_rounds(g.n()), max_steps: None }
    }
}

/// Runs one phase of programs built by `factory` and reports. The run
/// counts as successful when no failure was recorded.
pub fn run<P, F>(g: &Graph, factory: F, seed: u64, budgets: Budgets) -> SimulationReport
where
    P: NodeProgram,
    F: FnMut(NodeId) -> P,
{
    run_with_transcript(g, factory, seed, budgets, false).0
}

/// Like [`run`], optionally returning the message transcript.
pub fn run_with_transcript<P, F>(
    g: &Graph,
    factory: F,
    seed: u64,
    budgets: Budgets,
    transcript: bool,
) -> (SimulationReport, Option<Vec<String>>)
where
    P: NodeProgram,
    F: FnMut(NodeId) -> P,
{
    let mut net = Network::new(g, seed);
    net.set_max_rounds(budgets.max_rounds);
    if let Some(s) = budgets.max_steps {
        net.set_step_budget(0, s);
    }
    if transcript {
        net.enable_transcript();
    }
    let mut programs: Vec<P> = g.nodes().map(factory).collect();
    net.run_phase("main", &mut programs);
    let t = net.take_transcript();
    (net.finish(true), t)
}

/// Step budget `⌈mult · s · ln s⌉` for a rotation instance of size `s`.
pub fn step_budget(s: usize, mult: f64) -> u64 {
    if s < 2 {
        return 0;
    }
    (mult * s as f64 * (s as f64).ln()).ceil() as u64
}
