//! Round-based simulation of the consensus protocol over an [`EdgeSchedule`].
//!
//! In round `t` every node's published message is snapshotted first, then
//! delivered along the edges live in that round, and only then do the
//! non-halted nodes run verification, optimization, the freeze update and the
//! halting check. Because nodes only read the snapshot, the nodes of one round
//! can run in any order or concurrently with identical results.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_ujsc, diameter, EdgeSchedule};
use crate::consensus::{NodeMessage, NodeState};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::par::{self, Execution};
use crate::rng::{purpose, substream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltMode {
    /// Halt after `2nL + 1` unchanged rounds.
    #[default]
    Path,
    /// Halt after `2D + 1` unchanged rounds; needs a static schedule.
    Diameter,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Nodes must not carry a scenario bound.
    #[default]
    Off,
    /// Global freeze is detected from flags carried on messages.
    Piggyback,
    /// The simulator tells every node as soon as all nodes are frozen.
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    #[default]
    Ascending,
    /// A fresh seeded permutation every round.
    Shuffled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub max_rounds: usize,
    pub halt_mode: HaltMode,
    pub scenario: ScenarioMode,
    pub execution: Execution,
    pub order: NodeOrder,
    /// Run even if the schedule fails the joint connectivity check.
    pub force: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_rounds: 10_000,
            halt_mode: HaltMode::Path,
            scenario: ScenarioMode::Off,
            execution: Execution::default(),
            order: NodeOrder::Ascending,
            force: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Verify,
    Optimize,
    Transmit,
    Halt,
    Freeze,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Verify => "verify",
            EventKind::Optimize => "optimize",
            EventKind::Transmit => "transmit",
            EventKind::Halt => "halt",
            EventKind::Freeze => "freeze",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: usize,
    pub node: u32,
    pub kind: EventKind,
    /// Cost of the node's basis after the event.
    pub cost: f64,
    pub basis_size: usize,
    /// Verification counter after the event.
    pub k: u64,
    pub candidate: Vec<f64>,
}

impl TraceEvent {
    fn of(t: usize, node: &NodeState, kind: EventKind) -> Self {
        Self {
            t,
            node: node.id(),
            kind,
            cost: node.cost(),
            basis_size: node.basis().len(),
            k: node.counter(),
            candidate: node.candidate().coords().to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllHalted,
    MaxRounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub rounds: usize,
    pub termination: Termination,
    pub halt_threshold: u64,
    pub transmissions: Vec<u64>,
    /// Final verification counters `k_i`.
    pub verifications: Vec<u64>,
    pub local_solves: Vec<u64>,
    pub flag_updates: Vec<u64>,
    /// Round in which each node halted.
    pub halted_at: Vec<Option<usize>>,
    pub frozen: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub trace: Vec<TraceEvent>,
    pub solutions: Vec<Point>,
    pub costs: Vec<f64>,
    pub stats: SimStats,
    pub nodes: Vec<NodeState>,
}

impl SimOutcome {
    pub fn halted(&self) -> bool {
        self.stats.termination == Termination::AllHalted
    }
}

/// Header line of the trace CSV.
pub const TRACE_CSV_HEADER: &str = "t,node,event,cost,basis_size,k_i";

/// Writes the trace as CSV. Costs use the shortest round-trip float
/// representation, so equal traces produce byte-identical files.
pub fn write_trace_csv<W: Write>(trace: &[TraceEvent], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for e in trace {
        writeln!(
            out,
            "{},{},{},{:?},{},{}",
            e.t,
            e.node,
            e.kind.as_str(),
            e.cost,
            e.basis_size,
            e.k
        )?;
    }
    Ok(())
}

struct Step {
    events: Vec<TraceEvent>,
    halted: bool,
}

fn step_node(node: &mut NodeState, t: usize, inbox: &[Arc<NodeMessage>]) -> Result<Step> {
    let mut events = Vec::new();
    let v = node.verification();
    if v.sampled || v.rechecked_frozen {
        events.push(TraceEvent::of(t, node, EventKind::Verify));
    }
    let o = node.optimization(&v.certificates, inbox)?;
    if o.solved {
        events.push(TraceEvent::of(t, node, EventKind::Optimize));
    }
    if o.basis_changed {
        events.push(TraceEvent::of(t, node, EventKind::Transmit));
    }
    if node.update_freeze(inbox) {
        events.push(TraceEvent::of(t, node, EventKind::Freeze));
    }
    let halted = node.check_halt();
    if halted {
        events.push(TraceEvent::of(t, node, EventKind::Halt));
    }
    Ok(Step { events, halted })
}

fn halt_threshold(n: usize, schedule: &EdgeSchedule, mode: HaltMode) -> Result<u64> {
    Ok(match mode {
        HaltMode::Path => 2 * (n as u64) * (schedule.window as u64) + 1,
        HaltMode::Diameter => {
            let edges = schedule
                .static_edges()
                .ok_or_else(|| Error::Config("diameter halting needs a static schedule".into()))?;
            2 * diameter(n, edges)? as u64 + 1
        }
    })
}

/// Runs the protocol until every node halts or `max_rounds` rounds pass.
///
/// Node `i` of `nodes` must have id `i`. The nodes' halting thresholds are
/// overwritten according to `config.halt_mode`. Round 0 records the initial
/// transmissions; protocol rounds are numbered from 1.
pub fn run_simulation(mut nodes: Vec<NodeState>, schedule: &EdgeSchedule, config: &SimConfig) -> Result<SimOutcome> {
    let n = nodes.len();
    if n != schedule.n {
        return Err(Error::Config(format!("{n} nodes for a schedule over {} nodes", schedule.n)));
    }
    if config.max_rounds == 0 {
        return Err(Error::Config("max_rounds must be at least 1".into()));
    }
    if let Some(bad) = nodes.iter().enumerate().find(|(i, s)| s.id() as usize != *i) {
        return Err(Error::Config(format!("node at position {} has id {}", bad.0, bad.1.id())));
    }
    if config.scenario == ScenarioMode::Off && nodes.iter().any(|s| s.scenario_size().is_some()) {
        return Err(Error::Config("nodes carry a scenario bound but scenario mode is off".into()));
    }
    if !config.force && !check_ujsc(schedule, schedule.window, config.max_rounds) {
        return Err(Error::NotJointlyConnected(schedule.window));
    }
    let threshold = halt_threshold(n, schedule, config.halt_mode)?;
    for node in &mut nodes {
        node.set_halt_threshold(threshold);
    }

    let mut trace: Vec<TraceEvent> = nodes.iter().map(|s| TraceEvent::of(0, s, EventKind::Transmit)).collect();
    let mut halted_at = vec![None; n];
    let mut rounds = 0;

    for t in 1..=config.max_rounds {
        if nodes.iter().all(NodeState::is_halted) {
            break;
        }
        rounds = t;
        let snapshot: Vec<Arc<NodeMessage>> = nodes.iter().map(|s| s.published().clone()).collect();
        let mut inboxes: Vec<Vec<Arc<NodeMessage>>> = vec![Vec::new(); n];
        for (from, to) in schedule.edges_at(t - 1) {
            inboxes[to].push(snapshot[from].clone());
        }

        let mut order: Vec<usize> = (0..n).collect();
        if config.order == NodeOrder::Shuffled {
            order.shuffle(&mut substream(config.seed, &[purpose::ORDER, t as u64]));
        }
        let mut slots: Vec<Option<&mut NodeState>> = nodes.iter_mut().map(Some).collect();
        let mut work: Vec<(usize, &mut NodeState)> = order
            .iter()
            .filter_map(|&i| slots[i].take().map(|s| (i, s)))
            .filter(|(_, s)| !s.is_halted())
            .collect();
        let steps = par::map_mut(config.execution, &mut work, |(i, node)| {
            step_node(node, t, &inboxes[*i]).map(|s| (*i, s))
        });
        let mut steps = steps.into_iter().collect::<Result<Vec<_>>>()?;
        steps.sort_by_key(|(i, _)| *i);
        for (i, step) in steps {
            if step.halted && halted_at[i].is_none() {
                halted_at[i] = Some(t);
            }
            trace.extend(step.events);
        }

        if config.scenario == ScenarioMode::Oracle && nodes.iter().all(NodeState::is_frozen) {
            nodes.iter_mut().for_each(NodeState::mark_all_frozen);
        }
    }

    let termination = if nodes.iter().all(NodeState::is_halted) {
        Termination::AllHalted
    } else {
        Termination::MaxRounds
    };
    let stats = SimStats {
        rounds,
        termination,
        halt_threshold: threshold,
        transmissions: nodes.iter().map(NodeState::transmissions).collect(),
        verifications: nodes.iter().map(NodeState::counter).collect(),
        local_solves: nodes.iter().map(NodeState::local_solves).collect(),
        flag_updates: nodes.iter().map(NodeState::flag_updates).collect(),
        halted_at,
        frozen: nodes.iter().map(NodeState::is_frozen).collect(),
    };
    Ok(SimOutcome {
        trace,
        solutions: nodes.iter().map(|s| s.candidate().clone()).collect(),
        costs: nodes.iter().map(NodeState::cost).collect(),
        stats,
        nodes,
    })
}
