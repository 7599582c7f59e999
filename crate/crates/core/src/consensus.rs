//! Per-node state machine of the randomized constraints consensus algorithm.
//!
//! Each round a node first verifies its candidate point against a fresh
//! multi-sample of its uncertain set (skipped when the candidate did not move),
//! then re-solves its local problem over the violated sampled rows, its own
//! basis and the bases received from in-neighbours. A node halts once its
//! candidate has stayed the same for the configured number of rounds.
//!
//! With a scenario bound configured, a node whose sample size reaches the
//! bound stops drawing new samples and keeps re-checking against the last
//! multi-sample (plus its nominal realization) from then on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Basis, ConstraintSystem, LinearConstraint, MixedIntegerSpace, Point, FEASIBILITY_TOL};
use crate::milp::{solve_mip, SolveStatus, SolverConfig};
use crate::rng::{purpose, substream};
use crate::uncertainty::{
    draw_multisample, scan_draws, scenario_bound, verify, Draw, SampleSchedule, UncertainConstraintSet,
    ViolationCertificate,
};

/// Largest number of certificates a verification may return.
pub const MAX_CERTIFICATES: usize = 10;

/// Scenario bound parameters used to decide when a node freezes its samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSettings {
    pub eps: f64,
    pub delta: f64,
    pub helly: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Certificates per verification (1 ..= 10).
    pub certificates: usize,
    pub solver: SolverConfig,
    pub scenario: Option<ScenarioSettings>,
    /// Rounds of unchanged candidate before halting.
    pub halt_threshold: u64,
    /// Master seed for verification substreams.
    pub seed: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            certificates: 1,
            solver: SolverConfig::default(),
            scenario: None,
            halt_threshold: 1,
            seed: 0,
        }
    }
}

/// What a node publishes to its out-neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMessage {
    pub sender: u32,
    pub basis: Arc<Basis>,
    pub sender_frozen: bool,
    pub sender_all_frozen: bool,
}

/// Outcome of a verification step.
#[derive(Clone, Debug, Default)]
pub struct Verification {
    pub certificates: Vec<ViolationCertificate>,
    /// A fresh multi-sample was drawn (the counter advanced).
    pub sampled: bool,
    /// The candidate was checked against the frozen multi-sample.
    pub rechecked_frozen: bool,
}

/// Outcome of an optimization step.
#[derive(Clone, Debug)]
pub struct Optimization {
    pub candidate_changed: bool,
    pub basis_changed: bool,
    /// Freshly emitted message, present only when the basis changed.
    pub message: Option<Arc<NodeMessage>>,
    pub solved: bool,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    id: u32,
    space: MixedIntegerSpace,
    objective: Vec<f64>,
    set: UncertainConstraintSet,
    schedule: SampleSchedule,
    config: NodeConfig,
    scenario_size: Option<u64>,

    candidate: Point,
    basis: Arc<Basis>,
    candidate_changed: bool,
    unchanged: u64,
    halted: bool,

    frozen: bool,
    frozen_draws: Option<Arc<(u64, Vec<Draw>)>>,
    last_multisample: Option<(u64, Vec<Draw>)>,
    recheck: bool,
    all_frozen_seen: bool,
    frozen_streak: u64,

    published: Arc<NodeMessage>,
    transmissions: u64,
    flag_updates: u64,
    local_solves: u64,
}

impl NodeState {
    /// Initialization: `k = 1`, solve the nominal realization.
    pub fn init(
        id: u32,
        space: MixedIntegerSpace,
        objective: Vec<f64>,
        set: UncertainConstraintSet,
        schedule: SampleSchedule,
        config: NodeConfig,
    ) -> Result<Self> {
        if !(1..=MAX_CERTIFICATES).contains(&config.certificates) {
            return Err(Error::Config(format!(
                "certificates per verification must be in 1..={MAX_CERTIFICATES}"
            )));
        }
        if set.dim() != space.dim() {
            return Err(crate::error::GeometryError::DimensionMismatch {
                expected: space.dim(),
                found: set.dim(),
            }
            .into());
        }
        let scenario_size = match config.scenario {
            Some(s) => Some(scenario_bound(s.eps, s.delta, s.helly)?),
            None => None,
        };
        let system = ConstraintSystem::new(space, objective.clone(), set.nominal_constraints()?)?;
        let (candidate, basis) = solve_local(id, &system, &config.solver)?;
        let basis = Arc::new(basis);
        let published = Arc::new(NodeMessage {
            sender: id,
            basis: basis.clone(),
            sender_frozen: false,
            sender_all_frozen: false,
        });
        Ok(Self {
            id,
            space,
            objective,
            set,
            schedule,
            config,
            scenario_size,
            candidate,
            basis,
            candidate_changed: true,
            unchanged: 0,
            halted: false,
            frozen: false,
            frozen_draws: None,
            last_multisample: None,
            recheck: false,
            all_frozen_seen: false,
            frozen_streak: 0,
            published,
            transmissions: 1,
            flag_updates: 0,
            local_solves: 1,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn space(&self) -> &MixedIntegerSpace {
        &self.space
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn uncertain_set(&self) -> &UncertainConstraintSet {
        &self.set
    }

    pub fn schedule(&self) -> &SampleSchedule {
        &self.schedule
    }

    /// Verification counter `k`.
    pub fn counter(&self) -> u64 {
        self.schedule.counter()
    }

    pub fn candidate(&self) -> &Point {
        &self.candidate
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// `J(B)`, the cost of the current basis.
    pub fn cost(&self) -> f64 {
        self.basis.cost()
    }

    pub fn unchanged_rounds(&self) -> u64 {
        self.unchanged
    }

    pub fn halt_threshold(&self) -> u64 {
        self.config.halt_threshold
    }

    pub fn set_halt_threshold(&mut self, threshold: u64) {
        self.config.halt_threshold = threshold.max(1);
    }

    pub fn certificates_per_verification(&self) -> usize {
        self.config.certificates
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn all_frozen_seen(&self) -> bool {
        self.all_frozen_seen
    }

    /// Cached multi-sample used after freezing, with its verification counter.
    pub fn frozen_multisample(&self) -> Option<(u64, &[Draw])> {
        self.frozen_draws.as_ref().map(|f| (f.0, f.1.as_slice()))
    }

    /// Scenario bound the node compares its sample size against.
    pub fn scenario_size(&self) -> Option<u64> {
        self.scenario_size
    }

    pub fn published(&self) -> &Arc<NodeMessage> {
        &self.published
    }

    /// Basis transmissions, counting the initial one.
    pub fn transmissions(&self) -> u64 {
        self.transmissions
    }

    /// Re-publications caused only by flag changes.
    pub fn flag_updates(&self) -> u64 {
        self.flag_updates
    }

    pub fn local_solves(&self) -> u64 {
        self.local_solves
    }

    /// Steps V1-V4.
    pub fn verification(&mut self) -> Verification {
        if self.halted || (!self.candidate_changed && !self.recheck) {
            return Verification::default();
        }
        self.recheck = false;
        let r = self.config.certificates;
        let x = self.candidate.coords().to_vec();

        if let Some(frozen) = self.frozen_draws.clone() {
            let mut certificates = self.nominal_certificate(&x).into_iter().collect::<Vec<_>>();
            if certificates.len() < r {
                let (batch, draws) = (&frozen.0, &frozen.1);
                certificates.extend(scan_draws(
                    &x,
                    &self.set,
                    draws.iter().enumerate().map(|(i, d)| (*batch, i as u32, d)),
                    r - certificates.len(),
                ));
            }
            return Verification {
                certificates,
                sampled: false,
                rechecked_frozen: true,
            };
        }

        let batch = self.schedule.counter();
        let mut rng = substream(self.config.seed, &[purpose::VERIFY, self.id as u64, batch]);
        let certificates = if self.config.scenario.is_some() {
            // keep the whole multi-sample so it can be frozen later
            let m = self.schedule.sample_size() as usize;
            let draws = draw_multisample(&self.set, m, &mut rng);
            let certs = scan_draws(
                &x,
                &self.set,
                draws.iter().enumerate().map(|(i, d)| (batch, i as u32, d)),
                r,
            );
            self.last_multisample = Some((batch, draws));
            self.schedule.advance();
            certs
        } else {
            verify(&self.candidate, &self.set, &mut self.schedule, r, &mut rng)
        };
        Verification {
            certificates,
            sampled: true,
            rechecked_frozen: false,
        }
    }

    fn nominal_certificate(&self, x: &[f64]) -> Option<ViolationCertificate> {
        let draw = self.set.nominal_draw();
        let rows = self.set.violated_rows(&draw, x, FEASIBILITY_TOL);
        if rows.is_empty() {
            return None;
        }
        let node = self.id;
        let constraints = self
            .set
            .realize_rows(&draw, &rows, |row| crate::geometry::Provenance::Nominal { node, row })
            .ok()?;
        Some(ViolationCertificate {
            batch: 0,
            index: 0,
            draw,
            constraints,
        })
    }

    /// Steps O1-O2: solve over certificates, own basis and incoming bases.
    pub fn optimization(
        &mut self,
        certificates: &[ViolationCertificate],
        incoming: &[Arc<NodeMessage>],
    ) -> Result<Optimization> {
        let x = self.candidate.coords();
        let incoming_ok = incoming
            .iter()
            .filter(|m| m.sender != self.id)
            .all(|m| m.basis.constraints().iter().all(|c| c.is_satisfied(x)));
        if certificates.is_empty() && incoming_ok {
            // x is optimal for its own basis and feasible for everything new
            self.candidate_changed = false;
            self.unchanged = (self.unchanged + 1).min(self.config.halt_threshold);
            return Ok(Optimization {
                candidate_changed: false,
                basis_changed: false,
                message: None,
                solved: false,
            });
        }

        let mut rows: Vec<LinearConstraint> = certificates
            .iter()
            .flat_map(|c| c.constraints.iter().cloned())
            .collect();
        rows.extend(self.basis.constraints().iter().cloned());
        for m in incoming.iter().filter(|m| m.sender != self.id) {
            rows.extend(m.basis.constraints().iter().cloned());
        }
        let mut system = ConstraintSystem::new(self.space, self.objective.clone(), rows)?;
        system.canonicalize();
        let (point, basis) = solve_local(self.id, &system, &self.config.solver)?;
        self.local_solves += 1;

        if basis.cost() < self.basis.cost() - 1e-9 * (1.0 + self.basis.cost().abs()) {
            log::warn!(
                "node {}: cost decreased from {} to {}",
                self.id,
                self.basis.cost(),
                basis.cost()
            );
        }
        let candidate_changed = !point.same_candidate(&self.candidate, &self.space);
        let basis_changed = !basis.same_members(&self.basis);
        self.candidate = point;
        self.candidate_changed = candidate_changed;
        self.unchanged = if candidate_changed {
            0
        } else {
            (self.unchanged + 1).min(self.config.halt_threshold)
        };
        let mut message = None;
        if basis_changed {
            self.basis = Arc::new(basis);
            self.transmissions += 1;
            self.publish();
            message = Some(self.published.clone());
        }
        Ok(Optimization {
            candidate_changed,
            basis_changed,
            message,
            solved: true,
        })
    }

    fn publish(&mut self) {
        self.published = Arc::new(NodeMessage {
            sender: self.id,
            basis: self.basis.clone(),
            sender_frozen: self.frozen,
            sender_all_frozen: self.all_frozen_seen,
        });
    }

    /// Step O3. Marks the node halted when the threshold is reached.
    pub fn check_halt(&mut self) -> bool {
        if !self.halted && self.unchanged >= self.config.halt_threshold {
            self.halted = true;
        }
        self.halted
    }

    /// Scenario freeze and piggybacked all-frozen detection. Returns `true`
    /// when the node froze during this call.
    pub fn update_freeze(&mut self, incoming: &[Arc<NodeMessage>]) -> bool {
        let Some(bound) = self.scenario_size else {
            return false;
        };
        let mut froze = false;
        if !self.frozen && self.schedule.sample_size() >= bound {
            if let Some(last) = self.last_multisample.take() {
                self.frozen = true;
                self.frozen_draws = Some(Arc::new(last));
                // the nominal rows join the frozen set and have not been checked yet
                self.recheck = true;
                froze = true;
            }
        }
        let was_seen = self.all_frozen_seen;
        if self.frozen && !self.all_frozen_seen {
            let others: Vec<_> = incoming.iter().filter(|m| m.sender != self.id).collect();
            if others.iter().any(|m| m.sender_all_frozen) {
                self.all_frozen_seen = true;
            } else if others.iter().all(|m| m.sender_frozen) {
                self.frozen_streak += 1;
                if self.frozen_streak >= self.config.halt_threshold {
                    self.all_frozen_seen = true;
                }
            } else {
                self.frozen_streak = 0;
            }
        }
        if froze || was_seen != self.all_frozen_seen {
            self.flag_updates += 1;
            self.publish();
        }
        froze
    }

    /// Exact global freeze detection supplied by the simulator.
    pub fn mark_all_frozen(&mut self) {
        if !self.all_frozen_seen {
            self.all_frozen_seen = true;
            self.flag_updates += 1;
            self.publish();
        }
    }
}

fn solve_local(id: u32, system: &ConstraintSystem, config: &SolverConfig) -> Result<(Point, Basis)> {
    let result = solve_mip(system, config)?;
    match (result.status, result.point, result.basis) {
        (SolveStatus::Optimal, Some(p), Some(b)) => {
            if result.box_active {
                log::debug!("node {id}: bounding box active at local optimum");
            }
            Ok((p, b))
        }
        (status, _, _) => Err(Error::LocalSolve { node: id, status }),
    }
}
