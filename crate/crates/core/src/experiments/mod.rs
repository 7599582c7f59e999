//! Instance generators, runs, a-posteriori analysis and reporting.

mod localization;
mod milp_gen;
mod posterior;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::{NodeConfig, NodeState, ScenarioSettings};
use crate::error::{Error, Result};
use crate::geometry::{ConstraintSystem, LinearConstraint, MixedIntegerSpace, Point, Provenance};
use crate::milp::{solve_mip, SolveResult, SolverConfig};
use crate::network::{run_simulation, EdgeSchedule, HaltMode, NodeOrder, ScenarioMode, SimConfig, SimOutcome};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, purpose};
use crate::uncertainty::{SampleSchedule, UncertainConstraintSet};

pub use localization::{generate_localization, run_localization, Face, FaceResult, LocalizationOutcome, LocalizationSpec};
pub use milp_gen::{generate_random_milp, MilpInstanceSpec};
pub use posterior::{posterior_violation, POSTERIOR_CHUNK};
pub use report::{
    convergence_series, summarize, write_report_csv, write_series_svg, write_summary_csv, ConvergencePoint,
    RunReport, Summary,
};

/// Version of the instance file layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub set: UncertainConstraintSet,
    pub eps: f64,
    pub delta: f64,
}

/// A complete problem: space, shared objective, per-node uncertain sets and
/// probabilistic levels, communication schedule and master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    pub integer_dims: usize,
    pub real_dims: usize,
    pub objective: Vec<f64>,
    pub nodes: Vec<NodeSpec>,
    pub schedule: EdgeSchedule,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Ground-truth point, when the generator knows one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
}

impl Instance {
    pub fn space(&self) -> Result<MixedIntegerSpace> {
        Ok(MixedIntegerSpace::new(self.integer_dims, self.real_dims)?)
    }

    pub fn sets(&self) -> Vec<UncertainConstraintSet> {
        self.nodes.iter().map(|n| n.set.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let instance: Self = serde_json::from_str(text)?;
        if instance.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(instance.schema_version));
        }
        Ok(instance)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Nominal rows of every node.
    pub fn nominal_constraints(&self) -> Result<Vec<LinearConstraint>> {
        let mut out = Vec::new();
        for n in &self.nodes {
            out.extend(n.set.nominal_constraints()?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Certificates per verification `r`.
    pub certificates: usize,
    pub halt_mode: HaltMode,
    pub scenario: ScenarioMode,
    /// Helly number used for the scenario bound instead of the space's.
    pub scenario_helly: Option<u64>,
    pub max_rounds: usize,
    pub execution: Execution,
    pub order: NodeOrder,
    pub force: bool,
    /// Monte Carlo samples for the empirical violation; 0 skips it.
    pub posterior_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            certificates: 1,
            halt_mode: HaltMode::Path,
            scenario: ScenarioMode::Off,
            scenario_helly: None,
            max_rounds: 10_000,
            execution: Execution::default(),
            order: NodeOrder::Ascending,
            force: false,
            posterior_samples: 10_000,
        }
    }
}

/// Initializes every node (in parallel when requested).
pub fn build_nodes(instance: &Instance, config: &RunConfig) -> Result<Vec<NodeState>> {
    let space = instance.space()?;
    let helly = config.scenario_helly.unwrap_or_else(|| space.helly_number());
    let results = par::map_range(config.execution, instance.nodes.len(), |i| {
        let spec = &instance.nodes[i];
        let scenario = (config.scenario != ScenarioMode::Off).then_some(ScenarioSettings {
            eps: spec.eps,
            delta: spec.delta,
            helly,
        });
        let node_config = NodeConfig {
            certificates: config.certificates,
            solver: instance.solver.clone(),
            scenario,
            halt_threshold: 1,
            seed: instance.seed,
        };
        let schedule = SampleSchedule::new(spec.eps, spec.delta)?;
        NodeState::init(
            i as u32,
            space,
            instance.objective.clone(),
            spec.set.clone(),
            schedule,
            node_config,
        )
    });
    results.into_iter().collect()
}

/// Single solve over the union of `constraints`.
pub fn centralized_oracle(
    constraints: Vec<LinearConstraint>,
    objective: &[f64],
    space: MixedIntegerSpace,
    solver: &SolverConfig,
) -> Result<SolveResult> {
    let system = ConstraintSystem::new(space, objective.to_vec(), constraints)?;
    Ok(solve_mip(&system, solver)?)
}

/// Rows of the frozen sampled problem: every node's nominal rows plus every
/// row realized at each draw of its frozen multi-sample.
pub fn frozen_constraints(nodes: &[NodeState]) -> Result<Vec<LinearConstraint>> {
    let mut out = Vec::new();
    for node in nodes {
        let set = node.uncertain_set();
        out.extend(set.nominal_constraints()?);
        let Some((batch, draws)) = node.frozen_multisample() else {
            continue;
        };
        let rows: Vec<usize> = (0..set.row_count()).collect();
        let owner = node.id();
        for (index, draw) in draws.iter().enumerate() {
            out.extend(set.realize_rows(draw, &rows, |row| Provenance::Sample {
                node: owner,
                batch,
                index: index as u32,
                row,
            })?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub outcome: SimOutcome,
    pub report: RunReport,
}

impl RunOutput {
    /// The agreed solution (node 0's candidate).
    pub fn solution(&self) -> &Point {
        &self.outcome.solutions[0]
    }
}

/// Builds the nodes, simulates, and evaluates the empirical violation of the
/// final solution.
pub fn run_instance(instance: &Instance, config: &RunConfig) -> Result<RunOutput> {
    if instance.nodes.is_empty() {
        return Err(Error::Config("instance has no nodes".into()));
    }
    let nodes = build_nodes(instance, config)?;
    let sim = SimConfig {
        seed: instance.seed,
        max_rounds: config.max_rounds,
        halt_mode: config.halt_mode,
        scenario: config.scenario,
        execution: config.execution,
        order: config.order,
        force: config.force,
    };
    let outcome = run_simulation(nodes, &instance.schedule, &sim)?;
    let violation = (config.posterior_samples > 0).then(|| {
        posterior_violation(
            outcome.solutions[0].coords(),
            &instance.sets(),
            config.posterior_samples,
            derive_seed(instance.seed, &[purpose::POSTERIOR]),
            config.execution,
        )
    });
    let report = RunReport::from_outcome(instance, &outcome, violation)?;
    Ok(RunOutput { outcome, report })
}

/// Runs one instance per seed (in parallel over seeds when requested).
pub fn batch<F>(seeds: &[u64], make: F, config: &RunConfig) -> Result<Vec<RunReport>>
where
    F: Fn(u64) -> Result<Instance> + Sync + Send,
{
    let inner = RunConfig {
        execution: Execution::Sequential,
        ..config.clone()
    };
    par::map(config.execution, seeds, |&seed| {
        let instance = make(seed)?;
        run_instance(&instance, &inner).map(|o| o.report)
    })
    .into_iter()
    .collect()
}
