use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Instance, NodeSpec, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::geometry::MixedIntegerSpace;
use crate::milp::SolverConfig;
use crate::network::generate_knn_digraph;
use crate::rng::{purpose, substream};
use crate::uncertainty::{UncertainConstraintSet, UncertaintyKind};

/// Random distributed MILP: Gaussian rows, bounds `gamma * |row|`, a shared
/// Gaussian objective and interval uncertainty on every matrix entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpInstanceSpec {
    pub n: usize,
    pub constraints_per_node: usize,
    pub integer_dims: usize,
    pub real_dims: usize,
    /// Interval half-width on every entry.
    pub radius: f64,
    pub gamma: f64,
    /// Total accuracy, split as `eps / n` per node.
    pub eps: f64,
    /// Total confidence, split as `delta / n` per node.
    pub delta: f64,
    /// Nearest neighbours per node in the communication graph.
    pub degree: usize,
    pub diameter: Option<usize>,
    pub seed: u64,
}

impl Default for MilpInstanceSpec {
    fn default() -> Self {
        Self {
            n: 10,
            constraints_per_node: 100,
            integer_dims: 2,
            real_dims: 3,
            radius: 0.2,
            gamma: 20.0,
            eps: 0.1,
            delta: 1e-9,
            degree: 3,
            diameter: Some(4),
            seed: 0,
        }
    }
}

pub fn generate_random_milp(spec: &MilpInstanceSpec) -> Result<Instance> {
    if spec.gamma <= 1.0 {
        return Err(Error::Config(format!("gamma must exceed 1, got {}", spec.gamma)));
    }
    if spec.n == 0 || spec.constraints_per_node == 0 {
        return Err(Error::Config("need at least one node and one constraint".into()));
    }
    let space = MixedIntegerSpace::new(spec.integer_dims, spec.real_dims)?;
    let d = space.dim();
    let mut rng = substream(spec.seed, &[purpose::INSTANCE]);
    let objective: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();

    let mut nodes = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut rng = substream(spec.seed, &[purpose::INSTANCE, i as u64 + 1]);
        let rows: Vec<Vec<f64>> = (0..spec.constraints_per_node)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let bounds = rows
            .iter()
            .map(|r: &Vec<f64>| spec.gamma * r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let set = UncertainConstraintSet::new(
            i as u32,
            d,
            UncertaintyKind::IntervalMatrix {
                rows,
                bounds,
                radius: spec.radius,
            },
        )?;
        nodes.push(NodeSpec {
            set,
            eps: spec.eps / spec.n as f64,
            delta: spec.delta / spec.n as f64,
        });
    }

    let schedule = if spec.n == 1 {
        crate::network::EdgeSchedule::fixed(1, Vec::new())?
    } else {
        let mut rng = substream(spec.seed, &[purpose::GRAPH]);
        generate_knn_digraph(spec.n, spec.degree, spec.diameter, &mut rng)?
    };

    Ok(Instance {
        schema_version: SCHEMA_VERSION,
        integer_dims: spec.integer_dims,
        real_dims: spec.real_dims,
        objective,
        nodes,
        schedule,
        seed: spec.seed,
        solver: SolverConfig::default(),
        truth: None,
    })
}
