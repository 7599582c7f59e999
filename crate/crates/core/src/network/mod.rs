//! Time-varying directed communication graphs.

mod sim;

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::rng::{hashed_unit, purpose};

pub use sim::{
    run_simulation, write_trace_csv, EventKind, HaltMode, NodeOrder, ScenarioMode, SimConfig, SimOutcome,
    SimStats, Termination, TraceEvent, TRACE_CSV_HEADER,
};

/// Directed edge `(from, to)`; node ids are `0..n`.
pub type Edge = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScheduleMode {
    Static { edges: Vec<Edge> },
    Periodic { phases: Vec<Vec<Edge>> },
    /// Each base edge is independently absent in a round with probability `loss`.
    RandomLoss { edges: Vec<Edge>, loss: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSchedule {
    pub n: usize,
    #[serde(flatten)]
    pub mode: ScheduleMode,
    /// Joint strong connectivity window.
    pub window: usize,
}

fn normalize(n: usize, edges: Vec<Edge>) -> Result<Vec<Edge>, GraphError> {
    for &(a, b) in &edges {
        if a >= n {
            return Err(GraphError::NodeOutOfRange(a));
        }
        if b >= n {
            return Err(GraphError::NodeOutOfRange(b));
        }
    }
    let set: BTreeSet<Edge> = edges.into_iter().filter(|(a, b)| a != b).collect();
    Ok(set.into_iter().collect())
}

impl EdgeSchedule {
    pub fn fixed(n: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Ok(Self {
            n,
            mode: ScheduleMode::Static {
                edges: normalize(n, edges)?,
            },
            window: 1,
        })
    }

    pub fn periodic(n: usize, phases: Vec<Vec<Edge>>) -> Result<Self, GraphError> {
        if phases.is_empty() {
            return Err(GraphError::InvalidParameters("periodic schedule needs a phase".into()));
        }
        let window = phases.len();
        let phases = phases
            .into_iter()
            .map(|p| normalize(n, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            n,
            mode: ScheduleMode::Periodic { phases },
            window,
        })
    }

    pub fn random_loss(n: usize, edges: Vec<Edge>, loss: f64, seed: u64, window: usize) -> Result<Self, GraphError> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(GraphError::InvalidParameters(format!("loss probability {loss}")));
        }
        Ok(Self {
            n,
            mode: ScheduleMode::RandomLoss {
                edges: normalize(n, edges)?,
                loss,
                seed,
            },
            window: window.max(1),
        })
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    /// Edges live in round `t` (0-based).
    pub fn edges_at(&self, t: usize) -> Vec<Edge> {
        match &self.mode {
            ScheduleMode::Static { edges } => edges.clone(),
            ScheduleMode::Periodic { phases } => phases[t % phases.len()].clone(),
            ScheduleMode::RandomLoss { edges, loss, seed } => edges
                .iter()
                .copied()
                .filter(|&(a, b)| hashed_unit(*seed, &[purpose::LOSS, a as u64, b as u64, t as u64]) >= *loss)
                .collect(),
        }
    }

    /// The static edge set, if the schedule does not vary.
    pub fn static_edges(&self) -> Option<&[Edge]> {
        match &self.mode {
            ScheduleMode::Static { edges } => Some(edges),
            _ => None,
        }
    }

    /// Union of all edges that can ever appear.
    pub fn base_edges(&self) -> Vec<Edge> {
        match &self.mode {
            ScheduleMode::Static { edges } | ScheduleMode::RandomLoss { edges, .. } => edges.clone(),
            ScheduleMode::Periodic { phases } => {
                let s: BTreeSet<Edge> = phases.iter().flatten().copied().collect();
                s.into_iter().collect()
            }
        }
    }
}

fn reach(n: usize, edges: &[Edge], start: usize, reverse: bool) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if reverse {
            adj[b].push(a);
        } else {
            adj[a].push(b);
        }
    }
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

pub fn is_strongly_connected(n: usize, edges: &[Edge]) -> bool {
    if n <= 1 {
        return true;
    }
    reach(n, edges, 0, false).into_iter().all(|s| s) && reach(n, edges, 0, true).into_iter().all(|s| s)
}

/// Whether the union graph over every window `[t, t + L - 1]` with
/// `t + L <= horizon` is strongly connected. Static schedules are checked
/// once and periodic ones over a single period.
pub fn check_ujsc(schedule: &EdgeSchedule, window: usize, horizon: usize) -> bool {
    let window = window.max(1);
    let starts = match &schedule.mode {
        ScheduleMode::Static { .. } => 1,
        ScheduleMode::Periodic { phases } => phases.len(),
        ScheduleMode::RandomLoss { .. } => horizon.saturating_sub(window) + 1,
    };
    (0..starts).all(|t| {
        let union: BTreeSet<Edge> = (t..t + window).flat_map(|s| schedule.edges_at(s)).collect();
        let union: Vec<Edge> = union.into_iter().collect();
        is_strongly_connected(schedule.n, &union)
    })
}

fn bfs_distances(n: usize, adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Longest shortest directed path.
pub fn diameter(n: usize, edges: &[Edge]) -> Result<usize, GraphError> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(GraphError::NodeOutOfRange(a.max(b)));
        }
        adj[a].push(b);
    }
    let mut best = 0;
    for s in 0..n {
        for d in bfs_distances(n, &adj, s) {
            best = best.max(d.ok_or(GraphError::NotStronglyConnected)?);
        }
    }
    Ok(best)
}

/// Cap on resampling attempts in [`generate_knn_digraph`].
pub const KNN_RESAMPLE_CAP: usize = 10_000;

/// Symmetric `k`-nearest-neighbour graph on uniform points of the unit square,
/// resampled until connected and, if requested, of the given diameter.
pub fn generate_knn_digraph<R: Rng>(
    n: usize,
    k: usize,
    target_diameter: Option<usize>,
    rng: &mut R,
) -> Result<EdgeSchedule, GraphError> {
    if n < 2 || k == 0 || k >= n {
        return Err(GraphError::InvalidParameters(format!("n = {n}, k = {k}")));
    }
    for _ in 0..KNN_RESAMPLE_CAP {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let mut edges = Vec::with_capacity(2 * n * k);
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = pts[i].0 - pts[j].0;
                    let dy = pts[i].1 - pts[j].1;
                    (dx * dx + dy * dy, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in others.iter().take(k) {
                edges.push((i, j));
                edges.push((j, i));
            }
        }
        let edges = normalize(n, edges)?;
        let Ok(diam) = diameter(n, &edges) else { continue };
        if target_diameter.is_none_or(|t| t == diam) {
            return Ok(EdgeSchedule {
                n,
                mode: ScheduleMode::Static { edges },
                window: 1,
            });
        }
    }
    Err(GraphError::ResampleCap(KNN_RESAMPLE_CAP))
}
