//! Deterministic mixed-integer linear solver.
//!
//! Every local problem is solved to the unique lexicographic minimizer of
//! `(c . x, x_1, ..., x_d)`, which makes the optimal point well defined even
//! when the cost alone has ties. Problems are wrapped in a bounding box
//! `|x_j| <= box_bound` so that a node holding a single sampled constraint
//! still has a finite optimum.

mod basis;
mod branch;
pub(crate) mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::{Basis, ConstraintSystem, Point};

pub use basis::compute_basis;
pub use branch::lex_tie_break;

/// Internal box used when the caller asks for an unboxed solve; touching it
/// at the optimum is reported as unbounded.
const UNBOXED_SENTINEL: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BranchingRule {
    /// Most fractional integer coordinate, lowest index on ties.
    #[default]
    MostFractional,
    /// First fractional integer coordinate.
    FirstFractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NodeSelection {
    /// Smallest relaxation key first; floor child first among equal keys.
    #[default]
    BestFirst,
    /// Last in, first out, floor child first.
    DepthFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[non_exhaustive]
pub enum TieBreak {
    /// Minimize cost, then `x_1`, then `x_2`, and so on.
    #[default]
    Lexicographic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub node_limit: usize,
    /// `Some(B)` adds `|x_j| <= B` to every problem.
    pub box_bound: Option<f64>,
    pub branching: BranchingRule,
    #[serde(default)]
    pub node_selection: NodeSelection,
    pub tie_break: TieBreak,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: crate::geometry::FEASIBILITY_TOL,
            integrality_tol: crate::geometry::INTEGRALITY_TOL,
            node_limit: 200_000,
            box_bound: Some(1e6),
            branching: BranchingRule::MostFractional,
            node_selection: NodeSelection::BestFirst,
            tie_break: TieBreak::Lexicographic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub point: Option<Point>,
    /// `c . x` at the optimum; `NaN` unless `Optimal`.
    pub cost: f64,
    pub basis: Option<Basis>,
    pub bb_nodes: usize,
    /// A bounding-box face is tight at the returned point.
    pub box_active: bool,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Lexicographic key `(c . x, x_1, ..., x_d)` of the optimum.
    pub fn key(&self) -> Option<Vec<f64>> {
        self.point
            .as_ref()
            .map(|p| std::iter::once(self.cost).chain(p.coords().iter().copied()).collect())
    }

    fn without_point(status: SolveStatus, bb_nodes: usize) -> Self {
        Self {
            status,
            point: None,
            cost: f64::NAN,
            basis: None,
            bb_nodes,
            box_active: false,
        }
    }
}

/// Optimal point of `system` without basis extraction.
pub fn solve_point(system: &ConstraintSystem, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    branch::branch_and_bound(system, config)
}

/// `Solve_MIP`: optimal point, cost and basis of `system`.
pub fn solve_mip(system: &ConstraintSystem, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    let mut result = solve_point(system, config)?;
    if result.is_optimal() {
        result.basis = Some(compute_basis(system, &result, config)?);
    }
    Ok(result)
}

/// Continuous relaxation of `system` (integrality dropped), same tie-break.
pub fn solve_lp_relaxation(
    system: &ConstraintSystem,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let relaxed_space = crate::geometry::MixedIntegerSpace::continuous(system.space().dim())?;
    let relaxed = ConstraintSystem::new(
        relaxed_space,
        system.objective().to_vec(),
        system.constraints().to_vec(),
    )?;
    solve_point(&relaxed, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LinearConstraint, MixedIntegerSpace, Provenance};

    fn row(a: Vec<f64>, b: f64, t: u64) -> LinearConstraint {
        LinearConstraint::new(a, b, Provenance::Tag(t)).unwrap()
    }

    #[test]
    fn integer_half_line_rounds_up() {
        let s = MixedIntegerSpace::new(1, 0).unwrap();
        let sys = ConstraintSystem::new(s, vec![1.0], vec![row(vec![-1.0], -3.5, 0)]).unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.point.as_ref().unwrap().coords(), &[4.0]);
        assert_eq!(r.cost, 4.0);
        assert_eq!(r.basis.unwrap().len(), 1);
    }

    #[test]
    fn mixed_half_lines() {
        // coordinates are (x_Z, x_R)
        let s = MixedIntegerSpace::new(1, 1).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0, 1.0],
            vec![row(vec![0.0, -1.0], -0.5, 0), row(vec![-1.0, 0.0], -0.5, 1)],
        )
        .unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        let p = r.point.unwrap();
        assert_eq!(p.coords()[0], 1.0);
        assert!((p.coords()[1] - 0.5).abs() < 1e-12);
        assert!((r.cost - 1.5).abs() < 1e-12);
    }

    #[test]
    fn relaxation_examples() {
        let cfg = SolverConfig::default();
        let s = MixedIntegerSpace::new(1, 0).unwrap();
        let sys = ConstraintSystem::new(s, vec![1.0], vec![row(vec![-1.0], -3.5, 0)]).unwrap();
        let r = solve_lp_relaxation(&sys, &cfg).unwrap();
        assert!((r.cost - 3.5).abs() < 1e-12);

        let s = MixedIntegerSpace::continuous(1).unwrap();
        let sys = ConstraintSystem::new(s, vec![1.0], vec![row(vec![1.0], 0.0, 0), row(vec![-1.0], -1.0, 1)])
            .unwrap();
        assert_eq!(solve_lp_relaxation(&sys, &cfg).unwrap().status, SolveStatus::Infeasible);

        let s = MixedIntegerSpace::continuous(2).unwrap();
        let square = vec![
            row(vec![1.0, 0.0], 1.0, 0),
            row(vec![0.0, 1.0], 1.0, 1),
            row(vec![-1.0, 0.0], 0.0, 2),
            row(vec![0.0, -1.0], 0.0, 3),
        ];
        let sys = ConstraintSystem::new(s, vec![1.0, 1.0], square).unwrap();
        let r = solve_lp_relaxation(&sys, &cfg).unwrap();
        assert_eq!(r.point.unwrap().coords(), &[0.0, 0.0]);
    }

    #[test]
    fn unbounded_without_box() {
        let cfg = SolverConfig {
            box_bound: None,
            ..SolverConfig::default()
        };
        let s = MixedIntegerSpace::continuous(1).unwrap();
        let sys = ConstraintSystem::new(s, vec![-1.0], vec![row(vec![-1.0], 0.0, 0)]).unwrap();
        assert_eq!(solve_mip(&sys, &cfg).unwrap().status, SolveStatus::Unbounded);
        let boxed = solve_mip(&sys, &SolverConfig::default()).unwrap();
        assert!(boxed.is_optimal() && boxed.box_active);
    }

    #[test]
    fn integer_infeasible_gap() {
        // 0.2 <= x <= 0.8 has no integer point
        let s = MixedIntegerSpace::new(1, 0).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0],
            vec![row(vec![1.0], 0.8, 0), row(vec![-1.0], -0.2, 1)],
        )
        .unwrap();
        assert_eq!(solve_mip(&sys, &SolverConfig::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn node_limit_reported() {
        let s = MixedIntegerSpace::new(2, 0).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0, 1.0],
            vec![row(vec![-2.0, -2.0], -1.0, 0), row(vec![2.0, 2.0], 1.5, 1)],
        )
        .unwrap();
        let cfg = SolverConfig {
            node_limit: 3,
            ..SolverConfig::default()
        };
        assert_eq!(solve_mip(&sys, &cfg).unwrap().status, SolveStatus::NodeLimit);
    }
}
