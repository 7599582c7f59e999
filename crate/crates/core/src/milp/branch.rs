use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::SolverError;
use crate::geometry::{dot, lex_compare, ConstraintSystem, Point};

use super::simplex::{solve_lex, LpOutcome, Rows};
use super::{BranchingRule, NodeSelection, SolveResult, SolveStatus, SolverConfig, UNBOXED_SENTINEL};

const KEY_TOL: f64 = 1e-9;

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Open node keyed by its parent's relaxation key; the heap pops the
/// smallest key first and, among equal keys, the earliest pushed node.
struct Open {
    bound: Vec<f64>,
    seq: u64,
    node: Node,
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        let by_key = self
            .bound
            .iter()
            .zip(&other.bound)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal);
        by_key.then(self.seq.cmp(&other.seq)).reverse()
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

/// Frontier of open nodes under either selection rule.
enum Frontier {
    Stack(Vec<Node>),
    Heap(BinaryHeap<Open>, u64),
}

impl Frontier {
    fn new(rule: NodeSelection, root: Node) -> Self {
        match rule {
            NodeSelection::DepthFirst => Frontier::Stack(vec![root]),
            NodeSelection::BestFirst => {
                let mut heap = BinaryHeap::new();
                heap.push(Open {
                    bound: Vec::new(),
                    seq: 0,
                    node: root,
                });
                Frontier::Heap(heap, 1)
            }
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Stack(s) => s.pop(),
            Frontier::Heap(h, _) => h.pop().map(|o| o.node),
        }
    }

    /// Pushes both children so that `first` is explored before `second`.
    fn push_children(&mut self, bound: &[f64], first: Node, second: Node) {
        match self {
            Frontier::Stack(s) => {
                s.push(second);
                s.push(first);
            }
            Frontier::Heap(h, seq) => {
                for node in [first, second] {
                    h.push(Open {
                        bound: bound.to_vec(),
                        seq: *seq,
                        node,
                    });
                    *seq += 1;
                }
            }
        }
    }
}

fn key_of(objective: &[f64], x: &[f64]) -> Vec<f64> {
    std::iter::once(dot(objective, x)).chain(x.iter().copied()).collect()
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

fn pick_branch(x: &[f64], integer_dims: usize, tol: f64, rule: BranchingRule) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate().take(integer_dims) {
        let f = fractionality(v);
        if f <= tol {
            continue;
        }
        match rule {
            BranchingRule::FirstFractional => return Some(j),
            BranchingRule::MostFractional => {
                if best.is_none_or(|(_, bf)| f > bf) {
                    best = Some((j, f));
                }
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Lexicographic minimum of the continuous coordinates with the integer ones pinned to `ints`.
fn solve_fixed(
    system: &ConstraintSystem,
    box_bound: f64,
    ints: &[f64],
) -> Result<Option<Vec<f64>>, SolverError> {
    let d = system.space().dim();
    let dz = ints.len();
    let dr = d - dz;
    if ints.iter().any(|v| v.abs() > box_bound) {
        return Ok(None);
    }
    if dr == 0 {
        let feasible = system
            .constraints()
            .iter()
            .all(|c| c.residual_at(ints) <= super::simplex::ENTER_TOL);
        return Ok(feasible.then(|| ints.to_vec()));
    }
    let mut rows = Rows::with_box(dr, box_bound);
    for c in system.constraints() {
        let a = c.coeffs();
        let shift = dot(&a[..dz], ints);
        let b = c.bound() - shift;
        let ar = &a[dz..];
        if ar.iter().all(|v| *v == 0.0) {
            if b < -super::simplex::ENTER_TOL {
                return Ok(None);
            }
            continue;
        }
        rows.push(ar, b);
    }
    let objective = &system.objective()[dz..];
    match solve_lex(&rows, objective)? {
        LpOutcome::Optimal { x, .. } => {
            let mut full = ints.to_vec();
            full.extend(x);
            Ok(Some(full))
        }
        LpOutcome::Infeasible => Ok(None),
    }
}

enum Search {
    /// Best integral leaf found (key, point), if any.
    Done(Option<(Vec<f64>, Vec<f64>)>, usize),
    NodeLimit(usize),
}

fn bound_rows(system: &ConstraintSystem, box_bound: f64) -> Rows {
    let mut rows = Rows::with_box(system.space().dim(), box_bound);
    for c in system.constraints() {
        rows.push(c.coeffs(), c.bound());
    }
    rows
}

/// Branch and bound. Nodes whose relaxation is not
/// lexicographically below `cutoff` (or the incumbent) are pruned; with
/// `stop_at_first` the search ends at the first improving integral leaf.
fn search(
    system: &ConstraintSystem,
    config: &SolverConfig,
    cutoff: Option<&[f64]>,
    stop_at_first: bool,
) -> Result<Search, SolverError> {
    let d = system.space().dim();
    let dz = system.space().integer_dims();
    let box_bound = config.box_bound.unwrap_or(UNBOXED_SENTINEL);
    let objective = system.objective();
    let mut rows = bound_rows(system, box_bound);

    let root = Node {
        lower: vec![-box_bound; d],
        upper: vec![box_bound; d],
    };
    let mut frontier = Frontier::new(config.node_selection, root);
    let mut incumbent: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut explored = 0usize;

    while let Some(node) = frontier.pop() {
        explored += 1;
        if explored > config.node_limit {
            return Ok(Search::NodeLimit(explored - 1));
        }
        for j in 0..d {
            rows.set_lower(j, node.lower[j]);
            rows.set_upper(j, node.upper[j]);
        }
        let x = match solve_lex(&rows, objective)? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible => continue,
        };
        let key = key_of(objective, &x);
        let bound = incumbent.as_ref().map(|(k, _)| k.as_slice()).or(cutoff);
        if bound.is_some_and(|b| lex_compare(&key, b, KEY_TOL) != Ordering::Less) {
            continue;
        }

        let mut branch_on = pick_branch(&x, dz, config.integrality_tol, config.branching);
        if branch_on.is_none() {
            let ints: Vec<f64> = x[..dz].iter().map(|v| v.round()).collect();
            match solve_fixed(system, box_bound, &ints)? {
                Some(full) => {
                    if system.max_residual(&full) > config.feasibility_tol {
                        log::warn!("discarding integral candidate that fails the residual check");
                        continue;
                    }
                    let k = key_of(objective, &full);
                    let bound = incumbent.as_ref().map(|(k, _)| k.as_slice()).or(cutoff);
                    if bound.is_none_or(|b| lex_compare(&k, b, KEY_TOL) == Ordering::Less) {
                        incumbent = Some((k, full));
                        if stop_at_first {
                            return Ok(Search::Done(incumbent, explored));
                        }
                    }
                    continue;
                }
                // nearly integral relaxation whose rounding is infeasible: branch exactly
                None => branch_on = pick_branch(&x, dz, 0.0, config.branching),
            }
        }
        let Some(j) = branch_on else { continue };
        let v = x[j];
        let mut ceil_node = Node {
            lower: node.lower.clone(),
            upper: node.upper.clone(),
        };
        ceil_node.lower[j] = v.ceil();
        let mut floor_node = node;
        floor_node.upper[j] = v.floor();
        frontier.push_children(&key, floor_node, ceil_node);
    }
    Ok(Search::Done(incumbent, explored))
}

pub(super) fn branch_and_bound(
    system: &ConstraintSystem,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let box_bound = config.box_bound.unwrap_or(UNBOXED_SENTINEL);
    let (incumbent, explored) = match search(system, config, None, false)? {
        Search::Done(incumbent, explored) => (incumbent, explored),
        Search::NodeLimit(explored) => {
            return Ok(SolveResult::without_point(SolveStatus::NodeLimit, explored))
        }
    };
    let Some((key, x)) = incumbent else {
        return Ok(SolveResult::without_point(SolveStatus::Infeasible, explored));
    };
    let box_active = x
        .iter()
        .any(|v| v.abs() >= box_bound * (1.0 - 1e-12) - config.feasibility_tol);
    if config.box_bound.is_none() && box_active {
        return Ok(SolveResult::without_point(SolveStatus::Unbounded, explored));
    }
    if box_active {
        log::debug!("bounding box active at the optimum");
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        point: Some(Point::from_raw(x)),
        cost: key[0],
        basis: None,
        bb_nodes: explored,
        box_active,
    })
}

/// Whether `system` has a feasible point whose key `(c . x, x_1, ..)` is
/// lexicographically below `target`.
///
/// Cheap tests run first: the continuous relaxation (a lower bound), then
/// roundings of the relaxed optimum and the integer neighbours of the
/// target point. Only when all are inconclusive does a cutoff branch and
/// bound run.
pub(super) fn improves_on(
    system: &ConstraintSystem,
    config: &SolverConfig,
    target: &[f64],
) -> Result<bool, SolverError> {
    let dz = system.space().integer_dims();
    let box_bound = config.box_bound.unwrap_or(UNBOXED_SENTINEL);
    let objective = system.objective();
    let relaxed = match solve_lex(&bound_rows(system, box_bound), objective)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => return Ok(false),
    };
    if lex_compare(&key_of(objective, &relaxed), target, KEY_TOL) != Ordering::Less {
        return Ok(false);
    }
    if dz == 0 {
        return Ok(true);
    }

    let beats = |ints: &[f64]| -> Result<bool, SolverError> {
        Ok(solve_fixed(system, box_bound, ints)?.is_some_and(|full| {
            system.max_residual(&full) <= config.feasibility_tol
                && lex_compare(&key_of(objective, &full), target, KEY_TOL) == Ordering::Less
        }))
    };
    let probe_dims = dz.min(4);
    for mask in 0..1u32 << probe_dims {
        let ints: Vec<f64> = relaxed[..dz]
            .iter()
            .enumerate()
            .map(|(j, v)| if j < probe_dims && mask >> j & 1 == 1 { v.ceil() } else { v.floor() })
            .collect();
        if beats(&ints)? {
            return Ok(true);
        }
    }
    let center = &target[1..=dz];
    for j in 0..dz {
        for step in [-1.0, 1.0] {
            let mut ints = center.to_vec();
            ints[j] += step;
            if beats(&ints)? {
                return Ok(true);
            }
        }
    }

    match search(system, config, Some(target), true)? {
        Search::Done(found, _) => Ok(found.is_some()),
        Search::NodeLimit(n) => Err(SolverError::NodeLimit(n)),
    }
}

/// Among the minimum-cost candidates, the lexicographically smallest point.
///
/// Panics if `candidates` is empty or the lengths differ.
pub fn lex_tie_break(candidates: &[Point], costs: &[f64]) -> Point {
    assert!(!candidates.is_empty(), "lex_tie_break needs at least one candidate");
    assert_eq!(candidates.len(), costs.len());
    let keys: Vec<Vec<f64>> = candidates
        .iter()
        .zip(costs)
        .map(|(p, &c)| std::iter::once(c).chain(p.coords().iter().copied()).collect())
        .collect();
    let best = (0..keys.len())
        .min_by(|&a, &b| lex_compare(&keys[a], &keys[b], KEY_TOL))
        .expect("nonempty");
    candidates[best].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LinearConstraint, MixedIntegerSpace, Provenance};

    fn knapsack_like() -> ConstraintSystem {
        // min -x - 2y  s.t. 3x + 4y <= 11.5, x - y <= 1.5, x, y >= 0, x, y integer
        let row = |a: Vec<f64>, b: f64, t: u64| LinearConstraint::new(a, b, Provenance::Tag(t)).unwrap();
        ConstraintSystem::new(
            MixedIntegerSpace::new(2, 0).unwrap(),
            vec![-1.0, -2.0],
            vec![
                row(vec![3.0, 4.0], 11.5, 0),
                row(vec![1.0, -1.0], 1.5, 1),
                row(vec![-1.0, 0.0], 0.0, 2),
                row(vec![0.0, -1.0], 0.0, 3),
            ],
        )
        .unwrap()
    }

    #[test]
    fn tie_break_examples() {
        let p = |v: Vec<f64>| Point::from_raw(v);
        assert_eq!(
            lex_tie_break(&[p(vec![1.0, 2.0]), p(vec![2.0, 1.0])], &[3.0, 3.0]),
            p(vec![1.0, 2.0])
        );
        assert_eq!(lex_tie_break(&[p(vec![7.0])], &[0.0]), p(vec![7.0]));
        assert_eq!(
            lex_tie_break(&[p(vec![0.0, 5.0]), p(vec![0.0, 3.0])], &[1.0, 1.0]),
            p(vec![0.0, 3.0])
        );
        // lower cost wins regardless of coordinates
        assert_eq!(
            lex_tie_break(&[p(vec![0.0, 0.0]), p(vec![9.0, 9.0])], &[1.0, 0.5]),
            p(vec![9.0, 9.0])
        );
    }

    #[test]
    fn branch_choice() {
        let x = [0.5, 1.1, 2.45];
        assert_eq!(pick_branch(&x, 3, 1e-6, BranchingRule::MostFractional), Some(0));
        assert_eq!(pick_branch(&[1.0, 1.1, 2.45], 3, 1e-6, BranchingRule::MostFractional), Some(2));
        assert_eq!(pick_branch(&[1.0, 1.1, 2.45], 3, 1e-6, BranchingRule::FirstFractional), Some(1));
        assert_eq!(pick_branch(&[1.0, 2.0, 0.3], 2, 1e-6, BranchingRule::MostFractional), None);
        // equal fractionality: lowest index
        assert_eq!(pick_branch(&[0.5, 1.5], 2, 1e-6, BranchingRule::MostFractional), Some(0));
    }

    #[test]
    fn node_selection_rules_agree() {
        let sys = knapsack_like();
        let best = branch_and_bound(&sys, &SolverConfig::default()).unwrap();
        let depth = branch_and_bound(
            &sys,
            &SolverConfig {
                node_selection: NodeSelection::DepthFirst,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(best.point, depth.point);
        assert_eq!(best.point.unwrap().coords(), &[1.0, 2.0]);
        assert_eq!(best.cost, -5.0);
    }

    #[test]
    fn improvement_witness() {
        let sys = knapsack_like();
        let cfg = SolverConfig::default();
        assert!(!improves_on(&sys, &cfg, &[-5.0, 1.0, 2.0]).unwrap());
        assert!(improves_on(&sys, &cfg, &[-4.0, 0.0, 2.0]).unwrap());
        // same cost, lexicographically larger point
        assert!(improves_on(&sys, &cfg, &[-5.0, 3.0, 1.0]).unwrap());
        let loose = sys.with_constraints(sys.constraints()[1..].to_vec());
        assert!(improves_on(&loose, &cfg, &[-5.0, 1.0, 2.0]).unwrap());
    }
}
