use std::cmp::Ordering;

use crate::error::SolverError;
use crate::geometry::{lex_compare, Basis, ConstraintSystem, LinearConstraint};

use super::branch::improves_on;
use super::{solve_point, SolveResult, SolveStatus, SolverConfig};

const ACTIVE_TOL: f64 = 1e-7;

/// Extracts a basis of `system` by dropping constraints and re-solving.
///
/// A group of constraints is discarded whenever removing it leaves the
/// lexicographic optimum unchanged; groups that move the optimum are split
/// until single constraints remain. Every kept constraint therefore moves the
/// optimum when removed on its own, and the kept set reproduces the optimum of
/// the full system. With duplicated or otherwise degenerate rows the result is
/// a basis but not necessarily one of minimum cardinality.
///
/// For purely continuous spaces, constraints that are slack at the optimum are
/// dropped up front since they cannot belong to any basis.
pub fn compute_basis(
    system: &ConstraintSystem,
    result: &SolveResult,
    config: &SolverConfig,
) -> Result<Basis, SolverError> {
    if result.status != SolveStatus::Optimal {
        return Err(SolverError::NotOptimal);
    }
    let target = result.key().ok_or(SolverError::NotOptimal)?;
    let x = result.point.as_ref().ok_or(SolverError::NotOptimal)?.coords();

    let mut candidates: Vec<LinearConstraint> = if system.space().integer_dims() == 0 {
        system
            .constraints()
            .iter()
            .filter(|c| c.residual_at(x) >= -ACTIVE_TOL * (1.0 + c.bound().abs()))
            .cloned()
            .collect()
    } else {
        system.constraints().to_vec()
    };
    candidates.sort_by_key(|c| c.provenance());
    candidates.dedup_by_key(|c| c.provenance());

    let mut keep = vec![true; candidates.len()];
    let unchanged_without = |keep: &[bool], lo: usize, hi: usize| -> Result<bool, SolverError> {
        let reduced: Vec<LinearConstraint> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i] && !(lo..hi).contains(i))
            .map(|(_, c)| c.clone())
            .collect();
        Ok(!improves_on(&system.with_constraints(reduced), config, &target)?)
    };

    // explicit stack of half-open ranges, processed left to right
    let mut stack = vec![(0usize, candidates.len())];
    while let Some((lo, hi)) = stack.pop() {
        if lo >= hi {
            continue;
        }
        if unchanged_without(&keep, lo, hi)? {
            keep[lo..hi].iter_mut().for_each(|k| *k = false);
        } else if hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }

    let members: Vec<LinearConstraint> = candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect();

    let check = solve_point(&system.with_constraints(members.clone()), config)?;
    match check.key() {
        Some(k) if lex_compare(&k, &target, 1e-7) == Ordering::Equal => {}
        _ => return Err(SolverError::BasisMismatch),
    }
    let limit = system.space().combinatorial_dimension() as usize;
    if members.len() > limit {
        log::warn!(
            "basis of size {} exceeds the combinatorial dimension {limit} (degenerate instance)",
            members.len()
        );
    }
    Ok(Basis::new(members, result.cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MixedIntegerSpace, Provenance};
    use crate::milp::{solve_mip, solve_point};

    fn row(a: Vec<f64>, b: f64, t: u64) -> LinearConstraint {
        LinearConstraint::new(a, b, Provenance::Tag(t)).unwrap()
    }

    fn tags(b: &Basis) -> Vec<u64> {
        b.constraints()
            .iter()
            .map(|c| match c.provenance() {
                Provenance::Tag(t) => t,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn planar_vertex_basis() {
        let s = MixedIntegerSpace::continuous(2).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0, 1.0],
            vec![
                row(vec![-1.0, -2.0], -2.0, 0),
                row(vec![1.0, 0.0], 5.0, 1),
                row(vec![-2.0, -1.0], -2.0, 2),
                row(vec![0.0, 1.0], 5.0, 3),
            ],
        )
        .unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(tags(r.basis.as_ref().unwrap()), vec![0, 2]);
    }

    #[test]
    fn basis_fixed_point() {
        let s = MixedIntegerSpace::continuous(2).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0, 1.0],
            vec![row(vec![-1.0, -2.0], -2.0, 0), row(vec![-2.0, -1.0], -2.0, 2)],
        )
        .unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(r.basis.unwrap().len(), 2);
    }

    #[test]
    fn duplicated_rows_keep_one() {
        // the same half-line twice under different tags: either one alone is a basis
        let s = MixedIntegerSpace::continuous(1).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0],
            vec![row(vec![-1.0], -2.0, 0), row(vec![-1.0], -2.0, 1)],
        )
        .unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(r.basis.unwrap().len(), 1);
    }

    #[test]
    fn integer_redundant_pair() {
        // x >= 0.5 and x >= 0.7 both round up to 1; dropping either alone changes nothing
        let s = MixedIntegerSpace::new(1, 0).unwrap();
        let sys = ConstraintSystem::new(
            s,
            vec![1.0],
            vec![row(vec![-1.0], -0.5, 0), row(vec![-1.0], -0.7, 1)],
        )
        .unwrap();
        let r = solve_mip(&sys, &SolverConfig::default()).unwrap();
        let b = r.basis.unwrap();
        assert_eq!(b.len(), 1);
        let again = solve_point(&sys.with_constraints(b.constraints().to_vec()), &SolverConfig::default())
            .unwrap();
        assert_eq!(again.cost, 1.0);
    }

    #[test]
    fn non_optimal_rejected() {
        let s = MixedIntegerSpace::continuous(1).unwrap();
        let sys = ConstraintSystem::new(s, vec![1.0], vec![row(vec![1.0], 0.0, 0), row(vec![-1.0], -1.0, 1)])
            .unwrap();
        let r = solve_point(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(compute_basis(&sys, &r, &SolverConfig::default()), Err(SolverError::NotOptimal));
    }
}
