//! Independent brute-force oracle for small mixed-integer programs.
//!
//! Integer coordinates are enumerated over the box `[-B, B]`; at most one
//! continuous coordinate is allowed, which is then optimized in closed form
//! over the interval left by the constraints.

#![allow(dead_code)]

use rand::Rng;
use rcc::geometry::{ConstraintSystem, LinearConstraint, MixedIntegerSpace, Provenance};
use rcc::milp::SolverConfig;

pub const BOX: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Brute {
    Infeasible,
    Optimal { cost: f64, point: Vec<f64> },
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        let tol = 1e-9 * (1.0 + x.abs().max(y.abs()));
        if x < &(y - tol) {
            return true;
        }
        if x > &(y + tol) {
            return false;
        }
    }
    false
}

pub fn brute_force(system: &ConstraintSystem, bound: f64) -> Brute {
    let space = system.space();
    let dz = space.integer_dims();
    let dr = space.real_dims();
    assert!(dr <= 1, "oracle handles at most one continuous coordinate");
    let c = system.objective();
    let b = bound as i64;
    let mut best: Option<Vec<f64>> = None;
    let total = (2 * b + 1).pow(dz as u32);
    for code in 0..total {
        let mut z = Vec::with_capacity(dz);
        let mut rest = code;
        for _ in 0..dz {
            z.push((rest % (2 * b + 1) - b) as f64);
            rest /= 2 * b + 1;
        }
        let (mut lo, mut hi) = (-bound, bound);
        let mut ok = true;
        for row in system.constraints() {
            let a = row.coeffs();
            let fixed: f64 = a[..dz].iter().zip(&z).map(|(p, q)| p * q).sum();
            let slack = row.bound() - fixed;
            if dr == 0 || a[dz] == 0.0 {
                if slack < -1e-9 {
                    ok = false;
                    break;
                }
            } else if a[dz] > 0.0 {
                hi = hi.min(slack / a[dz]);
            } else {
                lo = lo.max(slack / a[dz]);
            }
        }
        if !ok || lo > hi + 1e-9 {
            continue;
        }
        let mut x = z.clone();
        if dr == 1 {
            x.push(if c[dz] < 0.0 { hi } else { lo.min(hi) });
        }
        let cost: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
        let key: Vec<f64> = std::iter::once(cost).chain(x.iter().copied()).collect();
        if best.as_ref().is_none_or(|k| lex_less(&key, k)) {
            best = Some(key);
        }
    }
    match best {
        None => Brute::Infeasible,
        Some(k) => Brute::Optimal {
            cost: k[0],
            point: k[1..].to_vec(),
        },
    }
}

/// Random system with `d <= 3`, at most one continuous coordinate and at most
/// ten constraints. With `ties` the data are small integers, which makes
/// equal-cost optima common.
pub fn random_system<R: Rng>(rng: &mut R, ties: bool) -> ConstraintSystem {
    let dr = rng.random_range(0..=1usize);
    let dz = rng.random_range((1 - dr)..=(3 - dr));
    let d = dz + dr;
    let space = MixedIntegerSpace::new(dz, dr).unwrap();
    let m = rng.random_range(1..=10usize);
    let mut draw = |lo: i32, hi: i32| -> f64 {
        if ties {
            rng.random_range(lo..=hi) as f64
        } else {
            rng.random_range(lo as f64..hi as f64)
        }
    };
    let objective: Vec<f64> = (0..d).map(|_| draw(-3, 3)).collect();
    let mut rows = Vec::new();
    while rows.len() < m {
        let a: Vec<f64> = (0..d).map(|_| draw(-5, 5)).collect();
        if a.iter().all(|v| *v == 0.0) {
            continue;
        }
        let b = draw(-10, 25);
        rows.push(LinearConstraint::new(a, b, Provenance::Tag(rows.len() as u64)).unwrap());
    }
    ConstraintSystem::new(space, objective, rows).unwrap()
}

pub fn boxed() -> SolverConfig {
    SolverConfig {
        box_bound: Some(BOX),
        ..SolverConfig::default()
    }
}

/// Compares a solver result with the oracle; returns a description of the
/// first disagreement.
pub fn check_against_oracle(system: &ConstraintSystem) -> Result<(), String> {
    let cfg = boxed();
    let got = rcc::milp::solve_mip(system, &cfg).map_err(|e| format!("solver error {e}"))?;
    match brute_force(system, BOX) {
        Brute::Infeasible => {
            if got.is_optimal() {
                return Err(format!("solver found {:?} but oracle says infeasible", got.point));
            }
        }
        Brute::Optimal { cost, point } => {
            if !got.is_optimal() {
                return Err(format!("solver says {:?}, oracle cost {cost}", got.status));
            }
            let x = got.point.as_ref().unwrap().coords();
            if system.max_residual(x) > cfg.feasibility_tol {
                return Err(format!("infeasible point escaped: {x:?}"));
            }
            if (got.cost - cost).abs() > 1e-7 * (1.0 + cost.abs()) {
                return Err(format!("cost {} vs oracle {cost}", got.cost));
            }
            if x.iter().zip(&point).any(|(a, b)| (a - b).abs() > 1e-7 * (1.0 + b.abs())) {
                return Err(format!("point {x:?} vs oracle {point:?}"));
            }
        }
    }
    Ok(())
}
