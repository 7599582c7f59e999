//! Lexicographic dual simplex over inequality-form LPs with few variables.
//!
//! The problem is `lexmin (c . x, x_1, ..., x_d)` subject to `a_i . x <= b_i`,
//! where rows `2j` and `2j + 1` are always the bound rows `x_j <= hi_j` and
//! `-x_j <= -lo_j`. Starting from the vertex of the bound box that is optimal
//! for the lexicographic objective, the method keeps `d` active rows with
//! lexicographically non-negative multipliers and repairs primal violations
//! one row at a time. Because the stacked objective `[c; I]` has full rank,
//! every ratio is lexicographically positive and the method cannot cycle in
//! exact arithmetic; Bland's smallest-index rule takes over past an iteration
//! threshold as a guard against floating-point stalls.

use std::cmp::Ordering;

use crate::error::SolverError;
use crate::geometry::{dot, lex_compare};

/// Entering threshold for violated rows, well below the public feasibility tolerance
/// so that snapped and substituted points stay feasible.
pub(crate) const ENTER_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const ZERO_TOL: f64 = 1e-12;
const RATIO_TOL: f64 = 1e-10;

/// Dense row storage. The first `2 d` rows are the bound rows.
#[derive(Clone, Debug)]
pub(crate) struct Rows {
    d: usize,
    coeffs: Vec<f64>,
    bounds: Vec<f64>,
    norms: Vec<f64>,
}

impl Rows {
    /// Bound rows with `lo_j = -box_bound`, `hi_j = box_bound`.
    pub fn with_box(d: usize, box_bound: f64) -> Self {
        let mut rows = Self {
            d,
            coeffs: Vec::with_capacity(2 * d * d),
            bounds: Vec::with_capacity(2 * d),
            norms: Vec::with_capacity(2 * d),
        };
        for j in 0..d {
            let mut up = vec![0.0; d];
            up[j] = 1.0;
            rows.push(&up, box_bound);
            up[j] = -1.0;
            rows.push(&up, box_bound);
        }
        rows
    }

    pub fn push(&mut self, a: &[f64], b: f64) {
        debug_assert_eq!(a.len(), self.d);
        self.coeffs.extend_from_slice(a);
        self.bounds.push(b);
        self.norms.push(a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300));
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.d..(i + 1) * self.d]
    }

    pub fn bound(&self, i: usize) -> f64 {
        self.bounds[i]
    }

    pub fn set_upper(&mut self, j: usize, hi: f64) {
        self.bounds[2 * j] = hi;
    }

    pub fn set_lower(&mut self, j: usize, lo: f64) {
        self.bounds[2 * j + 1] = -lo;
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.bounds[2 * j]
    }

    pub fn lower(&self, j: usize) -> f64 {
        -self.bounds[2 * j + 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, iterations: usize },
    Infeasible,
}

/// Small dense LU with partial pivoting, row-major.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(n: usize, mut m: Vec<f64>) -> Result<Self, SolverError> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, m[i * n + k].abs()))
                .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if pmax <= 1e-14 {
                return Err(SolverError::Singular);
            }
            if p != k {
                for c in 0..n {
                    m.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let piv = m[k * n + k];
            for i in k + 1..n {
                let f = m[i * n + k] / piv;
                m[i * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        m[i * n + c] -= f * m[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu: m, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|c| self.lu[i * n + c] * y[c]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|c| self.lu[i * n + c] * y[c]).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        y
    }
}

fn lex_sign(v: &[f64]) -> Ordering {
    for &x in v {
        if x > ZERO_TOL {
            return Ordering::Greater;
        }
        if x < -ZERO_TOL {
            return Ordering::Less;
        }
    }
    Ordering::Equal
}

/// Lexicographic minimum of `(c . x, x_1, ..., x_d)` over `rows`.
pub(crate) fn solve_lex(rows: &Rows, objective: &[f64]) -> Result<LpOutcome, SolverError> {
    let d = rows.dim();
    let m = rows.len();
    debug_assert_eq!(objective.len(), d);
    for j in 0..d {
        if rows.lower(j) > rows.upper(j) + ENTER_TOL {
            return Ok(LpOutcome::Infeasible);
        }
    }

    let mut active: Vec<usize> = (0..d)
        .map(|j| if objective[j] < -ZERO_TOL { 2 * j } else { 2 * j + 1 })
        .collect();
    let mut in_active = vec![false; m];
    for &i in &active {
        in_active[i] = true;
    }

    let max_iter = 50 * (m + d) + 1000;
    let bland_after = max_iter / 2;
    // columns of the stacked objective [c, e_1, ..., e_d]
    let objectives: Vec<Vec<f64>> = std::iter::once(objective.to_vec())
        .chain((0..d).map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        }))
        .collect();

    for iter in 0..max_iter {
        let mut a_w = Vec::with_capacity(d * d);
        let mut b_w = Vec::with_capacity(d);
        for &i in &active {
            a_w.extend_from_slice(rows.row(i));
            b_w.push(rows.bound(i));
        }
        let mut a_t = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                a_t[c * d + r] = a_w[r * d + c];
            }
        }
        let lu = Lu::factor(d, a_w)?;
        let x = lu.solve(&b_w);

        let entering = if iter < bland_after {
            let mut best: Option<(usize, f64)> = None;
            for (i, _) in in_active.iter().enumerate().filter(|(_, active)| !**active) {
                let r = dot(rows.row(i), &x) - rows.bound(i);
                if r > ENTER_TOL {
                    let score = r / rows.norms[i];
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((i, score));
                    }
                }
            }
            best.map(|(i, _)| i)
        } else {
            (0..m).find(|&i| !in_active[i] && dot(rows.row(i), &x) - rows.bound(i) > ENTER_TOL)
        };
        let Some(k) = entering else {
            return Ok(LpOutcome::Optimal {
                x,
                iterations: iter,
            });
        };

        let lu_t = Lu::factor(d, a_t)?;
        let mu = lu_t.solve(rows.row(k));
        // multipliers[j][o]: multiplier of active row j for objective o
        let per_objective: Vec<Vec<f64>> = objectives
            .iter()
            .map(|g| {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                lu_t.solve(&neg)
            })
            .collect();
        let mu_scale = mu.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

        let mut leave: Option<(usize, Vec<f64>)> = None;
        for j in 0..d {
            if mu[j] <= PIVOT_TOL * mu_scale {
                continue;
            }
            let ratio: Vec<f64> = per_objective.iter().map(|lam| lam[j] / mu[j]).collect();
            debug_assert!(lex_sign(&ratio) != Ordering::Less || iter >= bland_after);
            let better = match &leave {
                None => true,
                Some((jb, rb)) => match lex_compare(&ratio, rb, RATIO_TOL) {
                    Ordering::Less => true,
                    Ordering::Equal => active[j] < active[*jb],
                    Ordering::Greater => false,
                },
            };
            if better {
                leave = Some((j, ratio));
            }
        }
        let Some((j, _)) = leave else {
            return Ok(LpOutcome::Infeasible);
        };
        in_active[active[j]] = false;
        in_active[k] = true;
        active[j] = k;
    }
    Err(SolverError::IterationLimit(max_iter))
}
