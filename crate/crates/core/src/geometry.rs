//! Mixed-integer spaces, affine constraints and bases.
//!
//! Every problem handled by this crate lives in `S = Z^{d_Z} x R^{d_R}`,
//! with the integer coordinates stored first. Constraints are half-spaces
//! `a . x <= b` tagged with where they came from, so a basis can be traced
//! back to the node and sample that produced each of its members.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Residual tolerance for continuous feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Distance to the nearest integer accepted before snapping.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Two candidate points with equal integer parts are the same candidate when
/// their continuous parts agree within this tolerance.
pub const POINT_TOL: f64 = 1e-7;
/// Largest supported number of integer coordinates; keeps `h(S)` well inside `u64`.
pub const MAX_INTEGER_DIMS: usize = 30;

/// The domain `Z^{d_Z} x R^{d_R}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MixedIntegerSpace {
    integer_dims: usize,
    real_dims: usize,
}

impl MixedIntegerSpace {
    pub fn new(integer_dims: usize, real_dims: usize) -> Result<Self, GeometryError> {
        if integer_dims + real_dims == 0 {
            return Err(GeometryError::EmptySpace);
        }
        if integer_dims > MAX_INTEGER_DIMS {
            return Err(GeometryError::TooManyIntegerDims(integer_dims));
        }
        Ok(Self {
            integer_dims,
            real_dims,
        })
    }

    /// Purely continuous space `R^d`.
    pub fn continuous(d: usize) -> Result<Self, GeometryError> {
        Self::new(0, d)
    }

    pub fn integer_dims(&self) -> usize {
        self.integer_dims
    }

    pub fn real_dims(&self) -> usize {
        self.real_dims
    }

    pub fn dim(&self) -> usize {
        self.integer_dims + self.real_dims
    }

    pub fn is_integer(&self, coord: usize) -> bool {
        coord < self.integer_dims
    }

    /// `h(S) = (d_R + 1) 2^{d_Z}`.
    pub fn helly_number(&self) -> u64 {
        (self.real_dims as u64 + 1) << self.integer_dims
    }

    /// Largest possible basis size, `h(S) - 1`.
    pub fn combinatorial_dimension(&self) -> u64 {
        self.helly_number() - 1
    }
}

/// Helly number of a mixed-integer space given by its dimensions.
pub fn helly_number(integer_dims: usize, real_dims: usize) -> Result<u64, GeometryError> {
    Ok(MixedIntegerSpace::new(integer_dims, real_dims)?.helly_number())
}

pub fn combinatorial_dimension(integer_dims: usize, real_dims: usize) -> Result<u64, GeometryError> {
    Ok(MixedIntegerSpace::new(integer_dims, real_dims)?.combinatorial_dimension())
}

/// A point of `S`. Integer coordinates are exactly integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Checks the dimension and snaps the integer coordinates.
    pub fn new(space: &MixedIntegerSpace, coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.len() != space.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: space.dim(),
                found: coords.len(),
            });
        }
        let mut coords = coords;
        for (j, v) in coords.iter_mut().enumerate().take(space.integer_dims()) {
            let r = v.round();
            if (*v - r).abs() > INTEGRALITY_TOL {
                return Err(GeometryError::NotIntegral { coord: j, value: *v });
            }
            *v = r;
        }
        Ok(Self { coords })
    }

    /// Wraps raw coordinates without integrality checks.
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Candidate identity: integer parts equal, continuous parts within [`POINT_TOL`].
    pub fn same_candidate(&self, other: &Point, space: &MixedIntegerSpace) -> bool {
        self.coords.len() == other.coords.len()
            && self.coords.iter().zip(&other.coords).enumerate().all(|(j, (a, b))| {
                if space.is_integer(j) {
                    a == b
                } else {
                    (a - b).abs() <= POINT_TOL * (1.0 + a.abs().max(b.abs()))
                }
            })
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, v) in self.coords.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Where a constraint came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    /// Row `row` of node `node`'s nominal realization.
    Nominal { node: u32, row: u32 },
    /// Row `row` of draw `index` taken during verification `batch` at node `node`.
    Sample {
        node: u32,
        batch: u64,
        index: u32,
        row: u32,
    },
    /// Free-form tag for hand-built systems.
    Tag(u64),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Nominal { node, row } => write!(f, "n{node}:nom:{row}"),
            Provenance::Sample {
                node,
                batch,
                index,
                row,
            } => write!(f, "n{node}:k{batch}:q{index}:{row}"),
            Provenance::Tag(t) => write!(f, "tag:{t}"),
        }
    }
}

/// Half-space `a . x <= b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    coeffs: Vec<f64>,
    bound: f64,
    provenance: Provenance,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, bound: f64, provenance: Provenance) -> Result<Self, GeometryError> {
        if coeffs.iter().all(|&a| a == 0.0) {
            return Err(GeometryError::ZeroRow);
        }
        if !bound.is_finite() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self {
            coeffs,
            bound,
            provenance,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `a . x - b`; non-positive (up to tolerance) means satisfied.
    pub fn residual(&self, x: &Point) -> Result<f64, GeometryError> {
        if x.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(self.residual_at(x.coords()))
    }

    /// Unchecked residual for hot loops.
    #[inline]
    pub fn residual_at(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.bound
    }

    pub fn is_satisfied(&self, x: &[f64]) -> bool {
        self.residual_at(x) <= FEASIBILITY_TOL
    }
}

/// Free-standing residual, `a . x - b`.
pub fn residual(constraint: &LinearConstraint, x: &Point) -> Result<f64, GeometryError> {
    constraint.residual(x)
}

/// Objective value `c . x`.
pub fn cost(objective: &[f64], x: &Point) -> Result<f64, GeometryError> {
    if objective.len() != x.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: objective.len(),
            found: x.dim(),
        });
    }
    Ok(dot(objective, x.coords()))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An objective over `S` together with a finite list of constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    space: MixedIntegerSpace,
    objective: Vec<f64>,
    constraints: Vec<LinearConstraint>,
}

impl ConstraintSystem {
    pub fn new(
        space: MixedIntegerSpace,
        objective: Vec<f64>,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self, GeometryError> {
        let d = space.dim();
        if objective.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: objective.len(),
            });
        }
        if let Some(c) = constraints.iter().find(|c| c.dim() != d) {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        Ok(Self {
            space,
            objective,
            constraints,
        })
    }

    pub fn space(&self) -> &MixedIntegerSpace {
        &self.space
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Same objective and space over a different constraint list.
    pub fn with_constraints(&self, constraints: Vec<LinearConstraint>) -> Self {
        Self {
            space: self.space,
            objective: self.objective.clone(),
            constraints,
        }
    }

    /// Sorts by provenance and drops repeated provenances, keeping the first.
    pub fn canonicalize(&mut self) {
        self.constraints.sort_by_key(|c| c.provenance());
        self.constraints.dedup_by_key(|c| c.provenance());
    }

    /// Largest residual over all constraints (`-inf` when empty).
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.residual_at(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A minimal constraint subset with the same optimum as the system it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    constraints: Vec<LinearConstraint>,
    cost: f64,
}

impl Basis {
    pub fn new(mut constraints: Vec<LinearConstraint>, cost: f64) -> Self {
        constraints.sort_by_key(|c| c.provenance());
        Self { constraints, cost }
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Identity of a basis is the set of its provenances.
    pub fn same_members(&self, other: &Basis) -> bool {
        self.constraints.len() == other.constraints.len()
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| a.provenance() == b.provenance())
    }
}

/// Lexicographic comparison of `(c . x, x_1, ..., x_d)` keys with a relative tolerance
/// per component.
pub fn lex_compare(a: &[f64], b: &[f64], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let scale = 1.0 + x.abs().max(y.abs());
        if (x - y).abs() > tol * scale {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}
