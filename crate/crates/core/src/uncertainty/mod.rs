//! Uncertain constraint sets, sampling and Monte Carlo verification.

pub mod bounds;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, UncertaintyError};
use crate::geometry::{dot, LinearConstraint, Point, Provenance, FEASIBILITY_TOL};

pub use bounds::{
    alamo_bound, log_binomial_tail, sample_size, sample_size_for, scenario_bound, scenario_tail,
    verification_counter_threshold,
};

/// A linear row whose bound moves with an uncertain anchor point `p`:
/// `a . x <= a_anchor . p + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredRow {
    pub coeffs: Vec<f64>,
    /// Weights applied to the anchor point in the bound.
    pub anchor_coeffs: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintyKind {
    /// Rows `(A0 + Aq) x <= b` with every entry of `Aq` uniform in `[-radius, radius]`.
    IntervalMatrix {
        rows: Vec<Vec<f64>>,
        bounds: Vec<f64>,
        radius: f64,
    },
    /// Rows anchored at a point drawn uniformly from the ball of `radius` around `center`.
    BallCenter {
        center: Vec<f64>,
        radius: f64,
        rows: Vec<AnchoredRow>,
    },
}

/// One node's uncertain constraint set `F^i(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertainConstraintSet {
    owner: u32,
    dim: usize,
    #[serde(flatten)]
    kind: UncertaintyKind,
}

/// A realized uncertainty value `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Draw {
    /// Row-major deviation matrix for an interval set.
    Deviation(Vec<f64>),
    /// Realized anchor point for a ball set.
    Anchor(Vec<f64>),
}

impl UncertainConstraintSet {
    pub fn new(owner: u32, dim: usize, kind: UncertaintyKind) -> Result<Self, UncertaintyError> {
        let bad = |m: &str| Err(UncertaintyError::InvalidSet(m.to_string()));
        match &kind {
            UncertaintyKind::IntervalMatrix {
                rows,
                bounds,
                radius,
            } => {
                if !(*radius >= 0.0) {
                    return bad("radius must be non-negative");
                }
                if rows.len() != bounds.len() {
                    return bad("row and bound counts differ");
                }
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(GeometryError::DimensionMismatch {
                        expected: dim,
                        found: rows.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
                    }
                    .into());
                }
                if rows.iter().any(|r| r.iter().all(|v| *v == 0.0)) && *radius == 0.0 {
                    return bad("zero nominal row without uncertainty");
                }
            }
            UncertaintyKind::BallCenter {
                center,
                radius,
                rows,
            } => {
                if !(*radius >= 0.0) {
                    return bad("radius must be non-negative");
                }
                if rows
                    .iter()
                    .any(|r| r.coeffs.len() != dim || r.anchor_coeffs.len() != center.len())
                {
                    return bad("anchored row dimensions inconsistent");
                }
                if rows.iter().any(|r| r.coeffs.iter().all(|v| *v == 0.0)) {
                    return bad("zero anchored row");
                }
            }
        }
        Ok(Self { owner, dim, kind })
    }

    pub fn owner(&self) -> u32 {
        self.owner
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &UncertaintyKind {
        &self.kind
    }

    pub fn row_count(&self) -> usize {
        match &self.kind {
            UncertaintyKind::IntervalMatrix { rows, .. } => rows.len(),
            UncertaintyKind::BallCenter { rows, .. } => rows.len(),
        }
    }

    /// The zero-deviation / center-point realization.
    pub fn nominal_draw(&self) -> Draw {
        match &self.kind {
            UncertaintyKind::IntervalMatrix { .. } => Draw::Deviation(Vec::new()),
            UncertaintyKind::BallCenter { center, .. } => Draw::Anchor(center.clone()),
        }
    }

    /// Residual of row `row` realized at `draw`, evaluated at `x`.
    #[inline]
    pub fn row_residual(&self, draw: &Draw, row: usize, x: &[f64]) -> f64 {
        let (a, b) = self.realized_row(draw, row);
        dot(&a, x) - b
    }

    /// Realized `(a, b)` for row `row`.
    pub fn realized_row(&self, draw: &Draw, row: usize) -> (Vec<f64>, f64) {
        match (&self.kind, draw) {
            (UncertaintyKind::IntervalMatrix { rows, bounds, .. }, Draw::Deviation(dev)) => {
                let mut a = rows[row].clone();
                if !dev.is_empty() {
                    let d = self.dim;
                    for (aj, dj) in a.iter_mut().zip(&dev[row * d..(row + 1) * d]) {
                        *aj += dj;
                    }
                }
                (a, bounds[row])
            }
            (UncertaintyKind::BallCenter { rows, .. }, Draw::Anchor(p)) => {
                let r = &rows[row];
                (r.coeffs.clone(), dot(&r.anchor_coeffs, p) + r.offset)
            }
            _ => panic!("draw kind does not match uncertainty set kind"),
        }
    }

    /// Indices of rows realized at `draw` that `x` violates.
    pub fn violated_rows(&self, draw: &Draw, x: &[f64], tol: f64) -> Vec<usize> {
        match (&self.kind, draw) {
            (UncertaintyKind::IntervalMatrix { rows, bounds, .. }, Draw::Deviation(dev)) => {
                let d = self.dim;
                rows.iter()
                    .zip(bounds)
                    .enumerate()
                    .filter(|(l, (a, b))| {
                        let mut s = dot(a, x);
                        if !dev.is_empty() {
                            s += dot(&dev[l * d..(l + 1) * d], x);
                        }
                        s - **b > tol
                    })
                    .map(|(l, _)| l)
                    .collect()
            }
            (UncertaintyKind::BallCenter { rows, .. }, Draw::Anchor(p)) => rows
                .iter()
                .enumerate()
                .filter(|(_, r)| dot(&r.coeffs, x) - dot(&r.anchor_coeffs, p) - r.offset > tol)
                .map(|(l, _)| l)
                .collect(),
            _ => panic!("draw kind does not match uncertainty set kind"),
        }
    }

    pub fn is_violated(&self, draw: &Draw, x: &[f64], tol: f64) -> bool {
        match (&self.kind, draw) {
            (UncertaintyKind::IntervalMatrix { rows, bounds, .. }, Draw::Deviation(dev)) => {
                let d = self.dim;
                rows.iter().zip(bounds).enumerate().any(|(l, (a, b))| {
                    let mut s = dot(a, x);
                    if !dev.is_empty() {
                        s += dot(&dev[l * d..(l + 1) * d], x);
                    }
                    s - b > tol
                })
            }
            (UncertaintyKind::BallCenter { rows, .. }, Draw::Anchor(p)) => rows
                .iter()
                .any(|r| dot(&r.coeffs, x) - dot(&r.anchor_coeffs, p) - r.offset > tol),
            _ => panic!("draw kind does not match uncertainty set kind"),
        }
    }

    /// Realized constraints for the listed rows, tagged with `provenance(row)`.
    pub fn realize_rows(
        &self,
        draw: &Draw,
        rows: &[usize],
        provenance: impl Fn(u32) -> Provenance,
    ) -> Result<Vec<LinearConstraint>, GeometryError> {
        rows.iter()
            .map(|&l| {
                let (a, b) = self.realized_row(draw, l);
                LinearConstraint::new(a, b, provenance(l as u32))
            })
            .collect()
    }

    /// All rows of the nominal realization `q_0`.
    pub fn nominal_constraints(&self) -> Result<Vec<LinearConstraint>, GeometryError> {
        let draw = self.nominal_draw();
        let all: Vec<usize> = (0..self.row_count()).collect();
        let node = self.owner;
        self.realize_rows(&draw, &all, |row| Provenance::Nominal { node, row })
    }
}

/// Pluggable probability measure over a set's uncertainty.
pub trait Sampler: Sync {
    fn draw(&self, set: &UncertainConstraintSet, rng: &mut dyn RngCore) -> Draw;
}

/// Uniform measure: interval entries uniform in `[-radius, radius]`, anchors
/// uniform in the Euclidean ball (rejection from the bounding cube).
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformSampler;

impl Sampler for UniformSampler {
    fn draw(&self, set: &UncertainConstraintSet, rng: &mut dyn RngCore) -> Draw {
        match &set.kind {
            UncertaintyKind::IntervalMatrix { rows, radius, .. } => {
                if *radius == 0.0 {
                    return Draw::Deviation(Vec::new());
                }
                let n = rows.len() * set.dim;
                Draw::Deviation(
                    (0..n)
                        .map(|_| rng.random_range(-*radius..=*radius))
                        .collect(),
                )
            }
            UncertaintyKind::BallCenter { center, radius, .. } => {
                if *radius == 0.0 {
                    return Draw::Anchor(center.clone());
                }
                loop {
                    let u: Vec<f64> = center
                        .iter()
                        .map(|_| rng.random_range(-1.0..=1.0))
                        .collect();
                    if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        return Draw::Anchor(
                            center.iter().zip(&u).map(|(c, v)| c + radius * v).collect(),
                        );
                    }
                }
            }
        }
    }
}

/// `m` independent draws from the uniform measure.
pub fn draw_multisample<R: Rng>(set: &UncertainConstraintSet, m: usize, rng: &mut R) -> Vec<Draw> {
    draw_multisample_with(&UniformSampler, set, m, rng)
}

pub fn draw_multisample_with<R: Rng>(
    sampler: &dyn Sampler,
    set: &UncertainConstraintSet,
    m: usize,
    rng: &mut R,
) -> Vec<Draw> {
    (0..m).map(|_| sampler.draw(set, rng)).collect()
}

/// Accuracy/confidence levels and the verification counter `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSchedule {
    eps: f64,
    delta: f64,
    counter: u64,
}

impl SampleSchedule {
    pub fn new(eps: f64, delta: f64) -> Result<Self, UncertaintyError> {
        Ok(Self {
            eps: bounds::check_level(eps)?,
            delta: bounds::check_level(delta)?,
            counter: 1,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn sample_size(&self) -> u64 {
        bounds::sample_size(self)
    }

    pub(crate) fn advance(&mut self) {
        self.counter += 1;
    }
}

/// A sampled realization violated at the certified point, with the violated rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationCertificate {
    /// Verification counter value when the draw was taken.
    pub batch: u64,
    /// Position of the draw in its multi-sample.
    pub index: u32,
    pub draw: Draw,
    pub constraints: Vec<LinearConstraint>,
}

/// Scans `draws` in order and returns the first `r` that `x` violates.
pub fn scan_draws<'a>(
    x: &[f64],
    set: &UncertainConstraintSet,
    draws: impl IntoIterator<Item = (u64, u32, &'a Draw)>,
    r: usize,
) -> Vec<ViolationCertificate> {
    let mut out = Vec::new();
    for (batch, index, draw) in draws {
        if out.len() >= r {
            break;
        }
        let rows = set.violated_rows(draw, x, FEASIBILITY_TOL);
        if rows.is_empty() {
            continue;
        }
        let node = set.owner;
        let constraints = set
            .realize_rows(draw, &rows, |row| Provenance::Sample {
                node,
                batch,
                index,
                row,
            })
            .expect("violated rows are nonzero");
        out.push(ViolationCertificate {
            batch,
            index,
            draw: draw.clone(),
            constraints,
        });
    }
    out
}

/// One verification step: draw `M_k` samples, return up to `r` certificates in
/// draw order, and advance the counter.
pub fn verify<R: Rng>(
    x: &Point,
    set: &UncertainConstraintSet,
    schedule: &mut SampleSchedule,
    r: usize,
    rng: &mut R,
) -> Vec<ViolationCertificate> {
    verify_with(&UniformSampler, x, set, schedule, r, rng)
}

pub fn verify_with<R: Rng>(
    sampler: &dyn Sampler,
    x: &Point,
    set: &UncertainConstraintSet,
    schedule: &mut SampleSchedule,
    r: usize,
    rng: &mut R,
) -> Vec<ViolationCertificate> {
    let r = r.max(1);
    let m = schedule.sample_size();
    let batch = schedule.counter();
    let node = set.owner;
    let mut out = Vec::new();
    for index in 0..m {
        let draw = sampler.draw(set, rng);
        let rows = set.violated_rows(&draw, x.coords(), FEASIBILITY_TOL);
        if rows.is_empty() {
            continue;
        }
        let index = index as u32;
        let constraints = set
            .realize_rows(&draw, &rows, |row| Provenance::Sample {
                node,
                batch,
                index,
                row,
            })
            .expect("violated rows are nonzero");
        out.push(ViolationCertificate {
            batch,
            index,
            draw,
            constraints,
        });
        if out.len() >= r {
            break;
        }
    }
    schedule.advance();
    out
}
