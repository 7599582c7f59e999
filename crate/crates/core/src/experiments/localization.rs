//! Bounding-box localization of one sensor by a network of sensors with
//! uncertain known positions.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{posterior_violation, run_instance, Instance, NodeSpec, RunConfig, RunOutput, SCHEMA_VERSION};
use crate::error::{Error, GraphError, Result};
use crate::milp::SolverConfig;
use crate::network::{is_strongly_connected, EdgeSchedule};
use crate::rng::{derive_seed, purpose, substream};
use crate::uncertainty::{AnchoredRow, UncertainConstraintSet, UncertaintyKind};

/// Cap on scene resampling in [`generate_localization`].
pub const PLACEMENT_CAP: usize = 10_000;

/// Which side of the bounding box a consensus instance computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XLower,
    XUpper,
    YLower,
    YUpper,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::XLower, Face::XUpper, Face::YLower, Face::YUpper];

    pub fn objective(self) -> Vec<f64> {
        match self {
            Face::XLower => vec![1.0, 0.0],
            Face::XUpper => vec![-1.0, 0.0],
            Face::YLower => vec![0.0, 1.0],
            Face::YUpper => vec![0.0, -1.0],
        }
    }

    /// Box coordinate from the optimal cost.
    pub fn value(self, cost: f64) -> f64 {
        match self {
            Face::XLower | Face::YLower => cost,
            Face::XUpper | Face::YUpper => -cost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    /// Side of the square region.
    pub area: f64,
    /// Sensors with known (uncertain) position; these are the nodes.
    pub n: usize,
    /// Communication, sensing and laser range.
    pub range: f64,
    /// Full opening angle of a laser bearing cone, in degrees.
    pub alpha_deg: f64,
    pub laser_fraction: f64,
    /// Radius of the position uncertainty ball.
    pub rho: f64,
    /// Sides of the polygon circumscribing each range disk.
    pub polygon_sides: usize,
    pub face: Face,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for LocalizationSpec {
    fn default() -> Self {
        Self {
            area: 10.0,
            n: 10,
            range: 7.0,
            alpha_deg: 20.0,
            laser_fraction: 0.5,
            rho: 0.1,
            polygon_sides: 16,
            face: Face::XLower,
            eps: 0.1,
            delta: 1e-9,
            seed: 0,
        }
    }
}

impl LocalizationSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.range > 0.0) || !(self.area > 0.0) {
            return bad(format!("range {} and area {} must be positive", self.range, self.area));
        }
        if !(self.alpha_deg > 0.0 && self.alpha_deg < 180.0) {
            return bad(format!("alpha {} must lie in (0, 180) degrees", self.alpha_deg));
        }
        if self.polygon_sides < 3 {
            return bad(format!("polygon needs at least 3 sides, got {}", self.polygon_sides));
        }
        if self.n == 0 || !(0.0..=1.0).contains(&self.laser_fraction) || !(self.rho >= 0.0) {
            return bad("invalid node count, laser fraction or radius".into());
        }
        Ok(())
    }
}

fn row(coeffs: [f64; 2], offset: f64) -> AnchoredRow {
    AnchoredRow {
        coeffs: coeffs.to_vec(),
        anchor_coeffs: coeffs.to_vec(),
        offset,
    }
}

/// Circumscribed regular polygon of the disk of radius `r` around the anchor.
fn polygon_rows(r: f64, sides: usize) -> Vec<AnchoredRow> {
    (0..sides)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / sides as f64;
            row([theta.cos(), theta.sin()], r)
        })
        .collect()
}

/// Bearing cone of half-angle `half` around `phi`, cut off at distance `r`.
fn cone_rows(phi: f64, half: f64, r: f64) -> Vec<AnchoredRow> {
    let (a, b) = (phi + half, phi - half);
    vec![
        row([-a.sin(), a.cos()], 0.0),
        row([b.sin(), -b.cos()], 0.0),
        row([phi.cos(), phi.sin()], r),
    ]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Whether `s` satisfies every row for every anchor in the ball of radius `rho`.
fn robustly_inside(rows: &[AnchoredRow], anchor: [f64; 2], rho: f64, s: [f64; 2]) -> bool {
    rows.iter().all(|r| {
        let lhs = r.coeffs[0] * s[0] + r.coeffs[1] * s[1];
        let norm = (r.anchor_coeffs[0].powi(2) + r.anchor_coeffs[1].powi(2)).sqrt();
        let rhs = r.anchor_coeffs[0] * anchor[0] + r.anchor_coeffs[1] * anchor[1] + r.offset - rho * norm;
        lhs < rhs
    })
}

/// Places the sensors and builds the instance for `spec.face`.
///
/// Scenes are resampled until the known sensors form a connected network, at
/// least one of them senses the unknown sensor, and the unknown sensor meets
/// every emitted constraint for all positions in the uncertainty balls.
pub fn generate_localization(spec: &LocalizationSpec) -> Result<Instance> {
    spec.validate()?;
    let half = spec.alpha_deg.to_radians() / 2.0;
    let lasers = ((spec.n as f64) * spec.laser_fraction).round() as usize;
    for attempt in 0..PLACEMENT_CAP {
        let mut rng = substream(spec.seed, &[purpose::PLACEMENT, attempt as u64]);
        let mut point = || [rng.random::<f64>() * spec.area, rng.random::<f64>() * spec.area];
        let known: Vec<[f64; 2]> = (0..spec.n).map(|_| point()).collect();
        let unknown = point();
        let mut order: Vec<usize> = (0..spec.n).collect();
        order.shuffle(&mut rng);
        let mut has_laser = vec![false; spec.n];
        for &i in order.iter().take(lasers) {
            has_laser[i] = true;
        }

        let mut edges = Vec::new();
        for i in 0..spec.n {
            for j in 0..spec.n {
                if i != j && dist(known[i], known[j]) < spec.range {
                    edges.push((i, j));
                }
            }
        }
        if !is_strongly_connected(spec.n, &edges) {
            continue;
        }

        let rows: Vec<Vec<AnchoredRow>> = (0..spec.n)
            .map(|i| {
                let p = known[i];
                if dist(p, unknown) >= spec.range {
                    return Vec::new();
                }
                let mut rows = polygon_rows(spec.range, spec.polygon_sides);
                if has_laser[i] {
                    let phi = (unknown[1] - p[1]).atan2(unknown[0] - p[0]);
                    rows.extend(cone_rows(phi, half, spec.range));
                }
                rows
            })
            .collect();
        if rows.iter().all(Vec::is_empty) {
            continue;
        }
        if !(0..spec.n).all(|i| robustly_inside(&rows[i], known[i], spec.rho, unknown)) {
            continue;
        }

        let nodes = rows
            .into_iter()
            .enumerate()
            .map(|(i, rows)| {
                let set = UncertainConstraintSet::new(
                    i as u32,
                    2,
                    UncertaintyKind::BallCenter {
                        center: known[i].to_vec(),
                        radius: spec.rho,
                        rows,
                    },
                )?;
                Ok(NodeSpec {
                    set,
                    eps: spec.eps / spec.n as f64,
                    delta: spec.delta / spec.n as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Instance {
            schema_version: SCHEMA_VERSION,
            integer_dims: 0,
            real_dims: 2,
            objective: spec.face.objective(),
            nodes,
            schedule: EdgeSchedule::fixed(spec.n, edges)?,
            seed: spec.seed,
            solver: SolverConfig::default(),
            truth: Some(unknown.to_vec()),
        });
    }
    Err(GraphError::ResampleCap(PLACEMENT_CAP).into())
}

#[derive(Clone, Debug)]
pub struct FaceResult {
    pub face: Face,
    /// Box coordinate agreed by the network.
    pub value: f64,
    pub output: RunOutput,
}

#[derive(Clone, Debug)]
pub struct LocalizationOutcome {
    pub truth: Vec<f64>,
    pub faces: Vec<FaceResult>,
    /// `[x_lower, x_upper, y_lower, y_upper]`.
    pub bounds: [f64; 4],
    /// Empirical violation of each face's solution.
    pub violations: Vec<f64>,
}

impl LocalizationOutcome {
    pub fn contains_truth(&self, tol: f64) -> bool {
        let [xl, xu, yl, yu] = self.bounds;
        let (x, y) = (self.truth[0], self.truth[1]);
        xl - tol <= x && x <= xu + tol && yl - tol <= y && y <= yu + tol
    }

    pub fn all_halted(&self) -> bool {
        self.faces.iter().all(|f| f.output.outcome.halted())
    }
}

/// Runs the four faces as independent consensus instances over one scene.
pub fn run_localization(spec: &LocalizationSpec, config: &RunConfig) -> Result<LocalizationOutcome> {
    let run = RunConfig {
        posterior_samples: 0,
        ..config.clone()
    };
    let mut faces = Vec::with_capacity(4);
    let mut violations = Vec::with_capacity(4);
    let mut truth = Vec::new();
    for face in Face::ALL {
        let instance = generate_localization(&LocalizationSpec { face, ..spec.clone() })?;
        truth = instance.truth.clone().unwrap_or_default();
        let output = run_instance(&instance, &run)?;
        if config.posterior_samples > 0 {
            violations.push(posterior_violation(
                output.solution().coords(),
                &instance.sets(),
                config.posterior_samples,
                derive_seed(instance.seed, &[purpose::POSTERIOR, face as u64]),
                config.execution,
            ));
        }
        faces.push(FaceResult {
            face,
            value: face.value(output.outcome.costs[0]),
            output,
        });
    }
    let bounds = [faces[0].value, faces[1].value, faces[2].value, faces[3].value];
    Ok(LocalizationOutcome {
        truth,
        faces,
        bounds,
        violations,
    })
}
