use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::Result;
use crate::network::{SimOutcome, TraceEvent};

/// Metrics of one run, in the units of the result tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub n: usize,
    pub halted: bool,
    pub rounds: usize,
    /// Mean basis transmissions per node.
    pub transmissions: f64,
    /// Mean final verification counter `k_i`.
    pub verifications: f64,
    pub local_solves: f64,
    /// Empirical violation of node 0's solution, if evaluated.
    pub violation: Option<f64>,
    /// Node 0's final cost.
    pub cost: f64,
    /// Whether all nodes ended on the same candidate.
    pub agreement: bool,
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    v.sum::<f64>() / n as f64
}

impl RunReport {
    pub fn from_outcome(instance: &Instance, outcome: &SimOutcome, violation: Option<f64>) -> Result<Self> {
        let space = instance.space()?;
        let first = &outcome.solutions[0];
        Ok(Self {
            seed: instance.seed,
            n: outcome.solutions.len(),
            halted: outcome.halted(),
            rounds: outcome.stats.rounds,
            transmissions: mean(outcome.stats.transmissions.iter().map(|&v| v as f64)),
            verifications: mean(outcome.stats.verifications.iter().map(|&v| v as f64)),
            local_solves: mean(outcome.stats.local_solves.iter().map(|&v| v as f64)),
            violation,
            cost: outcome.costs[0],
            agreement: outcome.solutions.iter().all(|s| s.same_candidate(first, &space)),
        })
    }
}

/// Averages over a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub halted: usize,
    pub transmissions: f64,
    pub verifications: f64,
    pub violation: Option<f64>,
    pub violation_max: Option<f64>,
    pub rounds: f64,
}

pub fn summarize(reports: &[RunReport]) -> Summary {
    let violations: Vec<f64> = reports.iter().filter_map(|r| r.violation).collect();
    Summary {
        runs: reports.len(),
        halted: reports.iter().filter(|r| r.halted).count(),
        transmissions: mean(reports.iter().map(|r| r.transmissions)),
        verifications: mean(reports.iter().map(|r| r.verifications)),
        violation: (!violations.is_empty()).then(|| mean(violations.iter().copied())),
        violation_max: violations.iter().copied().reduce(f64::max),
        rounds: mean(reports.iter().map(|r| r.rounds as f64)),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(reports: &[RunReport], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "seed,n,halted,rounds,transmissions,verifications,local_solves,violation,cost,agreement"
    )?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.n,
            r.halted,
            r.rounds,
            r.transmissions,
            r.verifications,
            r.local_solves,
            opt(r.violation),
            r.cost,
            r.agreement
        )?;
    }
    Ok(())
}

/// One row per label, mirroring the result tables.
pub fn write_summary_csv<W: Write>(rows: &[(String, Summary)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "label,runs,halted,transmissions,verifications,violation,violation_max,rounds")?;
    for (label, s) in rows {
        writeln!(
            out,
            "{label},{},{},{},{},{},{},{}",
            s.runs,
            s.halted,
            s.transmissions,
            s.verifications,
            opt(s.violation),
            opt(s.violation_max),
            s.rounds
        )?;
    }
    Ok(())
}

/// Worst distance of any node to the final cost and solution after round `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub t: usize,
    pub cost_gap: f64,
    pub solution_distance: f64,
}

/// Replays `trace` and measures, after every round, how far the nodes are
/// from `final_cost` and `final_solution`.
pub fn convergence_series(
    trace: &[TraceEvent],
    n: usize,
    final_cost: f64,
    final_solution: &[f64],
) -> Vec<ConvergencePoint> {
    let mut cost = vec![f64::NAN; n];
    let mut point: Vec<Option<&[f64]>> = vec![None; n];
    let mut series = Vec::new();
    let last = trace.last().map_or(0, |e| e.t);
    let mut events = trace.iter().peekable();
    for t in 0..=last {
        while let Some(e) = events.next_if(|e| e.t == t) {
            cost[e.node as usize] = e.cost;
            point[e.node as usize] = Some(&e.candidate);
        }
        let cost_gap = cost.iter().map(|c| (c - final_cost).abs()).fold(0.0, f64::max);
        let solution_distance = point
            .iter()
            .map(|p| match p {
                Some(p) => p
                    .iter()
                    .zip(final_solution)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        series.push(ConvergencePoint {
            t,
            cost_gap,
            solution_distance,
        });
    }
    series
}

/// Line plot of both convergence curves on a `log10(1 + value)` scale.
pub fn write_series_svg<W: Write>(series: &[ConvergencePoint], title: &str, mut out: W) -> std::io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let scale = |v: f64| (1.0 + v).log10();
    let t_max = series.last().map_or(1, |p| p.t.max(1)) as f64;
    let y_max = series
        .iter()
        .flat_map(|p| [scale(p.cost_gap), scale(p.solution_distance)])
        .filter(|v| v.is_finite())
        .fold(1e-12, f64::max);
    let px = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / t_max;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (scale(v).min(y_max) / y_max);
    let polyline = |f: &dyn Fn(&ConvergencePoint) -> f64| {
        series
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.t), py(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    )?;
    writeln!(
        out,
        r#"<path d="M{PAD},{PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">round (max {t_max})</text>"#,
        W / 2.0,
        H - 15.0
    )?;
    writeln!(
        out,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
        polyline(&|p| p.cost_gap)
    )?;
    writeln!(
        out,
        r#"<polyline points="{}" stroke="darkorange" stroke-width="2" fill="none" stroke-dasharray="6 3"/>"#,
        polyline(&|p| p.solution_distance)
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="steelblue">cost gap</text>"#,
        W - 170.0,
        PAD
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="darkorange">solution distance</text>"#,
        W - 170.0,
        PAD + 16.0
    )?;
    writeln!(out, "</svg>")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EventKind;

    fn report(seed: u64, tx: f64, v: f64) -> RunReport {
        RunReport {
            seed,
            n: 3,
            halted: true,
            rounds: 10,
            transmissions: tx,
            verifications: 2.0,
            local_solves: 3.0,
            violation: Some(v),
            cost: 1.0,
            agreement: true,
        }
    }

    #[test]
    fn single_run_summary_is_the_run() {
        let s = summarize(&[report(1, 4.0, 0.01)]);
        assert_eq!(s.transmissions, 4.0);
        assert_eq!(s.violation, Some(0.01));
        assert_eq!(s.halted, 1);
    }

    #[test]
    fn summary_is_permutation_invariant() {
        let a = [report(1, 4.0, 0.01), report(2, 8.0, 0.0), report(3, 3.0, 0.02)];
        let b = [a[2].clone(), a[0].clone(), a[1].clone()];
        let (sa, sb) = (summarize(&a), summarize(&b));
        assert!((sa.transmissions - sb.transmissions).abs() < 1e-12);
        assert!((sa.violation.unwrap() - sb.violation.unwrap()).abs() < 1e-12);
        assert_eq!(sa.violation_max, Some(0.02));
    }

    #[test]
    fn series_ends_at_zero() {
        let ev = |t, node, cost, x: f64| TraceEvent {
            t,
            node,
            kind: EventKind::Transmit,
            cost,
            basis_size: 1,
            k: 1,
            candidate: vec![x],
        };
        let trace = vec![ev(0, 0, 1.0, 1.0), ev(0, 1, 2.0, 2.0), ev(2, 0, 2.0, 2.0)];
        let s = convergence_series(&trace, 2, 2.0, &[2.0]);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].cost_gap, 1.0);
        assert_eq!(s[1].solution_distance, 1.0);
        assert_eq!(s[2].cost_gap, 0.0);
        assert_eq!(s[2].solution_distance, 0.0);
        let mut svg = Vec::new();
        write_series_svg(&s, "a < b", &mut svg).unwrap();
        let svg = String::from_utf8(svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("a &lt; b") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut out = Vec::new();
        write_report_csv(&[report(1, 4.0, 0.01)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("1,3,true,10,4,2,3,0.01,"));
    }
}
