//! End-to-end acceptance checks. Prints one line per criterion and exits
//! with a nonzero status if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcc::experiments::{
    centralized_oracle, frozen_constraints, generate_random_milp, run_instance, run_localization, summarize, Instance,
    LocalizationSpec, MilpInstanceSpec, RunConfig, RunOutput,
};
use rcc::network::{write_trace_csv, NodeOrder, ScenarioMode, TraceEvent};
use rcc::uncertainty::bounds::{
    alamo_bound, sample_size_for, scenario_bound, scenario_tail, verification_counter_threshold,
};
use rcc::Execution;

const COST_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-9;
const VIOLATION_LIMIT: f64 = 0.1;
const CRITERION1_SEEDS: u64 = 100;
const CRITERION2_SEEDS: u64 = 20;
const CRITERION2_REQUIRED: usize = 19;
const SOLVER_INSTANCES: usize = 500;
const LOCALIZATION_SEEDS: u64 = 10;
const REFERENCE_TRANSMISSIONS: f64 = 29.86;
const REFERENCE_VERIFICATIONS: f64 = 15.6;
const THRESHOLD_REFERENCE: f64 = 1.2e13;
const THRESHOLD_TOL: f64 = 0.10;

/// Scenario sample sizes computed with 50-digit arithmetic:
/// `(eps, delta, [M for h = 2, 4, 16])`.
const SCENARIO_GRID: [(f64, f64, [u64; 3]); 4] = [
    (0.1, 1e-6, [132, 183, 397]),
    (0.1, 1e-10, [219, 278, 520]),
    (0.01, 1e-6, [1375, 1905, 4089]),
    (0.01, 1e-10, [2292, 2901, 5377]),
];
const GRID_HELLY: [u64; 3] = [2, 4, 16];

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn csv(trace: &[TraceEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    write_trace_csv(trace, &mut out).expect("writing to memory");
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOL * (1.0 + b.abs())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn oracle_instance(seed: u64) -> Instance {
    generate_random_milp(&MilpInstanceSpec {
        n: 10,
        constraints_per_node: 20,
        integer_dims: 2,
        real_dims: 2,
        radius: 0.0,
        degree: 3,
        diameter: None,
        seed,
        ..MilpInstanceSpec::default()
    })
    .expect("instance generation")
}

fn table_instance(seed: u64) -> Instance {
    generate_random_milp(&MilpInstanceSpec {
        seed,
        ..MilpInstanceSpec::default()
    })
    .expect("instance generation")
}

fn oracle_equivalence(runs: &mut Vec<RunOutput>) -> Verdict {
    let config = RunConfig {
        posterior_samples: 0,
        ..RunConfig::default()
    };
    let mut failures = Vec::new();
    for seed in 0..CRITERION1_SEEDS {
        let inst = oracle_instance(seed);
        let space = inst.space().expect("space");
        let out = match run_instance(&inst, &config) {
            Ok(out) => out,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let oracle = centralized_oracle(
            inst.nominal_constraints().expect("rows"),
            &inst.objective,
            space,
            &inst.solver,
        )
        .expect("oracle solve");
        let first = &out.outcome.solutions[0];
        let integers_agree = out.outcome.solutions.iter().all(|s| {
            s.coords()[..space.integer_dims()] == first.coords()[..space.integer_dims()]
        });
        let costs_match = out.outcome.costs.iter().all(|&c| close(c, oracle.cost));
        if !out.outcome.halted() || !integers_agree || !costs_match {
            failures.push(format!(
                "seed {seed}: halted {} agree {integers_agree} cost {} oracle {}",
                out.outcome.halted(),
                out.outcome.costs[0],
                oracle.cost
            ));
        }
        runs.push(out);
    }
    Verdict {
        id: 1,
        name: "deterministic oracle equivalence",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{CRITERION1_SEEDS}/{CRITERION1_SEEDS} runs match the centralized solve")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    }
}

fn table_row(certificates: usize, execution: Execution) -> Vec<RunOutput> {
    let config = RunConfig {
        certificates,
        execution,
        ..RunConfig::default()
    };
    (0..CRITERION2_SEEDS)
        .map(|seed| run_instance(&table_instance(seed), &config).expect("run"))
        .collect()
}

fn violation_check(runs: &[RunOutput]) -> Verdict {
    let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
    let s = summarize(&reports);
    let within = reports
        .iter()
        .filter(|r| r.violation.is_some_and(|v| v <= VIOLATION_LIMIT))
        .count();
    let halted = s.halted == s.runs;
    Verdict {
        id: 2,
        name: "robust MILP halting and violation",
        pass: halted && within >= CRITERION2_REQUIRED,
        detail: format!(
            "halted {}/{}, violation <= {VIOLATION_LIMIT} in {within}/{}, mean violation {:.3e}, \
             transmissions {:.2} (reference {REFERENCE_TRANSMISSIONS}), verifications {:.2} (reference {REFERENCE_VERIFICATIONS})",
            s.halted,
            s.runs,
            s.runs,
            s.violation.unwrap_or(f64::NAN),
            s.transmissions,
            s.verifications
        ),
    }
}

fn monotonicity(runs: &[&RunOutput]) -> Verdict {
    let mut violations = 0usize;
    let mut events = 0usize;
    for run in runs {
        let n = run.outcome.solutions.len();
        let mut last = vec![f64::NEG_INFINITY; n];
        for e in &run.outcome.trace {
            events += 1;
            let i = e.node as usize;
            if e.cost < last[i] - MONOTONE_TOL {
                violations += 1;
            }
            last[i] = last[i].max(e.cost);
        }
    }
    Verdict {
        id: 3,
        name: "per-node cost monotonicity",
        pass: violations == 0,
        detail: format!("{violations} decreases over {events} events in {} traces", runs.len()),
    }
}

fn certificates_effect(single: &[RunOutput], many: &[RunOutput]) -> Verdict {
    let m1 = median(single.iter().map(|r| r.report.transmissions).collect());
    let m10 = median(many.iter().map(|r| r.report.transmissions).collect());
    Verdict {
        id: 4,
        name: "more certificates, fewer transmissions",
        pass: m10 < m1,
        detail: format!("median transmissions r=1 {m1:.2}, r=10 {m10:.2}"),
    }
}

fn bounds_suite() -> Verdict {
    let mut problems = Vec::new();
    let m = sample_size_for(1, 0.01, 1e-10);
    if m != 2520 {
        problems.push(format!("sample size {m} != 2520"));
    }
    for (eps, delta, expected) in SCENARIO_GRID {
        for (h, want) in GRID_HELLY.into_iter().zip(expected) {
            let got = scenario_bound(eps, delta, h).expect("scenario bound");
            if got != want {
                problems.push(format!("scenario({eps}, {delta}, {h}) = {got}, expected {want}"));
            }
            if !(scenario_tail(got, eps, h) <= delta && scenario_tail(got - 1, eps, h) > delta) {
                problems.push(format!("scenario({eps}, {delta}, {h}) = {got} is not minimal"));
            }
            let alamo = alamo_bound(eps, delta, h).expect("alamo bound");
            if alamo < got {
                problems.push(format!("alamo({eps}, {delta}, {h}) = {alamo} < {got}"));
            }
        }
    }
    let threshold = verification_counter_threshold(1e-10, 16).expect("threshold");
    let rel = (threshold - THRESHOLD_REFERENCE).abs() / THRESHOLD_REFERENCE;
    if rel > THRESHOLD_TOL {
        problems.push(format!("threshold {threshold:.4e} off by {:.1}%", 100.0 * rel));
    }
    Verdict {
        id: 5,
        name: "sample-size bounds",
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("M_1 = {m}, 12 grid points minimal, threshold {threshold:.4e}")
        } else {
            problems.join("; ")
        },
    }
}

fn scenario_freeze() -> Verdict {
    let mut inst = generate_random_milp(&MilpInstanceSpec {
        n: 5,
        constraints_per_node: 10,
        integer_dims: 1,
        real_dims: 1,
        radius: 0.2,
        degree: 2,
        diameter: None,
        seed: 3,
        ..MilpInstanceSpec::default()
    })
    .expect("instance generation");
    for node in &mut inst.nodes {
        node.delta = 0.5;
    }
    let config = RunConfig {
        scenario: ScenarioMode::Oracle,
        scenario_helly: Some(2),
        posterior_samples: 0,
        ..RunConfig::default()
    };
    let out = run_instance(&inst, &config).expect("run");
    let frozen = out.outcome.nodes.iter().all(|n| n.is_frozen());
    let oracle = centralized_oracle(
        frozen_constraints(&out.outcome.nodes).expect("frozen rows"),
        &inst.objective,
        inst.space().expect("space"),
        &inst.solver,
    )
    .expect("oracle solve");
    let matches = out.outcome.costs.iter().all(|&c| close(c, oracle.cost));
    Verdict {
        id: 6,
        name: "scenario freeze end to end",
        pass: out.outcome.halted() && frozen && matches,
        detail: format!(
            "halted {} after {} rounds, all frozen {frozen}, cost {} vs frozen oracle {}",
            out.outcome.halted(),
            out.outcome.stats.rounds,
            out.outcome.costs[0],
            oracle.cost
        ),
    }
}

fn solver_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut failures = Vec::new();
    for i in 0..SOLVER_INSTANCES {
        let system = common::random_system(&mut rng, i % 2 == 1);
        if let Err(e) = common::check_against_oracle(&system) {
            failures.push(format!("instance {i}: {e}"));
        }
    }
    Verdict {
        id: 7,
        name: "solver against enumeration",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{SOLVER_INSTANCES}/{SOLVER_INSTANCES} instances agree")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    }
}

fn localization() -> Verdict {
    let mut problems = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..LOCALIZATION_SEEDS {
        let spec = LocalizationSpec {
            seed,
            ..LocalizationSpec::default()
        };
        let out = run_localization(&spec, &RunConfig::default()).expect("run");
        let v = out.violations.iter().copied().fold(0.0, f64::max);
        worst = worst.max(v);
        if !out.all_halted() || !out.contains_truth(1e-9) || v > spec.eps {
            problems.push(format!(
                "seed {seed}: halted {} contains {} violation {v}",
                out.all_halted(),
                out.contains_truth(1e-9)
            ));
        }
    }
    Verdict {
        id: 8,
        name: "localization bounding box",
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{LOCALIZATION_SEEDS}/{LOCALIZATION_SEEDS} boxes contain the target, worst violation {worst:.2e}")
        } else {
            problems.join("; ")
        },
    }
}

fn determinism(oracle_runs: &[RunOutput], table_runs: &[RunOutput]) -> Verdict {
    let mut mismatches = Vec::new();
    let rerun = RunConfig {
        posterior_samples: 0,
        execution: Execution::Sequential,
        order: NodeOrder::Shuffled,
        ..RunConfig::default()
    };
    for (seed, first) in oracle_runs.iter().enumerate() {
        let again = run_instance(&oracle_instance(seed as u64), &rerun).expect("run");
        if csv(&first.outcome.trace) != csv(&again.outcome.trace) {
            mismatches.push(format!("oracle seed {seed}"));
        }
    }
    for (seed, first) in table_runs.iter().enumerate().take(3) {
        let again = run_instance(&table_instance(seed as u64), &rerun).expect("run");
        if csv(&first.outcome.trace) != csv(&again.outcome.trace) {
            mismatches.push(format!("robust seed {seed}"));
        }
    }
    Verdict {
        id: 9,
        name: "bit-identical reruns",
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} traces reproduced sequentially in shuffled order", oracle_runs.len() + 3)
        } else {
            format!("mismatch: {}", mismatches.join(", "))
        },
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut verdicts = Vec::new();
    let mut oracle_runs = Vec::new();
    verdicts.push(oracle_equivalence(&mut oracle_runs));
    let single = table_row(1, Execution::Parallel);
    verdicts.push(violation_check(&single));
    let traces: Vec<&RunOutput> = oracle_runs.iter().chain(&single).collect();
    verdicts.push(monotonicity(&traces));
    let many = table_row(10, Execution::Parallel);
    verdicts.push(certificates_effect(&single, &many));
    verdicts.push(bounds_suite());
    verdicts.push(scenario_freeze());
    verdicts.push(solver_suite());
    verdicts.push(localization());
    verdicts.push(determinism(&oracle_runs, &single));

    verdicts.sort_by_key(|v| v.id);
    for v in &verdicts {
        println!(
            "criterion {}: {} ({}): {}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        verdicts.len() - failed,
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
