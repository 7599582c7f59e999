use rcc::experiments::{centralized_oracle, generate_random_milp, run_instance, Instance, MilpInstanceSpec, RunConfig};
use rcc::network::{check_ujsc, write_trace_csv, EdgeSchedule, EventKind, NodeOrder, ScheduleMode, TraceEvent};
use rcc::Execution;

fn instance(radius: f64, seed: u64) -> Instance {
    generate_random_milp(&MilpInstanceSpec {
        n: 6,
        constraints_per_node: 20,
        integer_dims: 1,
        real_dims: 2,
        radius,
        degree: 2,
        diameter: None,
        seed,
        ..MilpInstanceSpec::default()
    })
    .unwrap()
}

fn csv(trace: &[TraceEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    write_trace_csv(trace, &mut out).unwrap();
    out
}

fn oracle_cost(inst: &Instance) -> f64 {
    centralized_oracle(inst.nominal_constraints().unwrap(), &inst.objective, inst.space().unwrap(), &inst.solver)
        .unwrap()
        .cost
}

fn quick() -> RunConfig {
    RunConfig {
        posterior_samples: 0,
        ..RunConfig::default()
    }
}

#[test]
fn traces_identical_across_runners_and_orders() {
    let inst = instance(0.2, 5);
    let reference = run_instance(
        &inst,
        &RunConfig {
            execution: Execution::Sequential,
            ..quick()
        },
    )
    .unwrap();
    assert!(reference.outcome.halted());
    for (execution, order) in [
        (Execution::Parallel, NodeOrder::Ascending),
        (Execution::Parallel, NodeOrder::Shuffled),
        (Execution::Sequential, NodeOrder::Shuffled),
    ] {
        let other = run_instance(
            &inst,
            &RunConfig {
                execution,
                order,
                ..quick()
            },
        )
        .unwrap();
        assert_eq!(csv(&reference.outcome.trace), csv(&other.outcome.trace));
        assert_eq!(reference.outcome.solutions, other.outcome.solutions);
    }
}

#[test]
fn trace_invariants_hold() {
    let inst = instance(0.2, 8);
    let out = run_instance(&inst, &quick()).unwrap();
    let n = inst.nodes.len();
    for i in 0..n as u32 {
        let events: Vec<&TraceEvent> = out.outcome.trace.iter().filter(|e| e.node == i).collect();
        assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(events.windows(2).all(|w| w[1].cost >= w[0].cost - 1e-9));
        let tx = events.iter().filter(|e| e.kind == EventKind::Transmit).count() as u64;
        assert_eq!(tx, out.outcome.stats.transmissions[i as usize]);
        assert_eq!(events.last().unwrap().kind, EventKind::Halt);
    }
    assert!(out.report.agreement);
}

#[test]
fn periodic_schedule_reaches_the_oracle() {
    let inst = instance(0.0, 11);
    let edges = inst.schedule.static_edges().unwrap().to_vec();
    let (even, odd): (Vec<_>, Vec<_>) = edges.iter().partition(|(a, b)| a < b);
    let mut periodic = inst.clone();
    periodic.schedule = EdgeSchedule::periodic(6, vec![even, odd]).unwrap();
    assert!(check_ujsc(&periodic.schedule, 2, 100));
    assert!(!check_ujsc(&periodic.schedule, 1, 100));
    let out = run_instance(&periodic, &quick()).unwrap();
    assert!(out.outcome.halted());
    assert_eq!(out.outcome.stats.halt_threshold, 2 * 6 * 2 + 1);
    let target = oracle_cost(&inst);
    for c in &out.outcome.costs {
        assert!((c - target).abs() <= 1e-6 * (1.0 + target.abs()));
    }
}

#[test]
fn lossy_links_still_reach_the_oracle() {
    let inst = instance(0.0, 13);
    let edges = inst.schedule.static_edges().unwrap().to_vec();
    let mut lossy = inst.clone();
    lossy.schedule = EdgeSchedule::random_loss(6, edges, 0.3, 77, 12).unwrap();
    assert!(matches!(lossy.schedule.mode, ScheduleMode::RandomLoss { .. }));
    let cfg = RunConfig {
        max_rounds: 2_000,
        ..quick()
    };
    assert!(check_ujsc(&lossy.schedule, 12, cfg.max_rounds));
    let out = run_instance(&lossy, &cfg).unwrap();
    assert!(out.outcome.halted());
    let target = oracle_cost(&inst);
    for c in &out.outcome.costs {
        assert!((c - target).abs() <= 1e-6 * (1.0 + target.abs()));
    }
}

#[test]
fn instance_file_round_trip_reproduces_the_run() {
    let inst = instance(0.2, 21);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    inst.save(&path).unwrap();
    let loaded = Instance::load(&path).unwrap();
    let a = run_instance(&inst, &quick()).unwrap();
    let b = run_instance(&loaded, &quick()).unwrap();
    assert_eq!(csv(&a.outcome.trace), csv(&b.outcome.trace));
}
