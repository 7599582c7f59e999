use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rcc::experiments::{
    batch, convergence_series, generate_localization, generate_random_milp, posterior_violation, run_instance,
    run_localization, summarize, write_report_csv, write_series_svg, write_summary_csv, Instance, LocalizationSpec,
    MilpInstanceSpec, RunConfig,
};
use rcc::geometry::helly_number;
use rcc::network::{write_trace_csv, HaltMode, NodeOrder, ScenarioMode};
use rcc::uncertainty::{alamo_bound, sample_size_for, scenario_bound, verification_counter_threshold};
use rcc::Execution;

/// Randomized constraints consensus for distributed robust MILPs.
#[derive(Parser)]
#[command(name = "rcc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    #[command(subcommand)]
    Generate(Generate),
    /// Simulate one instance and write its trace and report.
    Run(RunArgs),
    /// Run the four bounding-box faces of a localization scene.
    Localize(LocalizeArgs),
    /// Print the sample-size bounds for one setting.
    Bounds(BoundsArgs),
    /// Empirical violation of a point on an instance.
    Posterior(PosteriorArgs),
    /// Run random MILP instances over a range of seeds and summarize them.
    Batch(BatchArgs),
}

#[derive(Subcommand)]
enum Generate {
    /// Random Gaussian MILP with interval uncertainty.
    Milp {
        #[command(flatten)]
        spec: MilpArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sensor network localization for a single face.
    Localization {
        #[command(flatten)]
        spec: LocalizationArgs,
        #[arg(long, value_enum, default_value_t = FaceArg::XLower)]
        face: FaceArg,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args, Clone)]
struct MilpArgs {
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 100)]
    constraints: usize,
    #[arg(long, default_value_t = 2)]
    integer_dims: usize,
    #[arg(long, default_value_t = 3)]
    real_dims: usize,
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
    #[arg(long, default_value_t = 20.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    delta: f64,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Target graph diameter; 0 accepts any connected graph.
    #[arg(long, default_value_t = 4)]
    diameter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MilpArgs {
    fn spec(&self, seed: u64) -> MilpInstanceSpec {
        MilpInstanceSpec {
            n: self.nodes,
            constraints_per_node: self.constraints,
            integer_dims: self.integer_dims,
            real_dims: self.real_dims,
            radius: self.radius,
            gamma: self.gamma,
            eps: self.eps,
            delta: self.delta,
            degree: self.degree,
            diameter: (self.diameter > 0).then_some(self.diameter),
            seed,
        }
    }
}

#[derive(Args, Clone)]
struct LocalizationArgs {
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 10.0)]
    area: f64,
    #[arg(long, default_value_t = 7.0)]
    range: f64,
    #[arg(long, default_value_t = 20.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    laser_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 16)]
    sides: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LocalizationArgs {
    fn spec(&self) -> LocalizationSpec {
        LocalizationSpec {
            area: self.area,
            n: self.nodes,
            range: self.range,
            alpha_deg: self.alpha,
            laser_fraction: self.laser_fraction,
            rho: self.rho,
            polygon_sides: self.sides,
            eps: self.eps,
            delta: self.delta,
            seed: self.seed,
            ..LocalizationSpec::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaceArg {
    XLower,
    XUpper,
    YLower,
    YUpper,
}

#[derive(Clone, Copy, ValueEnum)]
enum HaltArg {
    Path,
    Diameter,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Off,
    Piggyback,
    Oracle,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Violation certificates per verification.
    #[arg(short = 'r', long, default_value_t = 1)]
    certificates: usize,
    #[arg(long, value_enum, default_value_t = HaltArg::Path)]
    halt: HaltArg,
    #[arg(long, value_enum, default_value_t = ScenarioArg::Off)]
    scenario: ScenarioArg,
    /// Helly number used for the scenario bound instead of the space's.
    #[arg(long)]
    scenario_helly: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    max_rounds: usize,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
    /// Process nodes in a fresh seeded order every round.
    #[arg(long)]
    shuffled: bool,
    /// Run even if the schedule is not jointly strongly connected.
    #[arg(long)]
    force: bool,
    /// A-posteriori samples for the empirical violation; 0 skips it.
    #[arg(long, default_value_t = 10_000)]
    posterior_samples: usize,
}

impl SimArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            certificates: self.certificates,
            halt_mode: match self.halt {
                HaltArg::Path => HaltMode::Path,
                HaltArg::Diameter => HaltMode::Diameter,
            },
            scenario: match self.scenario {
                ScenarioArg::Off => ScenarioMode::Off,
                ScenarioArg::Piggyback => ScenarioMode::Piggyback,
                ScenarioArg::Oracle => ScenarioMode::Oracle,
            },
            scenario_helly: self.scenario_helly,
            max_rounds: self.max_rounds,
            execution: execution(self.sequential),
            order: if self.shuffled {
                NodeOrder::Shuffled
            } else {
                NodeOrder::Ascending
            },
            force: self.force,
            posterior_samples: self.posterior_samples,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON written by `generate`.
    instance: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    #[arg(long, default_value = "report.csv")]
    report: PathBuf,
    /// Also plot the convergence of cost and solution.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    spec: LocalizationArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 1e-10)]
    delta: f64,
    /// Helly number; defaults to the value for the given dimensions.
    #[arg(long)]
    helly: Option<u64>,
    #[arg(long, default_value_t = 2)]
    integer_dims: usize,
    #[arg(long, default_value_t = 3)]
    real_dims: usize,
    /// Verification counter for the multi-sample size.
    #[arg(long, default_value_t = 1)]
    counter: u64,
}

#[derive(Args)]
struct PosteriorArgs {
    instance: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    spec: MilpArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Number of consecutive seeds, starting at `--seed`.
    #[arg(long, default_value_t = 20)]
    runs: u64,
    #[arg(long, default_value = "batch.csv")]
    report: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn generate(command: Generate) -> Result<()> {
    let (instance, output) = match command {
        Generate::Milp { spec, output } => (generate_random_milp(&spec.spec(spec.seed))?, output),
        Generate::Localization { spec, face, output } => {
            let face = match face {
                FaceArg::XLower => rcc::experiments::Face::XLower,
                FaceArg::XUpper => rcc::experiments::Face::XUpper,
                FaceArg::YLower => rcc::experiments::Face::YLower,
                FaceArg::YUpper => rcc::experiments::Face::YUpper,
            };
            let spec = LocalizationSpec { face, ..spec.spec() };
            (generate_localization(&spec)?, output)
        }
    };
    instance.save(&output)?;
    info!("wrote {} nodes to {}", instance.nodes.len(), output.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let instance = Instance::load(&args.instance)?;
    let output = run_instance(&instance, &args.sim.config())?;
    let mut trace = create(&args.trace)?;
    write_trace_csv(&output.outcome.trace, &mut trace)?;
    trace.flush()?;
    let mut report = create(&args.report)?;
    write_report_csv(std::slice::from_ref(&output.report), &mut report)?;
    report.flush()?;
    if let Some(path) = &args.svg {
        let series = convergence_series(
            &output.outcome.trace,
            instance.nodes.len(),
            output.outcome.costs[0],
            output.solution().coords(),
        );
        let mut svg = create(path)?;
        write_series_svg(&series, "convergence", &mut svg)?;
        svg.flush()?;
    }
    let r = &output.report;
    println!(
        "halted {} after {} rounds, cost {}, transmissions {:.2}, verifications {:.2}, violation {}",
        r.halted,
        r.rounds,
        r.cost,
        r.transmissions,
        r.verifications,
        r.violation.map_or("n/a".into(), |v| format!("{v:.3e}"))
    );
    println!("solution {:?}", output.solution().coords());
    Ok(())
}

fn localize(args: LocalizeArgs) -> Result<()> {
    let outcome = run_localization(&args.spec.spec(), &args.sim.config())?;
    let [xl, xu, yl, yu] = outcome.bounds;
    println!("box x in [{xl:.4}, {xu:.4}], y in [{yl:.4}, {yu:.4}]");
    println!("truth {:?}, inside {}", outcome.truth, outcome.contains_truth(1e-9));
    for (face, v) in outcome.faces.iter().zip(&outcome.violations) {
        println!(
            "{:?}: halted {}, transmissions {:.2}, violation {v:.3e}",
            face.face,
            face.output.outcome.halted(),
            face.output.report.transmissions
        );
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let h = match args.helly {
        Some(h) => h,
        None => helly_number(args.integer_dims, args.real_dims)?,
    };
    println!("helly number {h}");
    println!("multi-sample size M_{} = {}", args.counter, sample_size_for(args.counter, args.eps, args.delta));
    println!("scenario bound {}", scenario_bound(args.eps, args.delta, h)?);
    println!("analytic bound {}", alamo_bound(args.eps, args.delta, h)?);
    println!("counter threshold {:.4e}", verification_counter_threshold(args.delta, h)?);
    Ok(())
}

fn posterior(args: PosteriorArgs) -> Result<()> {
    let instance = Instance::load(&args.instance)?;
    let dim = instance.integer_dims + instance.real_dims;
    if args.point.len() != dim {
        bail!("point has {} coordinates, instance needs {dim}", args.point.len());
    }
    let v = posterior_violation(
        &args.point,
        &instance.sets(),
        args.samples,
        args.seed,
        execution(args.sequential),
    );
    println!("{v}");
    Ok(())
}

fn run_batch(args: BatchArgs) -> Result<()> {
    let seeds: Vec<u64> = (args.spec.seed..args.spec.seed + args.runs).collect();
    let spec = args.spec.clone();
    let reports = batch(&seeds, |seed| generate_random_milp(&spec.spec(seed)), &args.sim.config())?;
    let mut out = create(&args.report)?;
    write_report_csv(&reports, &mut out)?;
    out.flush()?;
    let s = summarize(&reports);
    if let Some(path) = &args.summary {
        let mut out = create(path)?;
        write_summary_csv(&[(format!("r={}", args.sim.certificates), s.clone())], &mut out)?;
        out.flush()?;
    }
    println!(
        "{} runs, {} halted, transmissions {:.2}, verifications {:.2}, violation {}",
        s.runs,
        s.halted,
        s.transmissions,
        s.verifications,
        s.violation.map_or("n/a".into(), |v| format!("{v:.3e}"))
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate(g) => generate(g),
        Command::Run(a) => run(a),
        Command::Localize(a) => localize(a),
        Command::Bounds(a) => bounds(a),
        Command::Posterior(a) => posterior(a),
        Command::Batch(a) => run_batch(a),
    }
}
