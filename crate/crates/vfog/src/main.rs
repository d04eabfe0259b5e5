use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vfog::compare::{self, Comparison};
use vfog::config::{load_scenario, ConfigError};
use vfog::experiment::{self, ExperimentError, ExperimentSpec, Range, SweepAxis};
use vfog::io;
use vfog_core::flow::Approach;
use vfog_core::pipeline::{run_with, RunOptions};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "vfog",
    version,
    about = "Robust content dissemination over vehicular fog networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for each approach and sweep point; writes results.csv
    /// and one SVG chart per metric.
    Run(RunArgs),
    /// Load and check a scenario file without solving anything.
    ValidateConfig {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Solve one configuration and dump the graph, conflicts, pair powers and
    /// flow solution as CSV.
    DumpGraph(DumpArgs),
    /// Compare the fast solvers against brute-force references.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cases per comparison (the flow grid uses a fifth of these).
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Use path loss only, without shadowing or fading.
    #[arg(long)]
    deterministic_channel: bool,
    /// Fresh channel draws per pair for the outage estimate.
    #[arg(long, default_value_t = RunOptions::default().outage_trials)]
    outage_trials: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated approaches, or `all`.
    #[arg(long, default_value = "all")]
    approach: String,
    #[arg(long, default_value = "none")]
    sweep: String,
    /// `lo:hi:step`, required unless the sweep is `none`.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "Robust")]
    approach: String,
}

enum Failure {
    Config(String),
    Solver(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Other(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Spec(_) | ExperimentError::Config(_) => Failure::Config(e.to_string()),
            ExperimentError::Solver { .. } => Failure::Solver(e.to_string()),
            ExperimentError::Output { .. } | ExperimentError::Csv(_) => Failure::Other(e.to_string()),
        }
    }
}

fn parse_approaches(list: &str) -> Result<Vec<Approach>, Failure> {
    if list.eq_ignore_ascii_case("all") {
        return Ok(Approach::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let a = Approach::parse(name).ok_or_else(|| Failure::Config(format!("unknown approach {name:?}")))?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        outage_trials: c.outage_trials,
        ..RunOptions::default()
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let sweep =
        SweepAxis::parse(&args.sweep).ok_or_else(|| Failure::Config(format!("unknown sweep {:?}", args.sweep)))?;
    let range = args
        .range
        .as_deref()
        .map(Range::parse)
        .transpose()
        .map_err(Failure::Config)?;
    let spec = ExperimentSpec {
        scenario: args.common.scenario.clone(),
        approaches: parse_approaches(&args.approach)?,
        sweep,
        range,
        seed: args.common.seed,
        out_dir: args.common.out.clone(),
        deterministic_channel: args.common.deterministic_channel,
        options: options(&args.common),
    };
    let rows = experiment::run(&spec)?;
    println!(
        "{} rows written to {}",
        rows.len(),
        spec.out_dir.join("results.csv").display()
    );
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Other(format!("writing {}: {e}", path.display())))
}

fn dump_graph(args: DumpArgs) -> Result<(), Failure> {
    let approach = Approach::parse(&args.approach)
        .ok_or_else(|| Failure::Config(format!("unknown approach {:?}", args.approach)))?;
    let c = &args.common;
    let mut scenario = load_scenario(&c.scenario)?;
    if let Some(seed) = c.seed {
        scenario.seed = seed;
    }
    scenario.channel.deterministic |= c.deterministic_channel;
    let result = run_with(&scenario, approach, &options(c)).map_err(|e| Failure::Solver(e.to_string()))?;
    fs::create_dir_all(&c.out).map_err(|e| Failure::Other(format!("creating {}: {e}", c.out.display())))?;
    let io_err = |e: io::IoError| Failure::Other(e.to_string());
    io::write_graph(
        create(&c.out.join("graph.csv"))?,
        &result.trrg,
        Some(&result.capacities),
    )
    .map_err(io_err)?;
    io::write_conflicts(create(&c.out.join("conflicts.csv"))?, &result.conflict_graphs).map_err(io_err)?;
    io::write_pairs(create(&c.out.join("pairs.csv"))?, &result).map_err(io_err)?;
    io::write_solution(
        create(&c.out.join("solution.csv"))?,
        &result.trrg,
        &result.capacities,
        &result.solution,
    )
    .map_err(io_err)?;
    println!(
        "{} frames, {} arcs, {} pairs; throughput {:.6e} bits, objective {:.9}",
        result.frames.len(),
        result.trrg.arcs().len(),
        result.pairs.len(),
        result.throughput(),
        result.objective()
    );
    Ok(())
}

fn oracle(seed: u64, cases: usize) -> Result<(), Failure> {
    let rows: Vec<Comparison> = vec![
        compare::mwis(seed, cases, 15),
        compare::hungarian(seed.wrapping_add(1), cases, 7),
        compare::pair_grid(seed.wrapping_add(2), cases, 1e-3, 1e-3, 1e-3),
        compare::pair_closed_form(seed.wrapping_add(3), cases, 1e-3),
        compare::flow_grid(seed.wrapping_add(4), cases.div_ceil(5), 1e-3),
    ];
    println!(
        "{:<34} {:>6} {:>10} {:>12} {:>10} {:>9}",
        "comparison", "cases", "mismatches", "worst", "tolerance", "seconds"
    );
    for r in &rows {
        println!(
            "{:<34} {:>6} {:>10} {:>12.3e} {:>10.1e} {:>9.3}",
            r.name, r.cases, r.mismatches, r.worst, r.tolerance, r.seconds
        );
    }
    if rows.iter().all(Comparison::passed) {
        Ok(())
    } else {
        Err(Failure::Solver("some comparisons fell outside tolerance".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::ValidateConfig { scenario } => load_scenario(&scenario).map_err(Failure::from).map(|s| {
            println!(
                "ok: {} vehicles, {} AVs, {} tasks",
                s.vehicles.len(),
                s.avs.len(),
                s.tasks.len()
            )
        }),
        Command::DumpGraph(args) => dump_graph(args),
        Command::Oracle { seed, cases } => oracle(seed, cases),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
