use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dfgen_core::cfg::cfg_to_dot;
use dfgen_core::experiment::{self, BenchConfig};
use dfgen_core::frontend::ParseOptions;
use dfgen_core::ga::{self, BaselineConfig, FitnessScope, GaConfig};
use dfgen_core::interp::ExecOptions;
use dfgen_core::{FitnessMode, LoadError, Program, RunReport};
use serde_json::json;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "dfgen",
    version,
    about = "All-uses data-flow test generation for Solidity-subset contracts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print variables, require sites and def-use pairs as JSON.
    Analyze(AnalyzeArgs),
    /// Search for inputs covering the def-use pairs of one function.
    Generate(GenerateArgs),
    /// Compare ADF-GA, classic GA and random testing over a corpus directory.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Contract source file.
    path: PathBuf,
    /// Accept integer widths that are not multiples of 8 (uint1 .. uint256).
    #[arg(long)]
    narrow_widths: bool,
}

impl SourceArgs {
    fn options(&self) -> ParseOptions {
        ParseOptions {
            allow_narrow_widths: self.narrow_widths,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Restrict pairs to this function and its callees.
    #[arg(long)]
    function: Option<String>,
    /// Write the control-flow graph in DOT format.
    #[arg(long, value_name = "PATH")]
    emit_cfg: Option<PathBuf>,
    /// Write JSON here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fitness {
    Adfga,
    Classic,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Individual,
    Suite,
}

impl From<Scope> for FitnessScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Individual => FitnessScope::Individual,
            Scope::Suite => FitnessScope::Suite,
        }
    }
}

#[derive(Args, Clone)]
struct GaArgs {
    #[arg(long, default_value_t = 0.45)]
    epsilon: f64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(2..))]
    pop: u32,
    #[arg(long, default_value_t = 0.01)]
    pm: f64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    max_gen: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    stall: u32,
    /// Measure fitness on the individual alone or on the archive suite plus the individual.
    #[arg(long, value_enum, default_value_t = Scope::Individual)]
    fitness_scope: Scope,
}

impl GaArgs {
    fn config(&self, mode: FitnessMode, seed: u64) -> GaConfig {
        GaConfig {
            epsilon: self.epsilon,
            population_size: self.pop as usize,
            mutation_prob: self.pm,
            max_generations: self.max_gen as usize,
            stall_window: self.stall as usize,
            fitness_mode: mode,
            fitness_scope: self.fitness_scope.into(),
            rng_seed: seed,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Entry function; defaults to the first function of the first contract.
    #[arg(long)]
    function: Option<String>,
    #[command(flatten)]
    ga: GaArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Fitness::Adfga)]
    fitness: Fitness,
    /// Executions for `--fitness random`; defaults to pop * max-gen.
    #[arg(long)]
    budget: Option<usize>,
    /// Write the run report JSON here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write one JSON line per suite case with the executed node sequence.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of `.sol` files.
    corpus: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Also sweep epsilon over start:end:step with ADF-GA.
    #[arg(long, value_name = "A:B:STEP")]
    epsilon_sweep: Option<String>,
    /// Only bench programs with at least two reachable require statements.
    #[arg(long)]
    require_heavy: bool,
    #[arg(long)]
    narrow_widths: bool,
    #[command(flatten)]
    ga: GaArgs,
    /// Output directory for bench.csv, runs.csv and sweep.csv.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    out: PathBuf,
}

/// Failure carrying its process exit code.
struct Exit(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        Exit(1, e.into())
    }
}

fn load_exit(e: LoadError) -> Exit {
    let code = match &e {
        LoadError::Io { .. } | LoadError::Frontend { .. } | LoadError::NoFunctions => 1,
        LoadError::Cfg(_) | LoadError::Analysis(_) => 2,
        LoadError::UnknownFunction(_) => 3,
    };
    Exit(code, e.into())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), Exit> {
    let program = Program::from_path(
        &args.source.path,
        args.function.as_deref(),
        args.source.options(),
    )
    .map_err(load_exit)?;
    let dups = if args.function.is_some() {
        &program.dups
    } else {
        &program.all_dups
    };
    if let Some(p) = &args.emit_cfg {
        fs::write(p, cfg_to_dot(&program.cfg))
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "program": program.name,
        "function": args.function,
        "variables": program.variables,
        "requires": program.requires,
        "n": dups.n(),
        "m": dups.m(),
        "dups": dups.pairs,
    });
    write_output(
        args.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&doc)?),
    )?;
    Ok(())
}

fn write_trace(path: &Path, program: &Program, report: &RunReport) -> Result<()> {
    let sig = program.signature();
    let mut lines = String::new();
    for case in &report.suite {
        let tc = ga::decode(&case.chromosome, &sig)?;
        let rec = program.executor.execute(
            &program.entry,
            &tc,
            ExecOptions {
                record_trace: true,
                ..Default::default()
            },
        )?;
        let line = json!({
            "inputs": case.inputs,
            "terminated_by": rec.terminated_by,
            "nodes": rec.executed_nodes,
        });
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
    }
    fs::write(path, lines).with_context(|| format!("cannot write {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<(), Exit> {
    let program = Program::from_path(
        &args.source.path,
        args.function.as_deref(),
        args.source.options(),
    )
    .map_err(load_exit)?;
    let report = match args.fitness {
        Fitness::Adfga => ga::evolve(&program, &args.ga.config(FitnessMode::Adfga, args.seed)),
        Fitness::Classic => ga::evolve(&program, &args.ga.config(FitnessMode::Classic, args.seed)),
        Fitness::Random => ga::random_baseline(
            &program,
            &BaselineConfig {
                budget: args
                    .budget
                    .unwrap_or(args.ga.pop as usize * args.ga.max_gen as usize),
                batch_size: args.ga.pop as usize,
                dedup: false,
                epsilon: args.ga.epsilon,
                rng_seed: args.seed,
            },
        ),
    }
    .map_err(|e| Exit(2, e.into()))?;
    write_output(
        args.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )?;
    if let Some(p) = &args.trace {
        write_trace(p, &program, &report)?;
    }
    eprintln!("{}", report.summary());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Exit> {
    let options = ParseOptions {
        allow_narrow_widths: args.narrow_widths,
    };
    let (mut programs, failures) = experiment::load_corpus(&args.corpus, options)?;
    for (path, err) in &failures {
        log::warn!("skipping {}: {err}", path.display());
    }
    if args.require_heavy {
        programs.retain(experiment::is_require_heavy);
    }
    if programs.is_empty() {
        return Err(Exit(
            1,
            anyhow::anyhow!("no benchable programs in {}", args.corpus.display()),
        ));
    }
    let epsilons = args
        .epsilon_sweep
        .as_deref()
        .map(experiment::parse_sweep)
        .transpose()?;
    let cfg = BenchConfig {
        reps: args.reps as usize,
        seed_base: args.seed_base,
        ga: args.ga.config(FitnessMode::Adfga, args.seed_base),
    };
    cfg.ga.validate()?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut outcomes = Vec::new();
    let mut sweep = Vec::new();
    for p in &programs {
        log::info!("benching {}", p.name);
        outcomes.extend(experiment::compare(p, &cfg)?);
        if let Some(eps) = &epsilons {
            sweep.extend(experiment::epsilon_sweep(p, eps, &cfg)?);
        }
    }
    let results = experiment::aggregate(&outcomes);
    fs::write(args.out.join("bench.csv"), experiment::to_csv(&results)?)?;
    fs::write(args.out.join("runs.csv"), experiment::to_csv(&outcomes)?)?;
    if epsilons.is_some() {
        fs::write(args.out.join("sweep.csv"), experiment::to_csv(&sweep)?)?;
    }
    let mut out = std::io::stdout().lock();
    for r in &results {
        writeln!(
            out,
            "{:<20} {:<10} N_dup {:>6.2}%  R_dup {:>6.2}%  generations {:>6.2}  first best {:>6.2}",
            r.program,
            r.approach.label(),
            100.0 * r.mean_n_coverage,
            100.0 * r.mean_m_coverage,
            r.mean_total_generations,
            r.mean_first_best_generation
        )
        .map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Generate(a) => generate(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
