//! Repeated, seeded comparison of ADF-GA, classic-fitness GA and random
//! testing over a corpus, plus epsilon sweeps.
//!
//! Repetition `r` of every approach uses seed `seed_base + r`. The random
//! baseline gets exactly as many executions as the ADF-GA run with the same
//! seed. "Iterations" are GA generations; for random testing one iteration
//! is one batch of `population_size` inputs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::frontend::ParseOptions;
use crate::ga::{
    evolve, random_baseline, Approach, BaselineConfig, FitnessMode, GaConfig, GaError, RunReport,
};
use crate::program::{LoadError, Program};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub reps: usize,
    pub seed_base: u64,
    /// Template for every GA run; `fitness_mode` and `rng_seed` are overridden.
    pub ga: GaConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            reps: 20,
            seed_base: 0,
            ga: GaConfig::default(),
        }
    }
}

impl BenchConfig {
    fn ga_config(&self, mode: FitnessMode, epsilon: f64, rep: usize) -> GaConfig {
        GaConfig {
            fitness_mode: mode,
            epsilon,
            rng_seed: self.seed_base + rep as u64,
            ..self.ga.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot read corpus directory {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{program}")]
    Run { program: String, source: GaError },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid sweep `{0}`: expected start:end:step with step > 0 and start <= end")]
    Sweep(String),
}

/// Loaded programs and the files that failed to load.
pub type Corpus = (Vec<Program>, Vec<(PathBuf, LoadError)>);

/// Corpus programs (`*.sol`, sorted by file name) with the first function of
/// the first contract as entry. Files that fail to load are returned
/// separately.
pub fn load_corpus(dir: &Path, options: ParseOptions) -> Result<Corpus, BenchError> {
    let io = |source| BenchError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sol"))
        .collect();
    paths.sort();
    let mut programs = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        match Program::from_path(&path, None, options) {
            Ok(mut p) => {
                p.name = path.file_stem().unwrap().to_string_lossy().into_owned();
                programs.push(p);
            }
            Err(e) => failures.push((path, e)),
        }
    }
    Ok((programs, failures))
}

/// At least two require statements reachable from the entry function.
pub fn is_require_heavy(program: &Program) -> bool {
    program.reachable_requires().len() >= 2
}

/// Final outcome of one approach on one program for one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub program: String,
    pub approach: Approach,
    pub rep: usize,
    pub seed: u64,
    pub total_generations: usize,
    pub first_best_generation: usize,
    pub executions: usize,
    pub covered_n: usize,
    pub n_total: usize,
    pub covered_m: usize,
    pub m_total: usize,
    pub n_coverage: f64,
    pub m_coverage: f64,
    /// First generation whose suite matched the classic GA's final suite coverage.
    pub generations_to_match_classic_best: Option<usize>,
}

fn outcome(
    program: &str,
    rep: usize,
    seed: u64,
    r: &RunReport,
    matched: Option<usize>,
) -> RepOutcome {
    RepOutcome {
        program: program.to_string(),
        approach: r.approach,
        rep,
        seed,
        total_generations: r.total_generations,
        first_best_generation: r.first_best_generation,
        executions: r.executions,
        covered_n: r.covered_n,
        n_total: r.n_total,
        covered_m: r.covered_m,
        m_total: r.m_total,
        n_coverage: r.n_ratio(),
        m_coverage: r.m_ratio(),
        generations_to_match_classic_best: matched,
    }
}

/// The three reports for one seed.
#[derive(Debug, Clone)]
pub struct RepReports {
    pub rep: usize,
    pub seed: u64,
    pub adfga: RunReport,
    pub classic: RunReport,
    pub random: RunReport,
}

pub fn run_rep(program: &Program, cfg: &BenchConfig, rep: usize) -> Result<RepReports, GaError> {
    let seed = cfg.seed_base + rep as u64;
    let adfga = evolve(
        program,
        &cfg.ga_config(FitnessMode::Adfga, cfg.ga.epsilon, rep),
    )?;
    let classic = evolve(
        program,
        &cfg.ga_config(FitnessMode::Classic, cfg.ga.epsilon, rep),
    )?;
    let baseline = BaselineConfig {
        budget: adfga.executions,
        batch_size: cfg.ga.population_size,
        dedup: false,
        epsilon: cfg.ga.epsilon,
        rng_seed: seed,
    };
    let random = random_baseline(program, &baseline)?;
    Ok(RepReports {
        rep,
        seed,
        adfga,
        classic,
        random,
    })
}

/// Runs every approach `cfg.reps` times on `program`.
pub fn compare(program: &Program, cfg: &BenchConfig) -> Result<Vec<RepOutcome>, BenchError> {
    let reps: Vec<RepReports> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_rep(program, cfg, rep))
        .collect::<Result<_, _>>()
        .map_err(|source| BenchError::Run {
            program: program.name.clone(),
            source,
        })?;
    let mut out = Vec::with_capacity(reps.len() * 3);
    for r in &reps {
        let target = r.classic.covered_n;
        out.push(outcome(
            &program.name,
            r.rep,
            r.seed,
            &r.adfga,
            r.adfga.generation_reaching(target),
        ));
        out.push(outcome(
            &program.name,
            r.rep,
            r.seed,
            &r.classic,
            r.classic.generation_reaching(target),
        ));
        out.push(outcome(&program.name, r.rep, r.seed, &r.random, None));
    }
    out.sort_by(|a, b| (&a.program, a.approach, a.rep).cmp(&(&b.program, b.approach, b.rep)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub program: String,
    pub approach: Approach,
    pub repetitions: usize,
    pub mean_total_generations: f64,
    pub mean_first_best_generation: f64,
    pub mean_n_coverage: f64,
    pub mean_m_coverage: f64,
    /// Mean over the repetitions that reached the classic GA's coverage; empty if none did.
    pub generations_to_match_classic_best: Option<f64>,
    pub mean_executions: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per (program, approach) means, in the order of first appearance.
pub fn aggregate(outcomes: &[RepOutcome]) -> Vec<BenchResult> {
    let mut keys: Vec<(String, Approach)> = Vec::new();
    for o in outcomes {
        let k = (o.program.clone(), o.approach);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(program, approach)| {
            let rows: Vec<&RepOutcome> = outcomes
                .iter()
                .filter(|o| o.program == program && o.approach == approach)
                .collect();
            let matched: Vec<f64> = rows
                .iter()
                .filter_map(|o| o.generations_to_match_classic_best.map(|g| g as f64))
                .collect();
            BenchResult {
                program,
                approach,
                repetitions: rows.len(),
                mean_total_generations: mean(rows.iter().map(|o| o.total_generations as f64)),
                mean_first_best_generation: mean(
                    rows.iter().map(|o| o.first_best_generation as f64),
                ),
                mean_n_coverage: mean(rows.iter().map(|o| o.n_coverage)),
                mean_m_coverage: mean(rows.iter().map(|o| o.m_coverage)),
                generations_to_match_classic_best: (!matched.is_empty())
                    .then(|| mean(matched.into_iter())),
                mean_executions: mean(rows.iter().map(|o| o.executions as f64)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub program: String,
    pub epsilon: f64,
    pub repetitions: usize,
    pub mean_n_coverage: f64,
    pub mean_m_coverage: f64,
    /// Mean of the two coverage ratios.
    pub mean_combined: f64,
}

/// `start:end:step`, inclusive of `end` up to rounding.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>, BenchError> {
    let bad = || BenchError::Sweep(text.to_string());
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start <= end && start.is_finite() && end.is_finite()) {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// ADF-GA coverage per epsilon; every epsilon shares the seeds and hence the
/// initial populations.
pub fn epsilon_sweep(
    program: &Program,
    epsilons: &[f64],
    cfg: &BenchConfig,
) -> Result<Vec<SweepRow>, BenchError> {
    let cells: Vec<(usize, usize)> = (0..epsilons.len())
        .flat_map(|e| (0..cfg.reps).map(move |r| (e, r)))
        .collect();
    let reports: Vec<RunReport> = cells
        .par_iter()
        .map(|&(e, rep)| {
            evolve(
                program,
                &cfg.ga_config(FitnessMode::Adfga, epsilons[e], rep),
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|source| BenchError::Run {
            program: program.name.clone(),
            source,
        })?;
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let rs: Vec<&RunReport> = cells
                .iter()
                .zip(&reports)
                .filter(|((ce, _), _)| *ce == e)
                .map(|(_, r)| r)
                .collect();
            let n = mean(rs.iter().map(|r| r.n_ratio()));
            let m = mean(rs.iter().map(|r| r.m_ratio()));
            SweepRow {
                program: program.name.clone(),
                epsilon,
                repetitions: rs.len(),
                mean_n_coverage: n,
                mean_m_coverage: m,
                mean_combined: (n + m) / 2.0,
            }
        })
        .collect())
}

/// Epsilons attaining the maximum `mean_combined` among `rows`.
pub fn best_epsilons(rows: &[SweepRow]) -> Vec<f64> {
    let best = rows
        .iter()
        .map(|r| r.mean_combined)
        .fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .filter(|r| best - r.mean_combined <= 1e-12)
        .map(|r| r.epsilon)
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| BenchError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
