//! Generation loop, random baseline and run reports.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::{decode, random_chromosome, Chromosome, ShapeError};
use super::operators::{
    covered_counts, crossover, fitness_value, mutate, select_indices, DegenerateError,
};
use super::{ConfigError, FitnessMode, FitnessScope, GaConfig};
use crate::coverage::PairSet;
use crate::dataflow::{DefUsePair, DupSets};
use crate::interp::{CoverageRecord, ExecOptions, Termination, TestCase};
use crate::program::Program;
use crate::types::IntType;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "ADF-GA")]
    AdfGa,
    #[serde(rename = "GA-classic")]
    GaClassic,
    #[serde(rename = "RT")]
    Random,
}

impl Approach {
    pub fn label(self) -> &'static str {
        match self {
            Approach::AdfGa => "ADF-GA",
            Approach::GaClassic => "GA-classic",
            Approach::Random => "RT",
        }
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Degenerate(#[from] DegenerateError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("random baseline budget must be at least 1")]
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Pairs covered by the best individual so far.
    pub covered_n: usize,
    pub covered_m: usize,
    pub new_best: bool,
    /// Pairs covered by the archive suite so far.
    pub suite_covered_n: usize,
    pub suite_covered_m: usize,
    /// Executions so far, cumulative.
    pub executions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FullCoverage,
    Stalled,
    MaxGenerations,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub budget: usize,
    /// Executions per reporting step.
    pub batch_size: usize,
    /// Never execute the same input twice, stopping early once the input space is exhausted.
    pub dedup: bool,
    /// Used only to rank the reported best case.
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            budget: 1000,
            batch_size: 50,
            dedup: false,
            epsilon: 0.45,
            rng_seed: 0,
        }
    }
}

/// One executed test case with what it covered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub inputs: Vec<String>,
    pub chromosome: Chromosome,
    pub fitness: f64,
    pub terminated_by: Termination,
    pub covered: Vec<DefUsePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub approach: Approach,
    pub program: String,
    pub function: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ga_config: Option<GaConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_config: Option<BaselineConfig>,
    pub n_total: usize,
    pub m_total: usize,
    pub generations: Vec<GenerationStats>,
    pub total_generations: usize,
    /// Generation at which the final best fitness first appeared.
    pub first_best_generation: usize,
    pub executions: usize,
    pub stop_reason: StopReason,
    pub best: CaseReport,
    /// Every case that added coverage when it was first executed.
    pub suite: Vec<CaseReport>,
    pub covered_n: usize,
    pub covered_m: usize,
    pub covered: Vec<DefUsePair>,
    pub uncovered: Vec<DefUsePair>,
}

impl RunReport {
    pub fn n_ratio(&self) -> f64 {
        ratio(self.covered_n, self.n_total)
    }

    pub fn m_ratio(&self) -> f64 {
        ratio(self.covered_m, self.m_total)
    }

    /// First generation whose suite covered at least `n` pairs.
    pub fn generation_reaching(&self, n: usize) -> Option<usize> {
        self.generations
            .iter()
            .find(|g| g.suite_covered_n >= n)
            .map(|g| g.generation)
    }

    pub fn generations_csv(&self) -> String {
        let mut out = String::from(
            "generation,best_fitness,mean_fitness,covered_n,covered_m,new_best,suite_covered_n,suite_covered_m,executions\n",
        );
        for g in &self.generations {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                g.generation,
                g.best_fitness,
                g.mean_fitness,
                g.covered_n,
                g.covered_m,
                g.new_best,
                g.suite_covered_n,
                g.suite_covered_m,
                g.executions
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: N_dup {}/{}, R_dup {}/{}, {} generation(s), first best at generation {}, {} execution(s)",
            self.approach,
            self.function,
            self.covered_n,
            self.n_total,
            self.covered_m,
            self.m_total,
            self.total_generations,
            self.first_best_generation,
            self.executions
        )
    }
}

/// Ratio with `0/0` read as full coverage.
pub(crate) fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Initial population for `sig`, reproducible from `cfg.rng_seed`.
pub fn init_population(sig: &[IntType], cfg: &GaConfig) -> Vec<Chromosome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    (0..cfg.population_size)
        .map(|_| random_chromosome(sig, &mut rng))
        .collect()
}

struct Evaluated {
    tc: TestCase,
    record: CoverageRecord,
}

fn evaluate(program: &Program, pop: &[Chromosome]) -> Result<Vec<Evaluated>, ShapeError> {
    let sig = program.signature();
    let cases = pop
        .iter()
        .map(|ch| decode(ch, &sig))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cases
        .into_par_iter()
        .map(|tc| {
            let record = program
                .executor
                .execute(&program.entry, &tc, ExecOptions::default())
                .expect("decoded test case matches the entry signature");
            Evaluated { tc, record }
        })
        .collect())
}

struct Best {
    fitness: f64,
    chromosome: Chromosome,
    covered: PairSet,
    case: CaseReport,
}

struct Tracker<'a> {
    dups: &'a DupSets,
    suite_cov: PairSet,
    suite: Vec<CaseReport>,
    best: Option<Best>,
    first_best_generation: usize,
    executions: usize,
    stats: Vec<GenerationStats>,
}

impl<'a> Tracker<'a> {
    fn new(dups: &'a DupSets) -> Tracker<'a> {
        Tracker {
            dups,
            suite_cov: PairSet::new(dups.n()),
            suite: Vec::new(),
            best: None,
            first_best_generation: 0,
            executions: 0,
            stats: Vec::new(),
        }
    }

    fn case(&self, ch: &Chromosome, ev: &Evaluated, fit: f64) -> CaseReport {
        CaseReport {
            inputs: ev.tc.values.iter().map(|v| v.to_string()).collect(),
            chromosome: ch.clone(),
            fitness: fit,
            terminated_by: ev.record.terminated_by.clone(),
            covered: ev
                .record
                .covered
                .iter()
                .map(|i| self.dups.pairs[i].clone())
                .collect(),
        }
    }

    /// Folds one batch into the running state; returns whether the best improved.
    fn absorb(
        &mut self,
        generation: usize,
        pop: &[Chromosome],
        evs: &[Evaluated],
        fits: &[f64],
    ) -> bool {
        self.executions += evs.len();
        for (i, ev) in evs.iter().enumerate() {
            if self.suite_cov.union_with(&ev.record.covered) > 0 {
                let case = self.case(&pop[i], ev, fits[i]);
                self.suite.push(case);
            }
        }
        let mut idx = 0;
        for (i, &f) in fits.iter().enumerate() {
            if f > fits[idx] {
                idx = i;
            }
        }
        let improved = self.best.as_ref().is_none_or(|b| fits[idx] > b.fitness);
        if improved {
            self.best = Some(Best {
                fitness: fits[idx],
                chromosome: pop[idx].clone(),
                covered: evs[idx].record.covered.clone(),
                case: self.case(&pop[idx], &evs[idx], fits[idx]),
            });
            self.first_best_generation = generation;
        }
        let best = self.best.as_ref().unwrap();
        let (covered_n, covered_m) = covered_counts(&best.covered, self.dups);
        let (suite_covered_n, suite_covered_m) = covered_counts(&self.suite_cov, self.dups);
        self.stats.push(GenerationStats {
            generation,
            best_fitness: best.fitness,
            mean_fitness: fits.iter().sum::<f64>() / fits.len() as f64,
            covered_n,
            covered_m,
            new_best: improved,
            suite_covered_n,
            suite_covered_m,
            executions: self.executions,
        });
        improved
    }

    fn finish(
        self,
        program: &Program,
        approach: Approach,
        ga_config: Option<GaConfig>,
        baseline_config: Option<BaselineConfig>,
        stop_reason: StopReason,
    ) -> RunReport {
        let dups = self.dups;
        let (covered_n, covered_m) = covered_counts(&self.suite_cov, dups);
        let (covered, uncovered): (Vec<_>, Vec<_>) =
            (0..dups.n()).partition(|&i| self.suite_cov.contains(i));
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            approach,
            program: program.name.clone(),
            function: program.entry.clone(),
            ga_config,
            baseline_config,
            n_total: dups.n(),
            m_total: dups.m(),
            total_generations: self.stats.len(),
            generations: self.stats,
            first_best_generation: self.first_best_generation,
            executions: self.executions,
            stop_reason,
            best: self.best.expect("at least one batch evaluated").case,
            suite: self.suite,
            covered_n,
            covered_m,
            covered: covered.into_iter().map(|i| dups.pairs[i].clone()).collect(),
            uncovered: uncovered
                .into_iter()
                .map(|i| dups.pairs[i].clone())
                .collect(),
        }
    }
}

/// Runs the genetic search on `program.entry` against `program.dups`.
pub fn evolve(program: &Program, cfg: &GaConfig) -> Result<RunReport, GaError> {
    cfg.validate()?;
    let dups = &program.dups;
    if dups.n() == 0 {
        return Err(DegenerateError.into());
    }
    let sig = program.signature();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut pop: Vec<Chromosome> = (0..cfg.population_size)
        .map(|_| random_chromosome(&sig, &mut rng))
        .collect();
    let mut tracker = Tracker::new(dups);
    let mut stall = 0;

    let stop = 'gens: {
        for generation in 1..=cfg.max_generations {
            let evs = evaluate(program, &pop)?;
            let base = tracker.suite_cov.clone();
            let fits = evs
                .iter()
                .map(|ev| {
                    let (n, m) = match cfg.fitness_scope {
                        FitnessScope::Individual => covered_counts(&ev.record.covered, dups),
                        FitnessScope::Suite => {
                            let mut s = base.clone();
                            s.union_with(&ev.record.covered);
                            covered_counts(&s, dups)
                        }
                    };
                    fitness_value(cfg.fitness_mode, cfg.epsilon, n, m, dups.n())
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if tracker.absorb(generation, &pop, &evs, &fits) {
                stall = 0;
            } else {
                stall += 1;
            }
            log::debug!(
                "generation {generation}: best {:.4}",
                tracker.stats.last().unwrap().best_fitness
            );

            if tracker.suite_cov.is_full() {
                break 'gens StopReason::FullCoverage;
            }
            if stall >= cfg.stall_window {
                break 'gens StopReason::Stalled;
            }
            if generation == cfg.max_generations {
                break 'gens StopReason::MaxGenerations;
            }

            let picks = select_indices(&fits, pop.len(), &mut rng);
            let mut next = Vec::with_capacity(pop.len());
            for pair in picks.chunks(2) {
                match *pair {
                    [a, b] => {
                        let (x, y) = crossover(&pop[a], &pop[b], &mut rng)?;
                        next.push(mutate(&x, cfg.mutation_prob, &mut rng));
                        next.push(mutate(&y, cfg.mutation_prob, &mut rng));
                    }
                    [a] => next.push(mutate(&pop[a], cfg.mutation_prob, &mut rng)),
                    _ => unreachable!(),
                }
            }
            next[0] = tracker.best.as_ref().unwrap().chromosome.clone();
            pop = next;
        }
        unreachable!("loop always breaks by max_generations")
    };

    let approach = match cfg.fitness_mode {
        FitnessMode::Adfga => Approach::AdfGa,
        FitnessMode::Classic => Approach::GaClassic,
    };
    Ok(tracker.finish(program, approach, Some(cfg.clone()), None, stop))
}

/// Executes uniformly random inputs, `batch_size` per reporting step.
pub fn random_baseline(program: &Program, cfg: &BaselineConfig) -> Result<RunReport, GaError> {
    if cfg.budget == 0 || cfg.batch_size == 0 {
        return Err(GaError::Budget);
    }
    let dups = &program.dups;
    if dups.n() == 0 {
        return Err(DegenerateError.into());
    }
    let sig = program.signature();
    let space_bits: u32 = sig.iter().map(|t| t.width_bits as u32).sum();
    let space = if space_bits < 63 {
        Some(1usize << space_bits)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut seen: HashSet<Chromosome> = HashSet::new();
    let mut tracker = Tracker::new(dups);
    let mut drawn = 0;
    let mut batch = 0;

    let stop = loop {
        let want = cfg.batch_size.min(cfg.budget - drawn);
        let mut pop = Vec::with_capacity(want);
        while pop.len() < want {
            if cfg.dedup && space.is_some_and(|s| seen.len() >= s) {
                break;
            }
            let ch = random_chromosome(&sig, &mut rng);
            if !cfg.dedup || seen.insert(ch.clone()) {
                pop.push(ch);
            }
        }
        if pop.is_empty() {
            break StopReason::BudgetExhausted;
        }
        drawn += pop.len();
        batch += 1;
        let evs = evaluate(program, &pop)?;
        let fits = evs
            .iter()
            .map(|ev| {
                let (n, m) = covered_counts(&ev.record.covered, dups);
                fitness_value(FitnessMode::Adfga, cfg.epsilon, n, m, dups.n())
            })
            .collect::<Result<Vec<f64>, _>>()?;
        tracker.absorb(batch, &pop, &evs, &fits);
        if tracker.suite_cov.is_full() {
            break StopReason::FullCoverage;
        }
        if drawn >= cfg.budget {
            break StopReason::BudgetExhausted;
        }
    };
    Ok(tracker.finish(program, Approach::Random, None, Some(cfg.clone()), stop))
}
