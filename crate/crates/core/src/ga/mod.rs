//! Genetic search for inputs that cover def-use pairs, plus a random-testing
//! baseline with the same report format.

mod encoding;
mod engine;
mod operators;

pub use encoding::{
    check_shape, decode, decode_value, encode, encode_value, random_chromosome, Chromosome,
    ShapeError, SubChromosome,
};
pub use engine::{
    evolve, init_population, random_baseline, Approach, BaselineConfig, CaseReport, GaError,
    GenerationStats, RunReport, StopReason, REPORT_SCHEMA_VERSION,
};
pub use operators::{
    covered_counts, crossover, crossover_with_masks, cumulative_probabilities, fitness,
    fitness_value, mutate, roulette_index, select, select_indices, DegenerateError,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Require-related pairs weighted by `1 + epsilon`.
    Adfga,
    /// Plain fraction of pairs covered.
    Classic,
}

/// What an individual's fitness is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessScope {
    /// The individual's own coverage.
    #[default]
    Individual,
    /// Coverage of the archive suite (as of the previous generation) plus the individual.
    Suite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub epsilon: f64,
    pub population_size: usize,
    pub mutation_prob: f64,
    pub max_generations: usize,
    pub stall_window: usize,
    pub fitness_mode: FitnessMode,
    #[serde(default)]
    pub fitness_scope: FitnessScope,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            epsilon: 0.45,
            population_size: 50,
            mutation_prob: 0.01,
            max_generations: 200,
            stall_window: 10,
            fitness_mode: FitnessMode::Adfga,
            fitness_scope: FitnessScope::Individual,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("population size must be at least 2, got {0}")]
    Population(usize),
    #[error("stall window must be at least 1")]
    StallWindow,
    #[error("max generations must be at least 1")]
    MaxGenerations,
    #[error("epsilon must be a finite non-negative number, got {0}")]
    Epsilon(f64),
    #[error("mutation probability must lie in [0, 1], got {0}")]
    MutationProb(f64),
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(ConfigError::Population(self.population_size));
        }
        if self.stall_window < 1 {
            return Err(ConfigError::StallWindow);
        }
        if self.max_generations < 1 {
            return Err(ConfigError::MaxGenerations);
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(ConfigError::MutationProb(self.mutation_prob));
        }
        Ok(())
    }
}
