//! Fitness, roulette selection, uniform crossover and bit-flip mutation.

use rand::Rng;

use super::encoding::{Chromosome, ShapeError};
use super::{FitnessMode, GaConfig};
use crate::coverage::PairSet;
use crate::dataflow::DupSets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no def-use pairs to cover")]
pub struct DegenerateError;

/// `((n - m) + (1 + eps) * m) / N`, or `n / N` in classic mode.
pub fn fitness_value(
    mode: FitnessMode,
    epsilon: f64,
    n: usize,
    m: usize,
    total: usize,
) -> Result<f64, DegenerateError> {
    if total == 0 {
        return Err(DegenerateError);
    }
    let (n, m, total) = (n as f64, m as f64, total as f64);
    Ok(match mode {
        FitnessMode::Adfga => ((n - m) + (1.0 + epsilon) * m) / total,
        FitnessMode::Classic => n / total,
    })
}

/// Counts (n, m) for a covered set.
pub fn covered_counts(covered: &PairSet, dups: &DupSets) -> (usize, usize) {
    let n = covered.count();
    let m = covered
        .iter()
        .filter(|&i| dups.pairs[i].is_require_related)
        .count();
    (n, m)
}

pub fn fitness(covered: &PairSet, dups: &DupSets, cfg: &GaConfig) -> Result<f64, DegenerateError> {
    let (n, m) = covered_counts(covered, dups);
    fitness_value(cfg.fitness_mode, cfg.epsilon, n, m, dups.n())
}

/// Cumulative selection probabilities; the last entry is exactly 1.
/// `None` when every fitness is zero.
pub fn cumulative_probabilities(fits: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = fits.iter().sum();
    if total <= 0.0 || fits.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    let mut cum: Vec<f64> = fits
        .iter()
        .map(|f| {
            acc += f / total;
            acc
        })
        .collect();
    *cum.last_mut().unwrap() = 1.0;
    Some(cum)
}

/// Index `i` with `cum[i-1] < r <= cum[i]`, for `r` in (0, 1].
pub fn roulette_index(cum: &[f64], r: f64) -> usize {
    cum.partition_point(|&c| c < r).min(cum.len() - 1)
}

/// Draws `count` indices with replacement. All-zero fitness falls back to
/// uniform choice.
pub fn select_indices<R: Rng + ?Sized>(fits: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    match cumulative_probabilities(fits) {
        Some(cum) => (0..count)
            .map(|_| roulette_index(&cum, 1.0 - rng.gen::<f64>()))
            .collect(),
        None => {
            log::warn!("all fitness values are zero; selecting uniformly");
            (0..count).map(|_| rng.gen_range(0..fits.len())).collect()
        }
    }
}

pub fn select<R: Rng + ?Sized>(pop: &[Chromosome], fits: &[f64], rng: &mut R) -> Vec<Chromosome> {
    select_indices(fits, pop.len(), rng)
        .into_iter()
        .map(|i| pop[i].clone())
        .collect()
}

fn check_pair(x: &Chromosome, y: &Chromosome) -> Result<(), ShapeError> {
    if x.subs.len() != y.subs.len() {
        return Err(ShapeError::Arity {
            expected: x.subs.len(),
            found: y.subs.len(),
        });
    }
    for (index, (a, b)) in x.subs.iter().zip(&y.subs).enumerate() {
        if a.value_bits.len() != b.value_bits.len() {
            return Err(ShapeError::Width {
                index,
                expected: a.value_bits.len(),
                found: b.value_bits.len(),
            });
        }
        if a.type_bit != b.type_bit {
            return Err(ShapeError::TypeBit { index });
        }
    }
    Ok(())
}

/// Swaps value bit `i` of each sub-chromosome wherever `masks[sub][i]` is set.
/// Masks cover value bits only; type bits never move.
pub fn crossover_with_masks(
    x: &Chromosome,
    y: &Chromosome,
    masks: &[Vec<bool>],
) -> Result<(Chromosome, Chromosome), ShapeError> {
    check_pair(x, y)?;
    let (mut a, mut b) = (x.clone(), y.clone());
    for (index, ((sa, sb), mask)) in a
        .subs
        .iter_mut()
        .zip(b.subs.iter_mut())
        .zip(masks)
        .enumerate()
    {
        if mask.len() != sa.value_bits.len() {
            return Err(ShapeError::Width {
                index,
                expected: sa.value_bits.len(),
                found: mask.len(),
            });
        }
        for (i, &swap) in mask.iter().enumerate() {
            if swap {
                std::mem::swap(&mut sa.value_bits[i], &mut sb.value_bits[i]);
            }
        }
    }
    Ok((a, b))
}

pub fn crossover<R: Rng + ?Sized>(
    x: &Chromosome,
    y: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome), ShapeError> {
    check_pair(x, y)?;
    let masks: Vec<Vec<bool>> = x
        .subs
        .iter()
        .map(|s| (0..s.value_bits.len()).map(|_| rng.gen::<bool>()).collect())
        .collect();
    crossover_with_masks(x, y, &masks)
}

/// Flips each value bit when a fresh uniform draw is below `p_m`.
pub fn mutate<R: Rng + ?Sized>(ch: &Chromosome, p_m: f64, rng: &mut R) -> Chromosome {
    let mut out = ch.clone();
    for sub in &mut out.subs {
        for bit in &mut sub.value_bits {
            if rng.gen::<f64>() < p_m {
                *bit = !*bit;
            }
        }
    }
    out
}
