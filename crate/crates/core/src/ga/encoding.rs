//! Binary test-case encoding: per parameter, one type bit followed by the
//! value in fixed-width two's complement, most significant bit first.

use std::fmt;

use rand::Rng;
use ruint::aliases::U256;
use serde::{Serialize, Serializer};

use crate::interp::TestCase;
use crate::types::IntType;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubChromosome {
    /// `true` for signed parameters.
    pub type_bit: bool,
    pub value_bits: Vec<bool>,
}

impl SubChromosome {
    pub fn len(&self) -> usize {
        self.value_bits.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for SubChromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bit = |b: bool| if b { '1' } else { '0' };
        write!(f, "{}", bit(self.type_bit))?;
        self.value_bits
            .iter()
            .try_for_each(|&b| write!(f, "{}", bit(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Chromosome {
    pub subs: Vec<SubChromosome>,
}

impl Chromosome {
    pub fn bit_len(&self) -> usize {
        self.subs.iter().map(SubChromosome::len).sum()
    }

    pub fn type_bits(&self) -> Vec<bool> {
        self.subs.iter().map(|s| s.type_bit).collect()
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.subs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.subs.iter().map(|sub| sub.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("expected {expected} sub-chromosome(s), found {found}")]
    Arity { expected: usize, found: usize },
    #[error("sub-chromosome {index} has {found} value bits, expected {expected}")]
    Width {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sub-chromosome {index} has the wrong type bit")]
    TypeBit { index: usize },
}

pub fn encode_value(v: &Value) -> SubChromosome {
    let w = v.ty().width_bits as usize;
    let bits = v.bits();
    SubChromosome {
        type_bit: v.ty().signed,
        value_bits: (0..w).rev().map(|i| bits.bit(i)).collect(),
    }
}

pub fn encode(tc: &TestCase) -> Chromosome {
    Chromosome {
        subs: tc.values.iter().map(encode_value).collect(),
    }
}

pub fn decode_value(sub: &SubChromosome, ty: IntType) -> Value {
    let mut bits = U256::ZERO;
    for (i, &b) in sub.value_bits.iter().rev().enumerate() {
        bits.set_bit(i, b);
    }
    Value::from_bits(ty, bits)
}

pub fn decode(ch: &Chromosome, sig: &[IntType]) -> Result<TestCase, ShapeError> {
    check_shape(ch, sig)?;
    Ok(TestCase::new(
        ch.subs
            .iter()
            .zip(sig)
            .map(|(s, &t)| decode_value(s, t))
            .collect(),
    ))
}

pub fn check_shape(ch: &Chromosome, sig: &[IntType]) -> Result<(), ShapeError> {
    if ch.subs.len() != sig.len() {
        return Err(ShapeError::Arity {
            expected: sig.len(),
            found: ch.subs.len(),
        });
    }
    for (index, (s, t)) in ch.subs.iter().zip(sig).enumerate() {
        if s.value_bits.len() != t.width_bits as usize {
            return Err(ShapeError::Width {
                index,
                expected: t.width_bits as usize,
                found: s.value_bits.len(),
            });
        }
        if s.type_bit != t.signed {
            return Err(ShapeError::TypeBit { index });
        }
    }
    Ok(())
}

/// Uniformly random value bits; type bits from the signature.
pub fn random_chromosome<R: Rng + ?Sized>(sig: &[IntType], rng: &mut R) -> Chromosome {
    Chromosome {
        subs: sig
            .iter()
            .map(|t| SubChromosome {
                type_bit: t.signed,
                value_bits: (0..t.width_bits).map(|_| rng.gen::<bool>()).collect(),
            })
            .collect(),
    }
}
