//! Fixed-width integer values with wrapping two's-complement semantics.

use std::cmp::Ordering;
use std::fmt;

use ruint::aliases::U256;

use crate::types::IntType;

/// An integer of a given type. `bits` always lies in `0..2^width`; signed
/// types read the same bits in two's complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    ty: IntType,
    bits: U256,
}

pub(crate) fn mask(width: u16) -> U256 {
    if width >= 256 {
        U256::MAX
    } else {
        (U256::from(1u8) << width as usize) - U256::from(1u8)
    }
}

impl Value {
    /// Reduces `bits` modulo `2^width`.
    pub fn from_bits(ty: IntType, bits: U256) -> Value {
        Value {
            ty,
            bits: bits & mask(ty.width_bits),
        }
    }

    pub fn zero(ty: IntType) -> Value {
        Value {
            ty,
            bits: U256::ZERO,
        }
    }

    pub fn from_u64(ty: IntType, v: u64) -> Value {
        Value::from_bits(ty, U256::from(v))
    }

    /// Wraps a signed machine integer into `ty`.
    pub fn from_i128(ty: IntType, v: i128) -> Value {
        let mag = U256::from(v.unsigned_abs());
        let bits = if v < 0 { mag.wrapping_neg() } else { mag };
        Value::from_bits(ty, bits)
    }

    /// Parses a decimal string, optionally with a leading `-`, and wraps it.
    pub fn parse_decimal(ty: IntType, text: &str) -> Option<Value> {
        let (neg, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let mag = U256::from_str_radix(digits, 10).ok()?;
        let bits = if neg { mag.wrapping_neg() } else { mag };
        Some(Value::from_bits(ty, bits))
    }

    pub fn ty(&self) -> IntType {
        self.ty
    }

    pub fn bits(&self) -> U256 {
        self.bits
    }

    pub fn is_negative(&self) -> bool {
        self.ty.signed && self.bits.bit(self.ty.width_bits as usize - 1)
    }

    /// The bits sign-extended (or zero-extended) to the full 256-bit word.
    fn extended(&self) -> U256 {
        if self.is_negative() {
            self.bits | !mask(self.ty.width_bits)
        } else {
            self.bits
        }
    }

    /// Magnitude of the mathematical value.
    fn magnitude(&self) -> U256 {
        if self.is_negative() {
            self.extended().wrapping_neg()
        } else {
            self.bits
        }
    }

    /// Converts to `target`, keeping the mathematical value modulo `2^target.width`.
    pub fn cast(&self, target: IntType) -> Value {
        Value::from_bits(target, self.extended())
    }

    pub fn wrapping_add(&self, rhs: &Value) -> Value {
        Value::from_bits(self.ty, self.bits.wrapping_add(rhs.bits))
    }

    pub fn wrapping_sub(&self, rhs: &Value) -> Value {
        Value::from_bits(self.ty, self.bits.wrapping_sub(rhs.bits))
    }

    pub fn wrapping_mul(&self, rhs: &Value) -> Value {
        Value::from_bits(self.ty, self.bits.wrapping_mul(rhs.bits))
    }

    pub fn wrapping_neg(&self) -> Value {
        Value::from_bits(self.ty, self.bits.wrapping_neg())
    }

    /// Truncating division; `None` on a zero divisor.
    pub fn checked_div(&self, rhs: &Value) -> Option<Value> {
        if rhs.bits.is_zero() {
            return None;
        }
        if !self.ty.signed {
            return Some(Value::from_bits(self.ty, self.bits / rhs.bits));
        }
        let q = self.magnitude() / rhs.magnitude();
        let q = if self.is_negative() != rhs.is_negative() {
            q.wrapping_neg()
        } else {
            q
        };
        Some(Value::from_bits(self.ty, q))
    }

    /// Remainder with the sign of the dividend; `None` on a zero divisor.
    pub fn checked_rem(&self, rhs: &Value) -> Option<Value> {
        if rhs.bits.is_zero() {
            return None;
        }
        if !self.ty.signed {
            return Some(Value::from_bits(self.ty, self.bits % rhs.bits));
        }
        let r = self.magnitude() % rhs.magnitude();
        let r = if self.is_negative() {
            r.wrapping_neg()
        } else {
            r
        };
        Some(Value::from_bits(self.ty, r))
    }

    /// Numeric comparison; signed types compare in two's complement.
    pub fn compare(&self, rhs: &Value) -> Ordering {
        match (self.is_negative(), rhs.is_negative()) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            // Same sign: sign-extended words order correctly as unsigned.
            _ => self.extended().cmp(&rhs.extended()),
        }
    }

    /// Lossy conversion for tests and reporting.
    pub fn to_i128(&self) -> Option<i128> {
        let mag: u128 = self.magnitude().try_into().ok()?;
        let mag = i128::try_from(mag).ok()?;
        Some(if self.is_negative() { -mag } else { mag })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negative() {
            write!(f, "-{}", self.magnitude())
        } else {
            write!(f, "{}", self.bits)
        }
    }
}
