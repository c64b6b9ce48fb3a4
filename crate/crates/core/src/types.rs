//! Integer and expression types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Fixed-width integer type: `uintN` or `intN`.
///
/// Source programs may only use widths that are multiples of 8 in 8..=256.
/// Narrow widths (1..=256, any value) are accepted when the parser is
/// configured for them, which exhaustive-enumeration tests rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntType {
    pub signed: bool,
    pub width_bits: u16,
}

impl IntType {
    pub const UINT256: IntType = IntType {
        signed: false,
        width_bits: 256,
    };

    /// Builds a type with a standard (byte-multiple) width.
    pub fn new(signed: bool, width_bits: u16) -> Option<IntType> {
        if (8..=256).contains(&width_bits) && width_bits.is_multiple_of(8) {
            Some(IntType { signed, width_bits })
        } else {
            None
        }
    }

    /// Builds a type with any width in 1..=256.
    pub fn narrow(signed: bool, width_bits: u16) -> Option<IntType> {
        (1..=256)
            .contains(&width_bits)
            .then_some(IntType { signed, width_bits })
    }

    pub fn uint(width_bits: u16) -> IntType {
        IntType::new(false, width_bits).expect("invalid uint width")
    }

    pub fn int(width_bits: u16) -> IntType {
        IntType::new(true, width_bits).expect("invalid int width")
    }

    /// Type flag as used in variable tables: 0 for uint, 1 for int.
    pub fn type_flag(self) -> u8 {
        self.signed as u8
    }

    pub fn is_standard_width(self) -> bool {
        self.width_bits >= 8 && self.width_bits.is_multiple_of(8)
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.signed { "int" } else { "uint" };
        write!(f, "{prefix}{}", self.width_bits)
    }
}

/// Type of an expression after resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ty {
    Int(IntType),
    Bool,
}

impl Ty {
    pub fn as_int(self) -> Option<IntType> {
        match self {
            Ty::Int(t) => Some(t),
            Ty::Bool => None,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int(t) => t.fmt(f),
            Ty::Bool => f.write_str("bool"),
        }
    }
}
