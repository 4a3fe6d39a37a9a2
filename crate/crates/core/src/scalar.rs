//! Scalar abstraction shared by Q-values, split thresholds and leaf
//! probabilities.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable throughout the crate: `f32` or `f64`.
///
/// `Display` must print the shortest representation that parses back to the
/// same value; both std float types guarantee this, which is what makes the
/// text artifact formats round-trip exactly.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Bit pattern used to hash and compare feature vectors. `-0.0` and
    /// `0.0` map to the same key.
    fn key_bits(self) -> u64;

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {
    fn key_bits(self) -> u64 {
        if self == 0.0 {
            0
        } else {
            u64::from(self.to_bits())
        }
    }
}

impl Scalar for f64 {
    fn key_bits(self) -> u64 {
        if self == 0.0 {
            0
        } else {
            self.to_bits()
        }
    }
}

/// Parses a scalar, mapping the std error into a plain message.
pub(crate) fn parse_scalar<F: Scalar>(text: &str) -> Result<F, String> {
    text.trim()
        .parse::<F>()
        .map_err(|_| format!("invalid number `{text}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_zero_shares_key() {
        assert_eq!((-0.0f64).key_bits(), 0.0f64.key_bits());
        assert_eq!((-0.0f32).key_bits(), 0.0f32.key_bits());
        assert_ne!(1.0f64.key_bits(), (-1.0f64).key_bits());
    }

    #[test]
    fn display_round_trips() {
        for x in [0.1f64, 1.0 / 3.0, 9.999_999_999e-7, -12345.678] {
            let back: f64 = parse_scalar(&x.to_string()).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
        let y = 0.1f32 + 0.2f32;
        let back: f32 = parse_scalar(&y.to_string()).unwrap();
        assert_eq!(back.to_bits(), y.to_bits());
    }
}
