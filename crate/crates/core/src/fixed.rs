//! Exact fixed-point arithmetic for the hardware-style neuron backend.
//!
//! A value is a signed 64-bit integer scaled by 2^-F. Doubling is a shift,
//! addition is an integer add, and overflow is always an error: clamping or
//! wrapping would silently break the exact-equivalence guarantees the
//! spiking runtime is tested against.

use crate::error::{Error, Result};

/// Default number of fractional bits used by the fixed-point backend.
pub const DEFAULT_FRAC_BITS: u32 = 32;

/// A fixed-point number `raw / 2^frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FixedPoint {
    raw: i64,
    frac_bits: u32,
}

impl FixedPoint {
    pub fn zero(frac_bits: u32) -> Self {
        FixedPoint { raw: 0, frac_bits }
    }

    pub fn from_raw(raw: i64, frac_bits: u32) -> Self {
        FixedPoint { raw, frac_bits }
    }

    #[inline]
    pub fn raw(&self) -> i64 {
        self.raw
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Convert a real value, requiring exact representability: `x * 2^F`
    /// must be an integer that fits in `i64`. Values that would need
    /// rounding are rejected.
    pub fn from_f64_exact(x: f64, frac_bits: u32) -> Result<Self> {
        if frac_bits > 62 {
            return Err(Error::Config(format!(
                "frac_bits {frac_bits} too large for a 64-bit word"
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonRepresentable { value: x, frac_bits });
        }
        let scaled = x * crate::coding::pow2(frac_bits as i32);
        if !scaled.is_finite() || scaled.fract() != 0.0 {
            return Err(Error::NonRepresentable { value: x, frac_bits });
        }
        if scaled < i64::MIN as f64 || scaled >= i64::MAX as f64 {
            return Err(Error::Overflow {
                layer: None,
                neuron: None,
                step: None,
                what: "fixed-point conversion",
            });
        }
        Ok(FixedPoint {
            raw: scaled as i64,
            frac_bits,
        })
    }

    /// Back to `f64`. Exact whenever |raw| < 2^53, which holds for every
    /// quantity the bounded-horizon simulations produce.
    pub fn to_f64(&self) -> f64 {
        self.raw as f64 * crate::coding::pow2(-(self.frac_bits as i32))
    }

    /// Multiply by two (one left shift), detecting overflow.
    pub fn double(self) -> Result<Self> {
        let raw = self.raw.checked_mul(2).ok_or(Error::Overflow {
            layer: None,
            neuron: None,
            step: None,
            what: "membrane doubling",
        })?;
        Ok(FixedPoint { raw, frac_bits: self.frac_bits })
    }

    pub fn try_add(self, rhs: Self) -> Result<Self> {
        debug_assert_eq!(self.frac_bits, rhs.frac_bits);
        let raw = self.raw.checked_add(rhs.raw).ok_or(Error::Overflow {
            layer: None,
            neuron: None,
            step: None,
            what: "membrane addition",
        })?;
        Ok(FixedPoint { raw, frac_bits: self.frac_bits })
    }

    pub fn try_sub(self, rhs: Self) -> Result<Self> {
        debug_assert_eq!(self.frac_bits, rhs.frac_bits);
        let raw = self.raw.checked_sub(rhs.raw).ok_or(Error::Overflow {
            layer: None,
            neuron: None,
            step: None,
            what: "threshold subtraction",
        })?;
        Ok(FixedPoint { raw, frac_bits: self.frac_bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_dyadic_conversions() {
        let fp = FixedPoint::from_f64_exact(0.25, 32).unwrap();
        assert_eq!(fp.raw(), 1i64 << 30);
        assert_eq!(fp.to_f64(), 0.25);

        let fp = FixedPoint::from_f64_exact(5.25, 32).unwrap();
        assert_eq!(fp.raw(), 21i64 << 30);
        assert_eq!(fp.to_f64(), 5.25);

        let fp = FixedPoint::from_f64_exact(-1.5, 4).unwrap();
        assert_eq!(fp.raw(), -24);
    }

    #[test]
    fn non_dyadic_rejected() {
        assert!(matches!(
            FixedPoint::from_f64_exact(1.0 / 3.0, 32),
            Err(Error::NonRepresentable { .. })
        ));
        assert!(FixedPoint::from_f64_exact(f64::NAN, 32).is_err());
    }

    #[test]
    fn doubling_overflow_detected() {
        let fp = FixedPoint::from_raw(i64::MAX / 2 + 1, 32);
        assert!(matches!(fp.double(), Err(Error::Overflow { .. })));
        let fp = FixedPoint::from_raw(i64::MAX / 2, 32);
        assert!(fp.double().is_ok());
    }

    #[test]
    fn add_sub_roundtrip() {
        let a = FixedPoint::from_f64_exact(3.0, 32).unwrap();
        let b = FixedPoint::from_f64_exact(1.0, 32).unwrap();
        assert_eq!(a.try_add(b).unwrap().to_f64(), 4.0);
        assert_eq!(a.try_sub(b).unwrap().to_f64(), 2.0);
    }
}
