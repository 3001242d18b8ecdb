//! Logarithmic approximation and logarithmic temporal coding.
//!
//! A nonnegative activation is approximated by the subset of its binary
//! expansion whose exponents fall inside a configured range, then encoded
//! as a spike train: one spike per contributing power of two, earlier
//! spikes standing for larger powers. All quantities involved are dyadic
//! rationals, so every operation here is exact in `f64`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest supported window length. Keeping the exponent spread within the
/// 53-bit significand of `f64` guarantees that every approximation value and
/// every decoded sum is exactly representable.
pub const MAX_WINDOW_LEN: u32 = 53;

/// Largest supported exponent magnitude. Far below the `f64` exponent limit,
/// so scaled weights and thresholds never denormalize.
pub const MAX_EXPONENT_MAGNITUDE: i32 = 100;

/// 2^e as an exactly-constructed `f64`.
///
/// Valid for `-1022 <= e <= 1023`; range construction keeps exponents far
/// inside that.
#[inline]
pub fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Exact floor(log2(a)) for finite a > 0, read from the binary
/// representation rather than computed through a transcendental log, so
/// boundary values a = 2^k classify exactly.
#[inline]
pub fn floor_log2(a: f64) -> i32 {
    debug_assert!(a > 0.0 && a.is_finite());
    let bits = a.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i32;
    if exp_field != 0 {
        exp_field - 1023
    } else {
        // Subnormal: value = mantissa * 2^-1074.
        let mantissa = bits & ((1u64 << 52) - 1);
        63 - mantissa.leading_zeros() as i32 - 1074
    }
}

/// An inclusive range of integer exponents `{e_min .. e_max}`.
///
/// Determines both the precision of the logarithmic approximation and the
/// length `T = e_max - e_min + 1` of the spike-train time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentRange {
    e_min: i32,
    e_max: i32,
}

impl ExponentRange {
    pub fn new(e_min: i32, e_max: i32) -> Result<Self> {
        if e_min > e_max {
            return Err(Error::Config(format!(
                "exponent range requires e_min <= e_max, got {{{e_min}..{e_max}}}"
            )));
        }
        if e_min.abs() > MAX_EXPONENT_MAGNITUDE || e_max.abs() > MAX_EXPONENT_MAGNITUDE {
            return Err(Error::Config(format!(
                "exponent magnitude exceeds {MAX_EXPONENT_MAGNITUDE}: {{{e_min}..{e_max}}}"
            )));
        }
        let window = e_max - e_min + 1;
        if window as u32 > MAX_WINDOW_LEN {
            return Err(Error::Config(format!(
                "window length {window} exceeds {MAX_WINDOW_LEN}; values would lose exactness"
            )));
        }
        Ok(ExponentRange { e_min, e_max })
    }

    #[inline]
    pub fn e_min(&self) -> i32 {
        self.e_min
    }

    #[inline]
    pub fn e_max(&self) -> i32 {
        self.e_max
    }

    /// Window length `T = e_max - e_min + 1`.
    #[inline]
    pub fn window_len(&self) -> u32 {
        (self.e_max - self.e_min + 1) as u32
    }

    /// Smallest representable nonzero value, 2^e_min.
    #[inline]
    pub fn min_value(&self) -> f64 {
        pow2(self.e_min)
    }

    /// Saturation boundary 2^(e_max+1). Values at or above it clamp.
    #[inline]
    pub fn saturation(&self) -> f64 {
        pow2(self.e_max + 1)
    }

    /// Largest representable value, 2^(e_max+1) - 2^e_min.
    #[inline]
    pub fn max_value(&self) -> f64 {
        self.saturation() - self.min_value()
    }
}

impl std::fmt::Display for ExponentRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}..{}}}", self.e_min, self.e_max)
    }
}

/// Which logarithmic approximation a codec or neuron uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaVariant {
    /// Keep every in-range power of two of the binary expansion
    /// (multi-spike trains).
    MultiPower,
    /// Keep only the leading in-range power of two (at most one spike).
    SinglePower,
}

impl LaVariant {
    /// Apply this variant's approximation.
    pub fn apply(self, a: f64, range: ExponentRange) -> Result<f64> {
        match self {
            LaVariant::MultiPower => multi_power_la(a, range),
            LaVariant::SinglePower => single_power_la(a, range),
        }
    }
}

impl std::fmt::Display for LaVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LaVariant::MultiPower => write!(f, "multi"),
            LaVariant::SinglePower => write!(f, "single"),
        }
    }
}

/// A spike train on a discrete time window `{0 .. window_len-1}`.
///
/// Spike times are strictly increasing and unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrain {
    window_len: u32,
    times: Vec<u32>,
}

impl SpikeTrain {
    /// An empty train over a window of `window_len` steps.
    pub fn empty(window_len: u32) -> Self {
        SpikeTrain {
            window_len,
            times: Vec::new(),
        }
    }

    /// Build a train from spike times, validating ordering and bounds.
    pub fn from_times(window_len: u32, times: Vec<u32>) -> Result<Self> {
        for pair in times.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Contract(format!(
                    "spike times must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&last) = times.last() {
            if last >= window_len {
                return Err(Error::Contract(format!(
                    "spike time {last} outside window of length {window_len}"
                )));
            }
        }
        Ok(SpikeTrain { window_len, times })
    }

    #[inline]
    pub fn window_len(&self) -> u32 {
        self.window_len
    }

    #[inline]
    pub fn times(&self) -> &[u32] {
        &self.times
    }

    #[inline]
    pub fn num_spikes(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whether a spike occurs at time `t`.
    pub fn has_spike_at(&self, t: u32) -> bool {
        self.times.binary_search(&t).is_ok()
    }
}

fn check_activation(a: f64) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("activation must be finite, got {a}")));
    }
    if a < 0.0 {
        return Err(Error::Domain(format!(
            "activation must be nonnegative, got {a}"
        )));
    }
    Ok(())
}

/// Multi-power logarithmic approximation: truncate `a` to the largest
/// multiple of 2^e_min not exceeding it, clamping to zero below 2^e_min and
/// to 2^(e_max+1) - 2^e_min at or above 2^(e_max+1).
pub fn multi_power_la(a: f64, range: ExponentRange) -> Result<f64> {
    check_activation(a)?;
    let lo = range.min_value();
    if a < lo {
        return Ok(0.0);
    }
    if a >= range.saturation() {
        return Ok(range.max_value());
    }
    // a / 2^e_min is an exact scale; floor and the scale back are exact
    // because the quotient is below 2^window_len <= 2^53.
    Ok((a / lo).floor() * lo)
}

/// Single-power logarithmic approximation: keep only the leading power of
/// two, clamping to zero below 2^e_min and to 2^e_max at or above 2^(e_max+1).
pub fn single_power_la(a: f64, range: ExponentRange) -> Result<f64> {
    check_activation(a)?;
    if a < range.min_value() {
        return Ok(0.0);
    }
    if a >= range.saturation() {
        return Ok(pow2(range.e_max()));
    }
    Ok(pow2(floor_log2(a)))
}

/// Surrogate derivative of both approximations with respect to the raw
/// activation: 1 below the saturation boundary 2^(e_max+1), 0 at or above it.
pub fn la_derivative(a: f64, range: ExponentRange) -> Result<f64> {
    check_activation(a)?;
    Ok(if a < range.saturation() { 1.0 } else { 0.0 })
}

/// Encode an activation as a spike train: a spike at `t = e_max - e` for
/// every power 2^e contributing to the approximation of `a` under `variant`.
pub fn encode_ltc(a: f64, range: ExponentRange, variant: LaVariant) -> Result<SpikeTrain> {
    let la = variant.apply(a, range)?;
    let window = range.window_len();
    if la == 0.0 {
        return Ok(SpikeTrain::empty(window));
    }
    let times = match variant {
        LaVariant::MultiPower => {
            // la = k * 2^e_min with k < 2^window; bit j of k set means
            // 2^(e_min + j) contributes, i.e. a spike at (window-1) - j.
            let k = (la / range.min_value()) as u64;
            debug_assert!(k > 0 && k < (1u64 << window));
            let mut times = Vec::with_capacity(k.count_ones() as usize);
            for j in (0..window).rev() {
                if k & (1u64 << j) != 0 {
                    times.push(window - 1 - j);
                }
            }
            times
        }
        LaVariant::SinglePower => vec![(range.e_max() - floor_log2(la)) as u32],
    };
    Ok(SpikeTrain { window_len: window, times })
}

/// Decode a spike train back to its approximation value:
/// the sum of 2^(e_max - t) over spike times t.
pub fn decode_ltc(train: &SpikeTrain, range: ExponentRange) -> Result<f64> {
    if train.window_len() != range.window_len() {
        return Err(Error::Contract(format!(
            "train window {} does not match range window {} of {range}",
            train.window_len(),
            range.window_len()
        )));
    }
    let mut sum = 0.0;
    for &t in train.times() {
        sum += pow2(range.e_max() - t as i32);
    }
    Ok(sum)
}

/// Upper bound on the number of spikes a multi-power encoding of `a` uses.
pub fn spike_count_bound(a: f64, range: ExponentRange) -> Result<u32> {
    check_activation(a)?;
    if a < range.min_value() {
        return Ok(0);
    }
    if a >= range.saturation() {
        return Ok(range.window_len());
    }
    Ok((floor_log2(a) - range.e_min() + 1) as u32)
}
