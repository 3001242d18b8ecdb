//! The exponentiate-and-fire neuron.
//!
//! Each discrete time step the membrane potential doubles, the scaled input
//! current is added, and a spike fires when the potential reaches the
//! threshold 2^e_out_max. Multi-spike neurons reset by subtracting the
//! threshold; single-spike neurons reset to zero and stay quiescent.
//! Doubling turns the potential into a positional binary readout of the
//! integrated weighted sum, which is what makes the output train a
//! logarithmic temporal code of max(weighted sum, 0).

use crate::coding::{floor_log2, pow2, ExponentRange, LaVariant, SpikeTrain};
use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use serde::{Deserialize, Serialize};

/// Membrane-potential arithmetic, implemented by `f64` and [`FixedPoint`].
///
/// The fixed backend treats overflow as a hard error; the float backend is
/// infallible over the bounded horizons the runtime uses.
pub trait Potential: Copy + std::fmt::Debug {
    /// Backend-wide context: `()` for floats, fractional-bit count for
    /// fixed point.
    type Ctx: Copy;

    fn zero(ctx: Self::Ctx) -> Self;
    /// A zero carrying the same backend context as `self`.
    fn zeroed(self) -> Self;
    /// Exact 2^e in this representation (used for the firing threshold).
    fn power_of_two(e: i32, ctx: Self::Ctx) -> Result<Self>;
    /// Convert a pre-scaled synaptic weight `w * 2^e_in_min`.
    fn from_scaled_weight(w: f64, ctx: Self::Ctx) -> Result<Self>;
    fn double(self) -> Result<Self>;
    fn add(self, rhs: Self) -> Result<Self>;
    fn sub(self, rhs: Self) -> Result<Self>;
    fn at_least(self, rhs: Self) -> bool;
    fn to_f64(self) -> f64;
}

impl Potential for f64 {
    type Ctx = ();

    fn zero(_: ()) -> Self {
        0.0
    }

    fn zeroed(self) -> Self {
        0.0
    }

    fn power_of_two(e: i32, _: ()) -> Result<Self> {
        Ok(pow2(e))
    }

    fn from_scaled_weight(w: f64, _: ()) -> Result<Self> {
        Ok(w)
    }

    fn double(self) -> Result<Self> {
        Ok(2.0 * self)
    }

    fn add(self, rhs: Self) -> Result<Self> {
        Ok(self + rhs)
    }

    fn sub(self, rhs: Self) -> Result<Self> {
        Ok(self - rhs)
    }

    fn at_least(self, rhs: Self) -> bool {
        self >= rhs
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Potential for FixedPoint {
    type Ctx = u32;

    fn zero(frac_bits: u32) -> Self {
        FixedPoint::zero(frac_bits)
    }

    fn zeroed(self) -> Self {
        FixedPoint::zero(self.frac_bits())
    }

    fn power_of_two(e: i32, frac_bits: u32) -> Result<Self> {
        FixedPoint::from_f64_exact(pow2(e), frac_bits)
    }

    fn from_scaled_weight(w: f64, frac_bits: u32) -> Result<Self> {
        FixedPoint::from_f64_exact(w, frac_bits)
    }

    fn double(self) -> Result<Self> {
        FixedPoint::double(self)
    }

    fn add(self, rhs: Self) -> Result<Self> {
        FixedPoint::try_add(self, rhs)
    }

    fn sub(self, rhs: Self) -> Result<Self> {
        FixedPoint::try_sub(self, rhs)
    }

    fn at_least(self, rhs: Self) -> bool {
        self >= rhs
    }

    fn to_f64(self) -> f64 {
        FixedPoint::to_f64(&self)
    }
}

/// Static configuration of one EF neuron (or one homogeneous layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfConfig {
    pub input_range: ExponentRange,
    pub output_range: ExponentRange,
    pub variant: LaVariant,
}

impl EfConfig {
    pub fn new(input_range: ExponentRange, output_range: ExponentRange, variant: LaVariant) -> Self {
        EfConfig {
            input_range,
            output_range,
            variant,
        }
    }

    /// Input window length.
    #[inline]
    pub fn t_in(&self) -> u32 {
        self.input_range.window_len()
    }

    /// Output window length.
    #[inline]
    pub fn t_out(&self) -> u32 {
        self.output_range.window_len()
    }

    /// Firing threshold 2^e_out_max.
    #[inline]
    pub fn threshold(&self) -> f64 {
        pow2(self.output_range.e_max())
    }

    /// First step of the output window on the neuron-local clock: the last
    /// step of the input window.
    #[inline]
    pub fn output_window_start(&self) -> u32 {
        self.t_in() - 1
    }

    /// Last step of the output window on the neuron-local clock.
    #[inline]
    pub fn output_window_end(&self) -> u32 {
        self.t_in() + self.t_out() - 2
    }

    /// Steps needed to cover input and output windows plus one extra step,
    /// where a late undesired spike would surface.
    #[inline]
    pub fn default_horizon(&self) -> u32 {
        self.t_in() + self.t_out()
    }
}

/// Mutable state of one EF neuron.
#[derive(Debug, Clone, Copy)]
pub struct EfNeuron<P: Potential> {
    v: P,
    threshold: P,
    single_spike: bool,
    /// Set after a single-spike neuron fires; it then ignores all further
    /// input and keeps its potential at zero.
    quiescent: bool,
}

impl<P: Potential> EfNeuron<P> {
    pub fn new(cfg: &EfConfig, ctx: P::Ctx) -> Result<Self> {
        Ok(EfNeuron {
            v: P::zero(ctx),
            threshold: P::power_of_two(cfg.output_range.e_max(), ctx)?,
            single_spike: cfg.variant == LaVariant::SinglePower,
            quiescent: false,
        })
    }

    /// Start from a given potential instead of zero. Used by tests and
    /// diagnostics that drive the generation phase directly.
    pub fn with_potential(cfg: &EfConfig, ctx: P::Ctx, v: P) -> Result<Self> {
        let mut n = Self::new(cfg, ctx)?;
        n.v = v;
        Ok(n)
    }

    #[inline]
    pub fn potential(&self) -> P {
        self.v
    }

    /// One time step: double, integrate the pre-scaled input current, then
    /// threshold-test and reset. Returns whether the neuron fired.
    pub fn step(&mut self, scaled_input: P) -> Result<bool> {
        if self.quiescent {
            return Ok(false);
        }
        self.v = self.v.double()?;
        self.v = self.v.add(scaled_input)?;
        if self.v.at_least(self.threshold) {
            if self.single_spike {
                self.v = self.v.zeroed();
                self.quiescent = true;
            } else {
                self.v = self.v.sub(self.threshold)?;
            }
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Pre-reset potential the neuron would see this step, without mutating
    /// state. The runtime uses `step`; this exists for traces.
    pub fn peek_pre_reset(&self, scaled_input: P) -> Result<P> {
        self.v.double()?.add(scaled_input)
    }
}

/// A fire outside the output window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UndesiredKind {
    /// Fired before the output window opened; corrupts the neuron's own
    /// integration.
    Early,
    /// Fired after the output window closed; would corrupt downstream
    /// generation if propagated.
    Late,
}

/// Result of simulating a single neuron on explicit input spike trains.
#[derive(Debug, Clone)]
pub struct NeuronSim {
    /// In-window output spikes, re-based to the output window (time 0 is
    /// the window start), so the train decodes directly with the output
    /// exponent range.
    pub output: SpikeTrain,
    /// Fires outside the output window, as (local time, kind). These still
    /// reset the membrane; only their propagation is suppressed.
    pub undesired: Vec<(u32, UndesiredKind)>,
    /// Per-step (pre-reset, post-reset) potentials when tracing was on.
    pub trace: Option<Vec<(f64, f64)>>,
}

/// Step an EF neuron over explicit input trains with raw synaptic weights.
///
/// Input spike time `t` on train `i` contributes `w_i * 2^e_in_min` at step
/// `t`; all trains share the input window. `horizon` must cover at least
/// the input and output windows.
pub fn simulate_neuron<P: Potential>(
    input_trains: &[SpikeTrain],
    weights: &[f64],
    cfg: &EfConfig,
    horizon: u32,
    ctx: P::Ctx,
    trace: bool,
) -> Result<NeuronSim> {
    if input_trains.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} input trains but {} weights",
            input_trains.len(),
            weights.len()
        )));
    }
    for train in input_trains {
        if train.window_len() != cfg.t_in() {
            return Err(Error::Contract(format!(
                "input train window {} does not match input range window {}",
                train.window_len(),
                cfg.t_in()
            )));
        }
    }
    if horizon < cfg.t_in() + cfg.t_out() - 1 {
        return Err(Error::Contract(format!(
            "horizon {horizon} shorter than input+output windows ({})",
            cfg.t_in() + cfg.t_out() - 1
        )));
    }

    let scale = pow2(cfg.input_range.e_min());
    let scaled: Vec<P> = weights
        .iter()
        .map(|&w| P::from_scaled_weight(w * scale, ctx))
        .collect::<Result<_>>()?;

    // Scaled input current per step, accumulated across synapses in index
    // order.
    let mut currents: Vec<P> = (0..horizon).map(|_| P::zero(ctx)).collect();
    for (train, &w) in input_trains.iter().zip(scaled.iter()) {
        for &t in train.times() {
            currents[t as usize] = currents[t as usize].add(w)?;
        }
    }

    let mut neuron = EfNeuron::<P>::new(cfg, ctx)?;
    let mut output_times = Vec::new();
    let mut undesired = Vec::new();
    let mut trace_log = trace.then(Vec::new);

    let win_start = cfg.output_window_start();
    let win_end = cfg.output_window_end();
    for t in 0..horizon {
        if let Some(log) = trace_log.as_mut() {
            let pre = neuron.peek_pre_reset(currents[t as usize])?;
            let fired = neuron.step(currents[t as usize])?;
            log.push((pre.to_f64(), neuron.potential().to_f64()));
            record_fire(t, fired, win_start, win_end, &mut output_times, &mut undesired);
        } else {
            let fired = neuron.step(currents[t as usize])?;
            record_fire(t, fired, win_start, win_end, &mut output_times, &mut undesired);
        }
    }

    let rebased: Vec<u32> = output_times.iter().map(|&t| t - win_start).collect();
    Ok(NeuronSim {
        output: SpikeTrain::from_times(cfg.t_out(), rebased)?,
        undesired,
        trace: trace_log,
    })
}

fn record_fire(
    t: u32,
    fired: bool,
    win_start: u32,
    win_end: u32,
    output: &mut Vec<u32>,
    undesired: &mut Vec<(u32, UndesiredKind)>,
) {
    if !fired {
        return;
    }
    if t < win_start {
        undesired.push((t, UndesiredKind::Early));
    } else if t > win_end {
        undesired.push((t, UndesiredKind::Late));
    } else {
        output.push(t);
    }
}

/// Float-backend convenience wrapper around [`simulate_neuron`].
pub fn simulate_neuron_f64(
    input_trains: &[SpikeTrain],
    weights: &[f64],
    cfg: &EfConfig,
    horizon: u32,
    trace: bool,
) -> Result<NeuronSim> {
    simulate_neuron::<f64>(input_trains, weights, cfg, horizon, (), trace)
}

/// Closed-form first output spike time (neuron-local clock) for a pre-reset
/// window-start potential `v` in the moderate band
/// [2^e_out_min, 2^(e_out_max+1)): `e_out_max - floor(log2 v) + (T_in - 1)`.
pub fn first_spike_time_closed_form(v: f64, cfg: &EfConfig) -> Result<u32> {
    let out = cfg.output_range;
    if !v.is_finite() || v < out.min_value() || v >= out.saturation() {
        return Err(Error::Domain(format!(
            "first-spike closed form needs {} <= v < {}, got {v}",
            out.min_value(),
            out.saturation()
        )));
    }
    Ok((out.e_max() - floor_log2(v)) as u32 + cfg.t_in() - 1)
}

/// Closed-form multi-spike output times (neuron-local clock) for a
/// pre-reset window-start potential `v`: the greedy power-of-two peeling
/// recurrence in the moderate band, every window step when saturated, and
/// no spikes below 2^e_out_min.
pub fn spike_times_closed_form(v: f64, cfg: &EfConfig) -> Result<Vec<u32>> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("potential must be finite, got {v}")));
    }
    let out = cfg.output_range;
    let offset = cfg.t_in() - 1;
    if v < out.min_value() {
        return Ok(Vec::new());
    }
    if v >= out.saturation() {
        return Ok((0..out.window_len()).map(|k| offset + k).collect());
    }
    // Moderate band: each spike time comes from the leading power of two of
    // what is left after removing the powers already spiked. The
    // subtractions are exact: each removes the current leading binary digit.
    let mut times = Vec::new();
    let mut rem = v;
    loop {
        let e = floor_log2(rem);
        if e < out.e_min() {
            break;
        }
        times.push(offset + (out.e_max() - e) as u32);
        rem -= pow2(e);
        if rem <= 0.0 {
            break;
        }
    }
    Ok(times)
}
