//! ANN-to-SNN conversion with logarithmic temporal coding.
//!
//! Activations are approximated by in-range powers of two and carried as
//! spike trains whose spike count grows logarithmically with magnitude.
//! Exponentiate-and-fire neurons evaluate those trains with nothing but
//! doublings and additions, and a converted network reproduces the analog
//! forward pass exactly whenever no neuron fires outside its window.
//!
//! Crate layout:
//! - [`coding`]: logarithmic approximation and spike-train codec
//! - [`fixed`]: exact fixed-point arithmetic backend
//! - [`ef_neuron`]: exponentiate-and-fire dynamics and closed-form oracles
//! - [`ann`]: minimal analog trainer (dense/conv/avg-pool, surrogate
//!   gradients, excess loss)
//! - [`converter`]: analog-to-spiking network mapping and verification
//! - [`snn`]: layered event-driven runtime with cost accounting
//! - [`rate`]: rate-coded integrate-and-fire baseline
//! - [`data`]: IDX files, splits, synthetic datasets
//! - [`manifest`]: model persistence (manifest + raw tensor blobs)

pub mod ann;
pub mod coding;
pub mod converter;
pub mod data;
pub mod ef_neuron;
pub mod error;
pub mod fixed;
pub mod manifest;
pub mod rate;
pub mod snn;

pub use coding::{
    decode_ltc, encode_ltc, la_derivative, multi_power_la, single_power_la, spike_count_bound,
    ExponentRange, LaVariant, SpikeTrain,
};
pub use ef_neuron::{EfConfig, EfNeuron, Potential, UndesiredKind};
pub use error::{Error, Result};
pub use fixed::FixedPoint;
