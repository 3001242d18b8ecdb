//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced by the coding, neuron, runtime, training, and I/O layers.
#[derive(Debug)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (negative or
    /// non-finite activation, value outside a required interval).
    Domain(String),
    /// A caller broke an API contract, e.g. a spike train presented to a
    /// decoder with a mismatched window length.
    Contract(String),
    /// Invalid network or range configuration.
    Config(String),
    /// Tensor shape mismatch.
    Shape(String),
    /// Fixed-point overflow. Identifies where the overflow happened.
    Overflow {
        layer: Option<usize>,
        neuron: Option<usize>,
        step: Option<u32>,
        what: &'static str,
    },
    /// A real value could not be represented exactly in the requested
    /// fixed-point format. Weights are never silently rounded.
    NonRepresentable { value: f64, frac_bits: u32 },
    /// Training diverged (non-finite loss).
    Divergence { epoch: usize, batch: usize },
    /// Weight normalization failed (e.g. a layer with no positive activation).
    Normalization(String),
    /// Malformed data file (IDX, manifest, weight blob).
    Format(String),
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Overflow {
                layer,
                neuron,
                step,
                what,
            } => {
                write!(f, "fixed-point overflow during {what}")?;
                if let Some(l) = layer {
                    write!(f, ", layer {l}")?;
                }
                if let Some(n) = neuron {
                    write!(f, ", neuron {n}")?;
                }
                if let Some(t) = step {
                    write!(f, ", time step {t}")?;
                }
                Ok(())
            }
            Error::NonRepresentable { value, frac_bits } => write!(
                f,
                "value {value} is not exactly representable with {frac_bits} fractional bits"
            ),
            Error::Divergence { epoch, batch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}, batch {batch}")
            }
            Error::Normalization(msg) => write!(f, "weight normalization failed: {msg}"),
            Error::Format(msg) => write!(f, "malformed file: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
