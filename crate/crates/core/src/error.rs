use thiserror::Error;

use crate::grid_io::GridIoError;
use crate::midi::MidiError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("frame index {index} out of range for a grid of {num_frames} frames")]
    FrameOutOfRange { index: usize, num_frames: usize },

    #[error("grid value {value} at frame {frame}, key {key} is outside [0, 1]")]
    ValueOutOfRange { frame: usize, key: usize, value: f64 },

    #[error("expected {expected} grid values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("pitch {0} is outside the piano range 21..=108")]
    PitchOutOfRange(i64),

    #[error("velocity {0} is outside 1..=127")]
    VelocityOutOfRange(i64),

    #[error("invalid event time: onset {onset} s, offset {offset} s")]
    InvalidEventTime { onset: f64, offset: f64 },

    #[error("pedal spans overlap: [{0}, {1}) and [{2}, {3})")]
    OverlappingPedals(f64, f64, f64, f64),

    #[error("invalid threshold {name} = {value}; thresholds must lie in (0, 1)")]
    InvalidThreshold { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Midi(#[from] MidiError),

    #[error(transparent)]
    GridIo(#[from] GridIoError),
}
