//! Frame coordinate system and the T×K value grids shared by every stage.
//!
//! Frame `i` is centered at `i × hop` seconds, so frame 0 sits at t = 0 and a
//! 10 s clip at a 10 ms hop has 1001 frames.

use crate::{Error, Result, DEFAULT_THRESHOLD};

/// Frame centers within this fraction of a frame of an event time are treated
/// as coincident with it when deciding interval membership.
pub(crate) const FRAME_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    hop_seconds: f64,
    num_frames: usize,
    num_keys: usize,
}

impl TimeGrid {
    pub fn new(hop_seconds: f64, num_frames: usize, num_keys: usize) -> Result<Self> {
        if !(hop_seconds.is_finite() && hop_seconds > 0.0) {
            return Err(Error::InvalidGrid(format!("hop must be positive, got {hop_seconds}")));
        }
        if num_frames == 0 {
            return Err(Error::InvalidGrid("a grid needs at least one frame".into()));
        }
        if num_keys == 0 {
            return Err(Error::InvalidGrid("a grid needs at least one key".into()));
        }
        Ok(Self { hop_seconds, num_frames, num_keys })
    }

    /// Smallest grid whose last frame center is at or after `duration_seconds`.
    pub fn covering(duration_seconds: f64, hop_seconds: f64, num_keys: usize) -> Result<Self> {
        if !(duration_seconds.is_finite() && duration_seconds >= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "duration must be non-negative, got {duration_seconds}"
            )));
        }
        if !(hop_seconds.is_finite() && hop_seconds > 0.0) {
            return Err(Error::InvalidGrid(format!("hop must be positive, got {hop_seconds}")));
        }
        let frames = (duration_seconds / hop_seconds - FRAME_SNAP).ceil().max(0.0) as usize + 1;
        Self::new(hop_seconds, frames, num_keys)
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_seconds
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_keys(&self) -> usize {
        self.num_keys
    }

    /// Same frame axis with a different key count.
    pub fn with_keys(&self, num_keys: usize) -> Result<Self> {
        Self::new(self.hop_seconds, self.num_frames, num_keys)
    }

    /// Time of the last frame center.
    pub fn end_seconds(&self) -> f64 {
        self.center(self.num_frames - 1)
    }

    pub fn frame_center_time(&self, index: usize) -> Result<f64> {
        if index >= self.num_frames {
            return Err(Error::FrameOutOfRange { index, num_frames: self.num_frames });
        }
        Ok(self.center(index))
    }

    /// Unchecked center time; callers guarantee `index < num_frames`.
    pub(crate) fn center(&self, index: usize) -> f64 {
        index as f64 * self.hop_seconds
    }

    /// Position of `t` on the frame axis, in frames.
    pub(crate) fn frame_position(&self, t: f64) -> f64 {
        t / self.hop_seconds
    }

    /// Index of the frame center closest to `t`; ties go to the earlier frame
    /// and the result is clamped to the grid. A time within `FRAME_SNAP`
    /// frames of a midpoint counts as a tie, so decimal inputs such as
    /// 0.035 s at a 10 ms hop tie despite binary rounding.
    pub fn nearest_frame(&self, t: f64) -> usize {
        let x = self.frame_position(t.max(0.0));
        let lower = x.floor();
        let index = if x - lower > 0.5 + FRAME_SNAP { lower + 1.0 } else { lower };
        (index as usize).min(self.num_frames - 1)
    }

    /// First frame whose center is at or after `t` (may equal `num_frames`).
    pub(crate) fn first_frame_at_or_after(&self, t: f64) -> usize {
        let x = self.frame_position(t.max(0.0));
        ((x - FRAME_SNAP).ceil().max(0.0) as usize).min(self.num_frames)
    }
}

/// A T×K matrix of values in [0, 1], stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionGrid {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl RegressionGrid {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.num_frames * grid.num_keys;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: values.len() });
        }
        if let Some((pos, &value)) =
            values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange {
                frame: pos / grid.num_keys,
                key: pos % grid.num_keys,
                value,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { values: vec![0.0; grid.num_frames * grid.num_keys], grid }
    }

    /// Builds a grid from per-key columns of length T.
    pub fn from_columns(grid: TimeGrid, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.len() != grid.num_keys {
            return Err(Error::ShapeMismatch(format!(
                "{} columns supplied for a grid with {} keys",
                columns.len(),
                grid.num_keys
            )));
        }
        let mut values = vec![0.0; grid.num_frames * grid.num_keys];
        for (k, column) in columns.iter().enumerate() {
            if column.len() != grid.num_frames {
                return Err(Error::DimensionMismatch {
                    expected: grid.num_frames,
                    actual: column.len(),
                });
            }
            for (t, &v) in column.iter().enumerate() {
                values[t * grid.num_keys + k] = v;
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, frame: usize, key: usize) -> f64 {
        self.values[frame * self.grid.num_keys + key]
    }

    pub fn column(&self, key: usize) -> Vec<f64> {
        (0..self.grid.num_frames).map(|t| self.get(t, key)).collect()
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let k = self.grid.num_keys;
        &self.values[frame * k..(frame + 1) * k]
    }

    /// Whether every cell is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Decision thresholds for note and pedal decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub onset: f64,
    pub offset: f64,
    pub frame: f64,
    pub pedal_onset: f64,
    pub pedal_offset: f64,
    pub pedal_frame: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::uniform(DEFAULT_THRESHOLD)
    }
}

impl Thresholds {
    /// Every threshold set to `value`; not validated.
    pub fn uniform(value: f64) -> Self {
        Self {
            onset: value,
            offset: value,
            frame: value,
            pedal_onset: value,
            pedal_offset: value,
            pedal_frame: value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("onset", self.onset),
            ("offset", self.offset),
            ("frame", self.frame),
            ("pedal_onset", self.pedal_onset),
            ("pedal_offset", self.pedal_offset),
            ("pedal_frame", self.pedal_frame),
        ];
        for (name, value) in named {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}
