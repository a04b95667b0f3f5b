//! Model-output grids to note and pedal events.

mod notes;
mod pedals;

pub use notes::decode_notes;
pub use pedals::decode_pedals;

use crate::encode::{self, EncodedNoteTargets, EncodedPedalTargets};
use crate::events::{NoteSequence, NUM_PIANO_KEYS};
use crate::grid::{RegressionGrid, TimeGrid};
use crate::{Error, Result};

/// The four note-system outputs: frame probability, onset and offset
/// regression, and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteGridBundle {
    pub frame: RegressionGrid,
    pub onset_reg: RegressionGrid,
    pub offset_reg: RegressionGrid,
    pub velocity: RegressionGrid,
}

impl NoteGridBundle {
    pub fn new(
        frame: RegressionGrid,
        onset_reg: RegressionGrid,
        offset_reg: RegressionGrid,
        velocity: RegressionGrid,
    ) -> Result<Self> {
        let bundle = Self { frame, onset_reg, offset_reg, velocity };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Bundle an ideal model would output for `targets`: the frame roll and
    /// regression targets as-is, velocity spread over each onset window.
    pub fn from_targets(targets: &EncodedNoteTargets, seq: &NoteSequence, j: usize) -> Result<Self> {
        let velocity = encode::encode_velocity_window(seq, targets.onset_reg.grid(), j)?;
        Self::new(
            targets.frame_roll.clone(),
            targets.onset_reg.clone(),
            targets.offset_reg.clone(),
            velocity,
        )
    }

    pub fn grid(&self) -> &TimeGrid {
        self.frame.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.frame.grid();
        if grid.num_keys() != NUM_PIANO_KEYS {
            return Err(Error::ShapeMismatch(format!(
                "note grids need {NUM_PIANO_KEYS} keys, got {}",
                grid.num_keys()
            )));
        }
        for (name, other) in
            [("onset", &self.onset_reg), ("offset", &self.offset_reg), ("velocity", &self.velocity)]
        {
            if other.grid() != grid {
                return Err(Error::ShapeMismatch(format!(
                    "{name} grid {:?} differs from frame grid {:?}",
                    other.grid(),
                    grid
                )));
            }
        }
        Ok(())
    }
}

/// The three pedal-system outputs, each T×1.
#[derive(Debug, Clone, PartialEq)]
pub struct PedalGridBundle {
    pub frame: RegressionGrid,
    /// Carried for format completeness; pedal onsets are read from `frame`.
    pub onset_reg: RegressionGrid,
    pub offset_reg: RegressionGrid,
}

impl PedalGridBundle {
    pub fn new(frame: RegressionGrid, onset_reg: RegressionGrid, offset_reg: RegressionGrid) -> Result<Self> {
        let bundle = Self { frame, onset_reg, offset_reg };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn from_targets(targets: &EncodedPedalTargets) -> Result<Self> {
        Self::new(targets.frame_roll.clone(), targets.onset_reg.clone(), targets.offset_reg.clone())
    }

    pub fn grid(&self) -> &TimeGrid {
        self.frame.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.frame.grid();
        if grid.num_keys() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "pedal grids need 1 key, got {}",
                grid.num_keys()
            )));
        }
        for (name, other) in [("onset", &self.onset_reg), ("offset", &self.offset_reg)] {
            if other.grid() != grid {
                return Err(Error::ShapeMismatch(format!(
                    "pedal {name} grid {:?} differs from frame grid {:?}",
                    other.grid(),
                    grid
                )));
            }
        }
        Ok(())
    }
}
