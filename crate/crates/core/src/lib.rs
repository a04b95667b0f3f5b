//! # hrpiano
//!
//! The deterministic half of a high-resolution piano transcription system.
//!
//! Ground-truth MIDI is encoded into triangular regression targets on a frame
//! grid; model-output grids (or those same targets) are decoded back into
//! note and sustain-pedal events whose onset and offset times are refined
//! below the frame hop by an analytic three-point construction; transcriptions
//! are scored with tolerance-parameterized one-to-one matching.
//!
//! ## Pipeline
//!
//! ```text
//!  SMF bytes ──midi::parse_midi──▶ NoteSequence ──encode::*──▶ grids (T×K)
//!                                                               │
//!  SMF bytes ◀──midi::write_midi── NoteSequence ◀──decode::*────┘
//! ```
//!
//! ```
//! use hrpiano::{encode, decode, NoteEvent, NoteSequence, Thresholds, TimeGrid};
//!
//! let note = NoteEvent::new(60, 1.234, 1.5, 100)?;
//! let seq = NoteSequence::new(vec![note], vec![], 3.0)?;
//! let grid = TimeGrid::covering(seq.duration_seconds(), 0.01, 88)?;
//! let targets = encode::encode_note_targets(&seq, &grid, 5)?;
//! let bundle = decode::NoteGridBundle::from_targets(&targets, &seq, 5)?;
//! let notes = decode::decode_notes(&bundle, &Thresholds::default())?;
//! assert_eq!(notes.len(), 1);
//! assert!((notes[0].onset_seconds() - 1.234).abs() < 1e-9);
//! # Ok::<(), hrpiano::Error>(())
//! ```

pub mod decode;
pub mod encode;
pub mod error;
pub mod eval;
pub mod events;
pub mod grid;
pub mod grid_io;
pub mod midi;
pub mod noise;
pub mod peak;
pub mod pipeline;

pub use error::{Error, Result};
pub use events::{NoteEvent, NoteSequence, PedalEvent, MAX_PITCH, MIN_PITCH, NUM_PIANO_KEYS};
pub use grid::{RegressionGrid, Thresholds, TimeGrid};

/// Default hop between frame centers, in seconds.
pub const DEFAULT_HOP_SECONDS: f64 = 0.01;

/// Default sharpness of the regression targets (frames on each side of an event).
pub const DEFAULT_J: usize = 5;

/// Default decision threshold used for every detector.
pub const DEFAULT_THRESHOLD: f64 = 0.3;
