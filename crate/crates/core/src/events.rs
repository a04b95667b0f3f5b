use crate::{Error, Result};

pub const MIN_PITCH: u8 = 21;
pub const MAX_PITCH: u8 = 108;
pub const NUM_PIANO_KEYS: usize = 88;

/// One note: pitch, onset, offset, velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteEvent {
    pitch: u8,
    onset_seconds: f64,
    offset_seconds: f64,
    velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset_seconds: f64, offset_seconds: f64, velocity: u8) -> Result<Self> {
        if !(MIN_PITCH..=MAX_PITCH).contains(&pitch) {
            return Err(Error::PitchOutOfRange(pitch as i64));
        }
        if !(1..=127).contains(&velocity) {
            return Err(Error::VelocityOutOfRange(velocity as i64));
        }
        check_span(onset_seconds, offset_seconds)?;
        Ok(Self { pitch, onset_seconds, offset_seconds, velocity })
    }

    /// Note for piano key index `key` (0 = A0).
    pub fn from_key(key: usize, onset: f64, offset: f64, velocity: u8) -> Result<Self> {
        if key >= NUM_PIANO_KEYS {
            return Err(Error::PitchOutOfRange(key as i64 + MIN_PITCH as i64));
        }
        Self::new(key as u8 + MIN_PITCH, onset, offset, velocity)
    }

    pub fn pitch(&self) -> u8 {
        self.pitch
    }

    pub fn key(&self) -> usize {
        (self.pitch - MIN_PITCH) as usize
    }

    pub fn onset_seconds(&self) -> f64 {
        self.onset_seconds
    }

    pub fn offset_seconds(&self) -> f64 {
        self.offset_seconds
    }

    pub fn duration_seconds(&self) -> f64 {
        self.offset_seconds - self.onset_seconds
    }

    pub fn velocity(&self) -> u8 {
        self.velocity
    }
}

/// A sustain-pedal span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedalEvent {
    onset_seconds: f64,
    offset_seconds: f64,
}

impl PedalEvent {
    pub fn new(onset_seconds: f64, offset_seconds: f64) -> Result<Self> {
        check_span(onset_seconds, offset_seconds)?;
        Ok(Self { onset_seconds, offset_seconds })
    }

    pub fn onset_seconds(&self) -> f64 {
        self.onset_seconds
    }

    pub fn offset_seconds(&self) -> f64 {
        self.offset_seconds
    }
}

fn check_span(onset: f64, offset: f64) -> Result<()> {
    if onset.is_finite() && offset.is_finite() && onset >= 0.0 && onset < offset {
        Ok(())
    } else {
        Err(Error::InvalidEventTime { onset, offset })
    }
}

/// Notes and pedal spans of one performance.
///
/// Notes are kept sorted by (onset, pitch) and pedals by onset; pedal spans
/// never overlap. The duration always covers the last event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoteSequence {
    notes: Vec<NoteEvent>,
    pedals: Vec<PedalEvent>,
    duration_seconds: f64,
}

impl NoteSequence {
    pub fn new(
        mut notes: Vec<NoteEvent>,
        mut pedals: Vec<PedalEvent>,
        duration_seconds: f64,
    ) -> Result<Self> {
        if !(duration_seconds.is_finite() && duration_seconds >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sequence duration must be non-negative, got {duration_seconds}"
            )));
        }
        sort_notes(&mut notes);
        pedals.sort_by(|a, b| a.onset_seconds.total_cmp(&b.onset_seconds));
        for pair in pedals.windows(2) {
            if pair[1].onset_seconds < pair[0].offset_seconds {
                return Err(Error::OverlappingPedals(
                    pair[0].onset_seconds,
                    pair[0].offset_seconds,
                    pair[1].onset_seconds,
                    pair[1].offset_seconds,
                ));
            }
        }
        let last = notes
            .iter()
            .map(|n| n.offset_seconds)
            .chain(pedals.iter().map(|p| p.offset_seconds))
            .fold(0.0, f64::max);
        Ok(Self { notes, pedals, duration_seconds: duration_seconds.max(last) })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn notes(&self) -> &[NoteEvent] {
        &self.notes
    }

    pub fn pedals(&self) -> &[PedalEvent] {
        &self.pedals
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration_seconds
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty() && self.pedals.is_empty()
    }

    /// Notes of one piano key, in onset order.
    pub fn notes_for_key(&self, key: usize) -> impl Iterator<Item = &NoteEvent> {
        self.notes.iter().filter(move |n| n.key() == key)
    }
}

pub(crate) fn sort_notes(notes: &mut [NoteEvent]) {
    notes.sort_by(|a, b| {
        a.onset_seconds.total_cmp(&b.onset_seconds).then(a.pitch.cmp(&b.pitch))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn note_validation() {
        assert!(NoteEvent::new(60, 0.5, 1.0, 100).is_ok());
        assert!(matches!(NoteEvent::new(20, 0.5, 1.0, 100), Err(Error::PitchOutOfRange(20))));
        assert!(NoteEvent::new(109, 0.5, 1.0, 100).is_err());
        assert!(NoteEvent::new(60, 0.5, 1.0, 0).is_err());
        assert!(NoteEvent::new(60, 0.5, 1.0, 128).is_err());
        assert!(NoteEvent::new(60, 1.0, 1.0, 1).is_err());
        assert!(NoteEvent::new(60, -0.1, 1.0, 1).is_err());
        assert!(NoteEvent::new(60, 0.0, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn pitch_key_bijection() {
        for pitch in MIN_PITCH..=MAX_PITCH {
            let n = NoteEvent::new(pitch, 0.0, 1.0, 64).unwrap();
            assert_eq!(NoteEvent::from_key(n.key(), 0.0, 1.0, 64).unwrap().pitch(), pitch);
        }
        assert!(NoteEvent::from_key(88, 0.0, 1.0, 64).is_err());
    }

    #[test]
    fn sequence_sorts_and_covers_events() {
        let a = NoteEvent::new(64, 1.0, 2.0, 90).unwrap();
        let b = NoteEvent::new(60, 1.0, 1.5, 90).unwrap();
        let c = NoteEvent::new(70, 0.5, 3.0, 90).unwrap();
        let seq = NoteSequence::new(vec![a, b, c], vec![], 1.0).unwrap();
        let pitches: Vec<u8> = seq.notes().iter().map(|n| n.pitch()).collect();
        assert_eq!(pitches, vec![70, 60, 64]);
        assert_eq!(seq.duration_seconds(), 3.0);
    }

    #[test]
    fn overlapping_pedals_rejected() {
        let p = PedalEvent::new(1.0, 2.0).unwrap();
        let q = PedalEvent::new(1.5, 2.5).unwrap();
        assert!(matches!(NoteSequence::new(vec![], vec![q, p], 0.0), Err(Error::OverlappingPedals(..))));
        let r = PedalEvent::new(2.0, 2.5).unwrap();
        assert!(NoteSequence::new(vec![], vec![r, p], 0.0).is_ok());
    }
}
