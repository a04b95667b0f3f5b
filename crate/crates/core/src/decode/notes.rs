use crate::decode::NoteGridBundle;
use crate::events::{sort_notes, NoteEvent, NUM_PIANO_KEYS};
use crate::grid::{Thresholds, TimeGrid};
use crate::peak::detect_and_refine;
use crate::Result;

/// Decodes note events from a note bundle.
///
/// Each key is processed on its own. An onset is a thresholded local maximum
/// of the onset regression, refined below the hop. Its offset is the first
/// frame after it where either the offset regression has a thresholded
/// maximum (refined) or the frame probability drops below the frame
/// threshold (frame-center time). A later onset on the same key truncates
/// the note. Notes still open at the end close on the last frame.
pub fn decode_notes(bundle: &NoteGridBundle, thresholds: &Thresholds) -> Result<Vec<NoteEvent>> {
    bundle.validate()?;
    thresholds.validate()?;
    let grid = bundle.grid();
    let mut notes = Vec::new();
    for key in 0..NUM_PIANO_KEYS {
        decode_key(bundle, key, grid, thresholds, &mut notes);
    }
    sort_notes(&mut notes);
    Ok(notes)
}

fn decode_key(
    bundle: &NoteGridBundle,
    key: usize,
    grid: &TimeGrid,
    thresholds: &Thresholds,
    out: &mut Vec<NoteEvent>,
) {
    let onset_col = bundle.onset_reg.column(key);
    let onsets = detect_and_refine(&onset_col, thresholds.onset, grid);
    if onsets.is_empty() {
        return;
    }
    let frames = grid.num_frames();
    let mut offset_at = vec![None; frames];
    for peak in detect_and_refine(&bundle.offset_reg.column(key), thresholds.offset, grid) {
        offset_at[peak.frame_index] = Some(peak.refined_time_seconds);
    }
    let frame_col = bundle.frame.column(key);

    for (idx, onset) in onsets.iter().enumerate() {
        let next = onsets.get(idx + 1);
        let scan_end = next.map_or(frames - 1, |n| n.frame_index);
        let found = (onset.frame_index + 1..=scan_end).find_map(|t| {
            offset_at[t].or_else(|| (frame_col[t] < thresholds.frame).then(|| grid.center(t)))
        });
        let offset = match (found, next) {
            (Some(off), Some(n)) => off.min(n.refined_time_seconds),
            (Some(off), None) => off,
            (None, Some(n)) => n.refined_time_seconds,
            (None, None) => grid.end_seconds(),
        };
        let velocity = (bundle.velocity.get(onset.frame_index, key) * 128.0).round().clamp(1.0, 127.0);
        // notes truncated to nothing are dropped
        if let Ok(note) = NoteEvent::from_key(key, onset.refined_time_seconds, offset, velocity as u8) {
            out.push(note);
        }
    }
}
