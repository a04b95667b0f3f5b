//! Training-target encoding.
//!
//! Onsets and offsets become triangles on the frame axis: a frame at distance
//! `d` seconds from an event gets `max(0, 1 − |d| / (J·hop))`, so each event
//! touches `2J` frames around it. Nearby triangles on one key combine by
//! elementwise maximum.

use crate::events::{NoteSequence, NUM_PIANO_KEYS};
use crate::grid::{RegressionGrid, TimeGrid};
use crate::{Error, Result};

/// Note-system targets, all on one time grid with 88 keys.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedNoteTargets {
    pub onset_reg: RegressionGrid,
    pub offset_reg: RegressionGrid,
    pub frame_roll: RegressionGrid,
    pub velocity_roll: RegressionGrid,
    pub onset_mask: RegressionGrid,
}

/// Pedal-system targets on a single-key grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPedalTargets {
    pub onset_reg: RegressionGrid,
    pub offset_reg: RegressionGrid,
    pub frame_roll: RegressionGrid,
}

fn check_j(j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidParameter("J must be at least 1".into()));
    }
    Ok(())
}

fn clip_time(t: f64, grid: &TimeGrid) -> f64 {
    t.clamp(0.0, grid.end_seconds())
}

/// One column of triangular regression values for the given event times.
pub fn encode_regression_track(event_times: &[f64], grid: &TimeGrid, j: usize) -> Vec<f64> {
    assert!(j >= 1, "J must be at least 1");
    let mut column = vec![0.0; grid.num_frames()];
    add_triangles(&mut column, event_times, grid, j);
    column
}

fn add_triangles(column: &mut [f64], event_times: &[f64], grid: &TimeGrid, j: usize) {
    let width = j as f64;
    let last = column.len() - 1;
    for &t in event_times {
        let x = grid.frame_position(clip_time(t, grid));
        let lo = (x - width).ceil().max(0.0) as usize;
        let hi = ((x + width).floor() as usize).min(last);
        for (i, cell) in column.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let value = 1.0 - (i as f64 - x).abs() / width;
            if value > *cell {
                *cell = value;
            }
        }
    }
}

/// Marks frames whose centers fall in `[onset, offset)`; a span that covers
/// no frame center marks the frame nearest its onset.
fn mark_span(column: &mut [f64], onset: f64, offset: f64, grid: &TimeGrid) {
    let start = grid.first_frame_at_or_after(onset);
    let end = grid.first_frame_at_or_after(offset);
    if start < end {
        column[start..end].fill(1.0);
    } else {
        column[grid.nearest_frame(clip_time(onset, grid))] = 1.0;
    }
}

pub fn encode_note_targets(
    seq: &NoteSequence,
    grid: &TimeGrid,
    j: usize,
) -> Result<EncodedNoteTargets> {
    check_j(j)?;
    let grid = grid.with_keys(NUM_PIANO_KEYS)?;
    let frames = grid.num_frames();
    let mut onset_cols = vec![vec![0.0; frames]; NUM_PIANO_KEYS];
    let mut offset_cols = onset_cols.clone();
    let mut frame_cols = onset_cols.clone();
    let mut velocity_cols = onset_cols.clone();
    let mut mask_cols = onset_cols.clone();

    for key in 0..NUM_PIANO_KEYS {
        let notes: Vec<_> = seq.notes_for_key(key).collect();
        if notes.is_empty() {
            continue;
        }
        let onsets: Vec<f64> = notes.iter().map(|n| n.onset_seconds()).collect();
        let offsets: Vec<f64> = notes.iter().map(|n| n.offset_seconds()).collect();
        add_triangles(&mut onset_cols[key], &onsets, &grid, j);
        add_triangles(&mut offset_cols[key], &offsets, &grid, j);
        for n in &notes {
            mark_span(&mut frame_cols[key], n.onset_seconds(), n.offset_seconds(), &grid);
            let frame = grid.nearest_frame(clip_time(n.onset_seconds(), &grid));
            mask_cols[key][frame] = 1.0;
            velocity_cols[key][frame] = n.velocity() as f64 / 127.0;
        }
    }

    Ok(EncodedNoteTargets {
        onset_reg: RegressionGrid::from_columns(grid, &onset_cols)?,
        offset_reg: RegressionGrid::from_columns(grid, &offset_cols)?,
        frame_roll: RegressionGrid::from_columns(grid, &frame_cols)?,
        velocity_roll: RegressionGrid::from_columns(grid, &velocity_cols)?,
        onset_mask: RegressionGrid::from_columns(grid, &mask_cols)?,
    })
}

/// Velocity spread over each onset's `2J`-frame window, each frame taking the
/// velocity of its nearest onset on the same key. This is the shape an ideal
/// velocity model produces around an onset, and is what decoding from targets
/// reads velocities from.
pub fn encode_velocity_window(seq: &NoteSequence, grid: &TimeGrid, j: usize) -> Result<RegressionGrid> {
    check_j(j)?;
    let grid = grid.with_keys(NUM_PIANO_KEYS)?;
    let frames = grid.num_frames();
    let width = j as f64;
    let mut cols = vec![vec![0.0; frames]; NUM_PIANO_KEYS];
    for key in 0..NUM_PIANO_KEYS {
        let mut best = vec![f64::INFINITY; frames];
        for n in seq.notes_for_key(key) {
            let x = grid.frame_position(clip_time(n.onset_seconds(), &grid));
            let lo = (x - width).floor().max(0.0) as usize;
            let hi = ((x + width).ceil() as usize).min(frames - 1);
            for i in lo..=hi {
                let d = (i as f64 - x).abs();
                if d < best[i] {
                    best[i] = d;
                    cols[key][i] = n.velocity() as f64 / 127.0;
                }
            }
        }
    }
    RegressionGrid::from_columns(grid, &cols)
}

pub fn encode_pedal_targets(
    seq: &NoteSequence,
    grid: &TimeGrid,
    j: usize,
) -> Result<EncodedPedalTargets> {
    check_j(j)?;
    let grid = grid.with_keys(1)?;
    let pedals = seq.pedals();
    for pair in pedals.windows(2) {
        if pair[1].onset_seconds() < pair[0].offset_seconds() {
            return Err(Error::OverlappingPedals(
                pair[0].onset_seconds(),
                pair[0].offset_seconds(),
                pair[1].onset_seconds(),
                pair[1].offset_seconds(),
            ));
        }
    }
    let onsets: Vec<f64> = pedals.iter().map(|p| p.onset_seconds()).collect();
    let offsets: Vec<f64> = pedals.iter().map(|p| p.offset_seconds()).collect();
    let mut frame = vec![0.0; grid.num_frames()];
    for p in pedals {
        mark_span(&mut frame, p.onset_seconds(), p.offset_seconds(), &grid);
    }
    Ok(EncodedPedalTargets {
        onset_reg: RegressionGrid::new(grid, encode_regression_track(&onsets, &grid, j))?,
        offset_reg: RegressionGrid::new(grid, encode_regression_track(&offsets, &grid, j))?,
        frame_roll: RegressionGrid::new(grid, frame)?,
    })
}

/// Binary piano roll of a sequence, using the same span rule as the frame targets.
pub fn rasterize_notes(seq: &NoteSequence, grid: &TimeGrid) -> Result<RegressionGrid> {
    let grid = grid.with_keys(NUM_PIANO_KEYS)?;
    let mut cols = vec![vec![0.0; grid.num_frames()]; NUM_PIANO_KEYS];
    for n in seq.notes() {
        mark_span(&mut cols[n.key()], n.onset_seconds(), n.offset_seconds(), &grid);
    }
    RegressionGrid::from_columns(grid, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{NoteEvent, PedalEvent};

    const HOP: f64 = 0.01;

    fn grid(frames: usize) -> TimeGrid {
        TimeGrid::new(HOP, frames, 1).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn event_on_frame_center() {
        let col = encode_regression_track(&[1.0], &grid(300), 5);
        let expected = [1.0, 0.8, 0.6, 0.4, 0.2, 0.0];
        for (d, e) in expected.iter().enumerate() {
            assert!(close(col[100 + d], *e), "frame +{d}: {}", col[100 + d]);
            assert!(close(col[100 - d], *e), "frame -{d}: {}", col[100 - d]);
        }
        assert_eq!(col.iter().filter(|v| **v > 0.0).count(), 9);
    }

    #[test]
    fn event_on_frame_boundary() {
        let col = encode_regression_track(&[1.005], &grid(300), 5);
        assert!(close(col[100], 0.9));
        assert!(close(col[101], 0.9));
        assert!(close(col[99], 0.7));
    }

    #[test]
    fn thirty_ms_distance() {
        let col = encode_regression_track(&[1.0], &grid(300), 5);
        assert!(close(col[103], 0.4));
        let col = encode_regression_track(&[1.004], &grid(300), 5);
        assert!(close(col[100], 0.92));
    }

    #[test]
    fn overlapping_events_take_nearest_distance() {
        let g = grid(300);
        let events = [1.0, 1.03];
        let col = encode_regression_track(&events, &g, 5);
        for (i, v) in col.iter().enumerate() {
            // brute force: distance to the nearest event
            let nearest = events
                .iter()
                .map(|e| (i as f64 * HOP - e).abs())
                .fold(f64::INFINITY, f64::min);
            let expect = (1.0 - nearest / (5.0 * HOP)).max(0.0);
            assert!((v - expect).abs() < 1e-9, "frame {i}: {v} vs {expect}");
        }
    }

    #[test]
    fn events_past_clip_end_are_clipped() {
        let col = encode_regression_track(&[5.0], &grid(100), 5);
        assert_eq!(col[99], 1.0);
        assert!(close(col[98], 0.8));
    }

    #[test]
    fn single_note_targets() {
        let n = NoteEvent::new(60, 1.0, 1.5, 100).unwrap();
        let seq = NoteSequence::new(vec![n], vec![], 3.0).unwrap();
        let g = TimeGrid::covering(3.0, HOP, 88).unwrap();
        let t = encode_note_targets(&seq, &g, 5).unwrap();
        assert_eq!(t.onset_reg.get(100, 39), 1.0);
        let on: Vec<usize> = (0..g.num_frames()).filter(|&i| t.frame_roll.get(i, 39) == 1.0).collect();
        assert_eq!(on, (100..150).collect::<Vec<_>>());
        assert_eq!(t.velocity_roll.get(100, 39), 100.0 / 127.0);
        assert_eq!(t.onset_mask.get(100, 39), 1.0);
        assert_eq!(t.onset_mask.values().iter().sum::<f64>(), 1.0);
        assert_eq!(t.offset_reg.get(150, 39), 1.0);
        for other in (0..88).filter(|&k| k != 39) {
            assert!(t.onset_reg.column(other).iter().all(|v| *v == 0.0));
        }
        assert!(t.frame_roll.is_binary() && t.onset_mask.is_binary());
    }

    #[test]
    fn empty_sequence_gives_zero_grids() {
        let g = TimeGrid::covering(1.0, HOP, 88).unwrap();
        let t = encode_note_targets(&NoteSequence::empty(), &g, 5).unwrap();
        for grid in [&t.onset_reg, &t.offset_reg, &t.frame_roll, &t.velocity_roll, &t.onset_mask] {
            assert!(grid.values().iter().all(|v| *v == 0.0));
        }
        let p = encode_pedal_targets(&NoteSequence::empty(), &g, 5).unwrap();
        assert!(p.frame_roll.values().iter().all(|v| *v == 0.0));
        assert_eq!(p.frame_roll.grid().num_keys(), 1);
    }

    #[test]
    fn sub_hop_note_marks_one_frame() {
        let n = NoteEvent::new(60, 1.004, 1.008, 100).unwrap();
        let seq = NoteSequence::new(vec![n], vec![], 2.0).unwrap();
        let g = TimeGrid::covering(2.0, HOP, 88).unwrap();
        let t = encode_note_targets(&seq, &g, 5).unwrap();
        let col = t.frame_roll.column(39);
        assert_eq!(col.iter().sum::<f64>(), 1.0);
        assert_eq!(col[100], 1.0);
    }

    #[test]
    fn velocity_only_under_onset_mask() {
        let notes = vec![
            NoteEvent::new(60, 0.5, 0.9, 30).unwrap(),
            NoteEvent::new(60, 1.0, 1.2, 120).unwrap(),
            NoteEvent::new(72, 0.5, 0.52, 1).unwrap(),
        ];
        let seq = NoteSequence::new(notes, vec![], 2.0).unwrap();
        let g = TimeGrid::covering(2.0, HOP, 88).unwrap();
        let t = encode_note_targets(&seq, &g, 5).unwrap();
        for (v, m) in t.velocity_roll.values().iter().zip(t.onset_mask.values()) {
            assert!(*v == 0.0 || *m == 1.0);
        }
    }

    #[test]
    fn velocity_window_covers_onset_triangle() {
        let notes = vec![
            NoteEvent::new(60, 0.5, 0.9, 30).unwrap(),
            NoteEvent::new(60, 0.56, 1.2, 120).unwrap(),
        ];
        let seq = NoteSequence::new(notes, vec![], 2.0).unwrap();
        let g = TimeGrid::covering(2.0, HOP, 88).unwrap();
        let w = encode_velocity_window(&seq, &g, 5).unwrap();
        assert_eq!(w.get(50, 39), 30.0 / 127.0);
        assert_eq!(w.get(52, 39), 30.0 / 127.0);
        assert_eq!(w.get(54, 39), 120.0 / 127.0);
        assert_eq!(w.get(56, 39), 120.0 / 127.0);
        assert_eq!(w.get(30, 39), 0.0);
    }

    #[test]
    fn pedal_targets() {
        let p = PedalEvent::new(1.0, 2.0).unwrap();
        let seq = NoteSequence::new(vec![], vec![p], 3.0).unwrap();
        let g = TimeGrid::covering(3.0, HOP, 1).unwrap();
        let t = encode_pedal_targets(&seq, &g, 5).unwrap();
        let on: Vec<usize> = (0..g.num_frames()).filter(|&i| t.frame_roll.get(i, 0) == 1.0).collect();
        assert_eq!(on, (100..200).collect::<Vec<_>>());
        assert_eq!(t.onset_reg.get(100, 0), 1.0);
        assert_eq!(t.offset_reg.get(200, 0), 1.0);

        let p = PedalEvent::new(1.004, 2.0).unwrap();
        let seq = NoteSequence::new(vec![], vec![p], 3.0).unwrap();
        let t = encode_pedal_targets(&seq, &g, 5).unwrap();
        assert!(close(t.onset_reg.get(100, 0), 0.92));
    }

    #[test]
    fn j_spans_two_j_frames() {
        for j in [2usize, 5, 10, 20] {
            let col = encode_regression_track(&[1.0], &grid(300), j);
            // apex plus 2(J−1) nonzero neighbors; the frames at ±J are exactly 0
            assert_eq!(col.iter().filter(|v| **v > 0.0).count(), 2 * j - 1);
        }
    }

    #[test]
    fn j_zero_is_rejected() {
        let g = TimeGrid::covering(1.0, HOP, 88).unwrap();
        assert!(encode_note_targets(&NoteSequence::empty(), &g, 0).is_err());
    }
}
