//! Encode → decode → evaluate, in memory.

use crate::decode::{decode_notes, decode_pedals, NoteGridBundle, PedalGridBundle};
use crate::encode::{encode_note_targets, encode_pedal_targets};
use crate::eval::{match_notes, match_pedals, EvalResult, MatchConfig};
use crate::events::{NoteSequence, NUM_PIANO_KEYS};
use crate::grid::{Thresholds, TimeGrid};
use crate::noise::{perturb_events, NoiseConfig};
use crate::{Result, DEFAULT_HOP_SECONDS, DEFAULT_J};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripConfig {
    pub hop_seconds: f64,
    pub j: usize,
    pub thresholds: Thresholds,
    /// Perturbs the labels before encoding.
    pub noise: Option<NoiseConfig>,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        Self { hop_seconds: DEFAULT_HOP_SECONDS, j: DEFAULT_J, thresholds: Thresholds::default(), noise: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    pub decoded: NoteSequence,
    /// Over notes matched by onset; 0 when nothing matched.
    pub max_onset_error_ms: f64,
    pub mean_onset_error_ms: f64,
    pub max_velocity_error: u8,
    pub note: EvalResult,
    pub note_with_offset: EvalResult,
    pub note_with_offset_velocity: EvalResult,
    pub pedal: EvalResult,
    pub pedal_with_offset: EvalResult,
}

impl RoundtripReport {
    pub fn summary_text(&self) -> String {
        let pct = |r: &EvalResult| 100.0 * r.f1;
        format!(
            "notes: {} decoded\n\
             max onset error: {:.6} ms\n\
             mean onset error: {:.6} ms\n\
             max velocity error: {}\n\
             Note F1: {:.2}%\n\
             Note w/ offset F1: {:.2}%\n\
             Note w/ offset & velocity F1: {:.2}%\n\
             Pedal F1: {:.2}%\n\
             Pedal w/ offset F1: {:.2}%\n",
            self.decoded.notes().len(),
            self.max_onset_error_ms,
            self.mean_onset_error_ms,
            self.max_velocity_error,
            pct(&self.note),
            pct(&self.note_with_offset),
            pct(&self.note_with_offset_velocity),
            pct(&self.pedal),
            pct(&self.pedal_with_offset),
        )
    }
}

/// Encodes `seq` (optionally perturbed), feeds the targets straight to the
/// decoders, and scores the result against the unperturbed `seq`.
pub fn roundtrip(seq: &NoteSequence, cfg: &RoundtripConfig) -> Result<RoundtripReport> {
    let labels = match &cfg.noise {
        Some(noise) => perturb_events(seq, noise),
        None => seq.clone(),
    };
    let grid = TimeGrid::covering(labels.duration_seconds(), cfg.hop_seconds, NUM_PIANO_KEYS)?;
    let targets = encode_note_targets(&labels, &grid, cfg.j)?;
    let notes = decode_notes(&NoteGridBundle::from_targets(&targets, &labels, cfg.j)?, &cfg.thresholds)?;
    let pedal_targets = encode_pedal_targets(&labels, &grid.with_keys(1)?, cfg.j)?;
    let pedals = decode_pedals(&PedalGridBundle::from_targets(&pedal_targets)?, &cfg.thresholds)?;
    let decoded = NoteSequence::new(notes, pedals, grid.end_seconds())?;
    Ok(score(seq, decoded))
}

fn score(reference: &NoteSequence, decoded: NoteSequence) -> RoundtripReport {
    let (r, e) = (reference.notes(), decoded.notes());
    let note = match_notes(r, e, &MatchConfig::onset_only());
    let errors: Vec<f64> = note
        .matched_pairs
        .iter()
        .map(|&(ri, ei)| (r[ri].onset_seconds() - e[ei].onset_seconds()).abs() * 1e3)
        .collect();
    let max_velocity_error = note
        .matched_pairs
        .iter()
        .map(|&(ri, ei)| r[ri].velocity().abs_diff(e[ei].velocity()))
        .max()
        .unwrap_or(0);
    RoundtripReport {
        max_onset_error_ms: errors.iter().copied().fold(0.0, f64::max),
        mean_onset_error_ms: if errors.is_empty() { 0.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 },
        max_velocity_error,
        note_with_offset: match_notes(r, e, &MatchConfig::with_offset()),
        note_with_offset_velocity: match_notes(r, e, &MatchConfig::with_offset_and_velocity()),
        pedal: match_pedals(reference.pedals(), decoded.pedals(), &MatchConfig::onset_only()),
        pedal_with_offset: match_pedals(reference.pedals(), decoded.pedals(), &MatchConfig::with_offset()),
        note,
        decoded,
    }
}
