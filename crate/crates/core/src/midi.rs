//! Standard MIDI File (format 0/1) reading and writing.
//!
//! Parsing keeps notes and sustain-pedal spans as independent streams: the
//! pedal never lengthens note offsets. A CC64 value of 64 or more presses the
//! pedal, anything lower releases it.

use thiserror::Error;

use crate::events::{NoteEvent, NoteSequence, PedalEvent, MAX_PITCH, MIN_PITCH};

const SUSTAIN_CONTROLLER: u8 = 64;
const SUSTAIN_ON_MIN: u8 = 64;
const DEFAULT_TEMPO_US: u32 = 500_000;
const MAX_VLQ: u64 = 0x0FFF_FFFF;

#[derive(Debug, Error, PartialEq)]
pub enum MidiError {
    #[error("unexpected end of data at byte {offset}: needed {needed} more byte(s)")]
    UnexpectedEof { offset: usize, needed: usize },

    #[error("expected chunk {expected:?} at byte {offset}, found {found:?}")]
    BadChunk { offset: usize, expected: &'static str, found: String },

    #[error("header chunk at byte {offset} has length {length}, expected at least 6")]
    BadHeaderLength { offset: usize, length: u32 },

    #[error("unsupported SMF format {0}; only formats 0 and 1 are read")]
    UnsupportedFormat(u16),

    #[error("invalid time division {0:#06x}")]
    InvalidDivision(u16),

    #[error("variable-length quantity at byte {offset} is longer than 4 bytes")]
    InvalidVlq { offset: usize },

    #[error("data byte at byte {offset} with no running status")]
    MissingRunningStatus { offset: usize },

    #[error("invalid status byte {status:#04x} at byte {offset}")]
    InvalidStatus { offset: usize, status: u8 },

    #[error("data byte {value:#04x} at byte {offset} has its high bit set")]
    InvalidDataByte { offset: usize, value: u8 },

    #[error("tempo meta event at byte {offset} is malformed")]
    InvalidTempo { offset: usize },

    #[error("note {pitch} at byte {offset} is outside the piano range 21..=108")]
    PitchOutOfRange { pitch: u8, offset: usize },

    #[error("event time {seconds} s exceeds the representable tick range")]
    TickOverflow { seconds: f64 },

    #[error("invalid writer setting: {0}")]
    InvalidSetting(String),
}

type MidiResult<T> = std::result::Result<T, MidiError>;

/// Timing of ticks: metrical (ticks per quarter, tempo-dependent) or absolute SMPTE.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Division {
    TicksPerQuarter(u16),
    TicksPerSecond(f64),
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    NoteOn { pitch: u8, velocity: u8 },
    NoteOff { pitch: u8 },
    Sustain { value: u8 },
    Tempo { us_per_quarter: u32 },
}

#[derive(Debug, Clone, Copy)]
struct TimedEvent {
    tick: u64,
    track: usize,
    order: usize,
    kind: EventKind,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> MidiResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(MidiError::UnexpectedEof { offset: self.pos, needed: n - self.remaining() });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> MidiResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn peek(&self) -> MidiResult<u8> {
        self.data
            .get(self.pos)
            .copied()
            .ok_or(MidiError::UnexpectedEof { offset: self.pos, needed: 1 })
    }

    fn u32(&mut self) -> MidiResult<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> MidiResult<u64> {
        let start = self.pos;
        let mut value = 0u64;
        for _ in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | (byte & 0x7F) as u64;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::InvalidVlq { offset: start })
    }

    fn data_byte(&mut self) -> MidiResult<u8> {
        let offset = self.pos;
        let value = self.u8()?;
        if value & 0x80 != 0 {
            return Err(MidiError::InvalidDataByte { offset, value });
        }
        Ok(value)
    }
}

fn chunk_id(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Parses an SMF byte stream into notes and sustain-pedal spans.
pub fn parse_midi(bytes: &[u8]) -> MidiResult<NoteSequence> {
    let mut cur = Cursor::new(bytes, 0);
    let id = cur.take(4)?;
    if id != b"MThd" {
        return Err(MidiError::BadChunk { offset: 0, expected: "MThd", found: chunk_id(id) });
    }
    let length = cur.u32()?;
    if length < 6 {
        return Err(MidiError::BadHeaderLength { offset: 4, length });
    }
    let header = cur.take(length as usize)?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let num_tracks = u16::from_be_bytes([header[2], header[3]]) as usize;
    let raw_division = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    let division = parse_division(raw_division)?;

    let mut events = Vec::new();
    let mut end_tick = 0u64;
    let mut track = 0;
    while track < num_tracks && cur.remaining() > 0 {
        let id = cur.take(4)?;
        let len = cur.u32()? as usize;
        let body_start = cur.pos;
        let body = cur.take(len)?;
        if id != b"MTrk" {
            // alien chunk
            continue;
        }
        let track_end = parse_track(body, body_start, track, &mut events)?;
        end_tick = end_tick.max(track_end);
        track += 1;
    }

    events.sort_by_key(|e| (e.tick, e.track, e.order));
    let clock = TempoMap::new(division, &events);
    let duration = clock.seconds(end_tick);
    assemble(&events, &clock, duration)
}

fn parse_division(raw: u16) -> MidiResult<Division> {
    if raw & 0x8000 == 0 {
        if raw == 0 {
            return Err(MidiError::InvalidDivision(raw));
        }
        Ok(Division::TicksPerQuarter(raw))
    } else {
        let fps = -((raw >> 8) as u8 as i8) as i32;
        let subframes = (raw & 0xFF) as f64;
        let fps = match fps {
            24 => 24.0,
            25 => 25.0,
            29 => 29.97,
            30 => 30.0,
            _ => return Err(MidiError::InvalidDivision(raw)),
        };
        if subframes == 0.0 {
            return Err(MidiError::InvalidDivision(raw));
        }
        Ok(Division::TicksPerSecond(fps * subframes))
    }
}

/// Reads one MTrk body; returns the track's final tick.
fn parse_track(
    body: &[u8],
    base: usize,
    track: usize,
    out: &mut Vec<TimedEvent>,
) -> MidiResult<u64> {
    let mut cur = Cursor::new(body, 0);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut order = 0;
    while cur.remaining() > 0 {
        let delta = cur.vlq().map_err(|e| rebase(e, base))?;
        tick += delta;
        let offset = base + cur.pos;
        let first = cur.peek().map_err(|e| rebase(e, base))?;
        let status = if first & 0x80 != 0 {
            cur.pos += 1;
            first
        } else {
            running.ok_or(MidiError::MissingRunningStatus { offset })?
        };
        let mut push = |kind| {
            out.push(TimedEvent { tick, track, order, kind });
            order += 1;
        };
        match status {
            0x80..=0xEF => {
                running = Some(status);
                let a = cur.data_byte().map_err(|e| rebase(e, base))?;
                let b = match status & 0xF0 {
                    0xC0 | 0xD0 => 0,
                    _ => cur.data_byte().map_err(|e| rebase(e, base))?,
                };
                match status & 0xF0 {
                    0x90 if b > 0 => {
                        if !(MIN_PITCH..=MAX_PITCH).contains(&a) {
                            return Err(MidiError::PitchOutOfRange { pitch: a, offset });
                        }
                        push(EventKind::NoteOn { pitch: a, velocity: b });
                    }
                    0x80 | 0x90 => push(EventKind::NoteOff { pitch: a }),
                    0xB0 if a == SUSTAIN_CONTROLLER => push(EventKind::Sustain { value: b }),
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = cur.vlq().map_err(|e| rebase(e, base))? as usize;
                cur.take(len).map_err(|e| rebase(e, base))?;
            }
            0xFF => {
                running = None;
                let meta = cur.u8().map_err(|e| rebase(e, base))?;
                let len = cur.vlq().map_err(|e| rebase(e, base))? as usize;
                let data = cur.take(len).map_err(|e| rebase(e, base))?;
                match meta {
                    0x2F => return Ok(tick),
                    0x51 => {
                        if data.len() != 3 {
                            return Err(MidiError::InvalidTempo { offset });
                        }
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us == 0 {
                            return Err(MidiError::InvalidTempo { offset });
                        }
                        push(EventKind::Tempo { us_per_quarter: us });
                    }
                    _ => {}
                }
            }
            _ => return Err(MidiError::InvalidStatus { offset, status }),
        }
    }
    Ok(tick)
}

fn rebase(err: MidiError, base: usize) -> MidiError {
    match err {
        MidiError::UnexpectedEof { offset, needed } => {
            MidiError::UnexpectedEof { offset: offset + base, needed }
        }
        MidiError::InvalidVlq { offset } => MidiError::InvalidVlq { offset: offset + base },
        MidiError::InvalidDataByte { offset, value } => {
            MidiError::InvalidDataByte { offset: offset + base, value }
        }
        other => other,
    }
}

/// Piecewise-constant tick→seconds conversion.
struct TempoMap {
    division: Division,
    // (tick, seconds at tick, seconds per tick from here on)
    segments: Vec<(u64, f64, f64)>,
}

impl TempoMap {
    fn new(division: Division, events: &[TimedEvent]) -> Self {
        let mut segments = Vec::new();
        if let Division::TicksPerQuarter(tpq) = division {
            let per_tick = |us: u32| us as f64 * 1e-6 / tpq as f64;
            segments.push((0, 0.0, per_tick(DEFAULT_TEMPO_US)));
            for e in events {
                if let EventKind::Tempo { us_per_quarter } = e.kind {
                    let &(tick, secs, rate) = segments.last().unwrap();
                    let at = secs + (e.tick - tick) as f64 * rate;
                    if e.tick == tick {
                        segments.pop();
                    }
                    segments.push((e.tick, at, per_tick(us_per_quarter)));
                }
            }
        }
        Self { division, segments }
    }

    fn seconds(&self, tick: u64) -> f64 {
        match self.division {
            Division::TicksPerSecond(tps) => tick as f64 / tps,
            Division::TicksPerQuarter(_) => {
                let idx = self.segments.partition_point(|s| s.0 <= tick) - 1;
                let (start, secs, rate) = self.segments[idx];
                secs + (tick - start) as f64 * rate
            }
        }
    }
}

fn assemble(events: &[TimedEvent], clock: &TempoMap, duration: f64) -> MidiResult<NoteSequence> {
    let mut open: [Option<(f64, u8)>; 128] = [None; 128];
    let mut pedal_open: Option<f64> = None;
    let mut notes = Vec::new();
    let mut pedals = Vec::new();

    let close_note = |notes: &mut Vec<NoteEvent>, pitch: u8, onset: f64, vel: u8, at: f64| {
        // zero-length notes are dropped
        if let Ok(n) = NoteEvent::new(pitch, onset, at, vel) {
            notes.push(n);
        }
    };

    for e in events {
        let t = clock.seconds(e.tick);
        match e.kind {
            EventKind::NoteOn { pitch, velocity } => {
                if let Some((onset, vel)) = open[pitch as usize].take() {
                    close_note(&mut notes, pitch, onset, vel, t);
                }
                open[pitch as usize] = Some((t, velocity));
            }
            EventKind::NoteOff { pitch } => {
                if let Some((onset, vel)) = open[pitch as usize].take() {
                    close_note(&mut notes, pitch, onset, vel, t);
                }
            }
            EventKind::Sustain { value } => {
                if value >= SUSTAIN_ON_MIN {
                    pedal_open.get_or_insert(t);
                } else if let Some(onset) = pedal_open.take() {
                    if let Ok(p) = PedalEvent::new(onset, t) {
                        pedals.push(p);
                    }
                }
            }
            EventKind::Tempo { .. } => {}
        }
    }
    for (pitch, slot) in open.iter_mut().enumerate() {
        if let Some((onset, vel)) = slot.take() {
            close_note(&mut notes, pitch as u8, onset, vel, duration);
        }
    }
    if let Some(onset) = pedal_open {
        if let Ok(p) = PedalEvent::new(onset, duration) {
            pedals.push(p);
        }
    }
    Ok(NoteSequence::new(notes, pedals, duration).expect("parsed spans are well formed"))
}

/// Writes a single-track (format 0) SMF with notes and CC64 pedal events.
///
/// Times are quantized to the nearest tick; a note or pedal span is never
/// shorter than one tick. At equal ticks, releases are written before presses.
pub fn write_midi(seq: &NoteSequence, ticks_per_quarter: u16, tempo_bpm: f64) -> MidiResult<Vec<u8>> {
    if ticks_per_quarter == 0 || ticks_per_quarter & 0x8000 != 0 {
        return Err(MidiError::InvalidSetting(format!(
            "ticks per quarter must be in 1..=32767, got {ticks_per_quarter}"
        )));
    }
    if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
        return Err(MidiError::InvalidSetting(format!("tempo must be positive, got {tempo_bpm}")));
    }
    let us_per_quarter = (60e6 / tempo_bpm).round();
    if !(1.0..=0xFF_FFFF as f64).contains(&us_per_quarter) {
        return Err(MidiError::InvalidSetting(format!("tempo {tempo_bpm} BPM is not representable")));
    }
    let us_per_quarter = us_per_quarter as u32;
    let ticks_per_second = ticks_per_quarter as f64 * 1e6 / us_per_quarter as f64;
    let to_tick = |seconds: f64| -> MidiResult<u64> {
        let tick = (seconds * ticks_per_second).round();
        if !(0.0..=MAX_VLQ as f64).contains(&tick) {
            return Err(MidiError::TickOverflow { seconds });
        }
        Ok(tick as u64)
    };

    // (tick, press?, sequence, message)
    let mut messages: Vec<(u64, bool, usize, [u8; 3])> = Vec::new();
    for n in seq.notes() {
        let on = to_tick(n.onset_seconds())?;
        let off = to_tick(n.offset_seconds())?.max(on + 1);
        let i = messages.len();
        messages.push((on, true, i, [0x90, n.pitch(), n.velocity()]));
        messages.push((off, false, i, [0x80, n.pitch(), 0x40]));
    }
    for p in seq.pedals() {
        let on = to_tick(p.onset_seconds())?;
        let off = to_tick(p.offset_seconds())?.max(on + 1);
        let i = messages.len();
        messages.push((on, true, i, [0xB0, SUSTAIN_CONTROLLER, 127]));
        messages.push((off, false, i, [0xB0, SUSTAIN_CONTROLLER, 0]));
    }
    messages.sort_by_key(|&(tick, press, i, _)| (tick, press, i));
    let last = messages.last().map_or(0, |m| m.0);
    let end = last.max(to_tick(seq.duration_seconds())?);

    let mut track = Vec::new();
    write_vlq(&mut track, 0);
    track.extend_from_slice(&[0xFF, 0x51, 0x03]);
    track.extend_from_slice(&us_per_quarter.to_be_bytes()[1..]);
    let mut now = 0;
    for (tick, _, _, msg) in &messages {
        write_vlq(&mut track, tick - now);
        track.extend_from_slice(msg);
        now = *tick;
    }
    write_vlq(&mut track, end - now);
    track.extend_from_slice(&[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&ticks_per_quarter.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

fn write_vlq(out: &mut Vec<u8>, value: u64) {
    debug_assert!(value <= MAX_VLQ);
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(groups[i] | if i > 0 { 0x80 } else { 0 });
    }
}
