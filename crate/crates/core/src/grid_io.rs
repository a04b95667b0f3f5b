//! Binary (HRTG) and CSV serialization of value grids, plus grid bundles on disk.
//!
//! HRTG layout, all integers little-endian:
//!
//! | bytes  | field                       |
//! |--------|-----------------------------|
//! | 0..4   | magic `"HRTG"`              |
//! | 4..8   | version, u32 = 1            |
//! | 8..12  | frame count T, u32          |
//! | 12..16 | key count K, u32            |
//! | 16..20 | hop in microseconds, u32    |
//! | 20..   | T×K f32 values, time-major  |
//!
//! Values are narrowed to f32 on write. On read, values within 1e−6 of
//! [0, 1] are clamped into it; anything further out is an error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::decode::{NoteGridBundle, PedalGridBundle};
use crate::grid::{RegressionGrid, TimeGrid};

pub const MAGIC: [u8; 4] = *b"HRTG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
const RANGE_SLACK: f64 = 1e-6;

pub const NOTE_FRAME_FILE: &str = "frame.hrtg";
pub const NOTE_ONSET_FILE: &str = "onset.hrtg";
pub const NOTE_OFFSET_FILE: &str = "offset.hrtg";
pub const NOTE_VELOCITY_FILE: &str = "velocity.hrtg";
pub const PEDAL_FRAME_FILE: &str = "ped_frame.hrtg";
pub const PEDAL_ONSET_FILE: &str = "ped_onset.hrtg";
pub const PEDAL_OFFSET_FILE: &str = "ped_offset.hrtg";

pub const NOTE_FILES: [&str; 4] = [NOTE_FRAME_FILE, NOTE_ONSET_FILE, NOTE_OFFSET_FILE, NOTE_VELOCITY_FILE];
pub const PEDAL_FILES: [&str; 3] = [PEDAL_FRAME_FILE, PEDAL_ONSET_FILE, PEDAL_OFFSET_FILE];

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error("bad magic: expected {expected:?}, found {actual:?}")]
    BadMagic { expected: [u8; 4], actual: [u8; 4] },

    #[error("unsupported grid file version {actual} (expected {expected})")]
    VersionMismatch { expected: u32, actual: u32 },

    #[error("grid file truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("grid value {value} at frame {frame}, key {key} is outside [0, 1]")]
    ValueOutOfRange { frame: usize, key: usize, value: f64 },

    #[error("invalid grid header: {0}")]
    InvalidHeader(String),

    #[error("hop of {0} s is not a whole number of microseconds")]
    UnrepresentableHop(f64),

    #[error("line {line}: expected {expected} values, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },

    #[error("line {line}, column {column}: {text:?} is not a number")]
    NotANumber { line: usize, column: usize, text: String },

    #[error("grid text has no rows")]
    Empty,

    #[error("missing bundle file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<GridIoError> },

    #[error("bundle grids disagree: {0}")]
    Bundle(String),
}

type IoResult<T> = std::result::Result<T, GridIoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridFileHeader {
    pub num_frames: u32,
    pub num_keys: u32,
    pub hop_microseconds: u32,
}

impl GridFileHeader {
    pub fn for_grid(grid: &TimeGrid) -> IoResult<Self> {
        let hop_us = grid.hop_seconds() * 1e6;
        let rounded = hop_us.round();
        if (hop_us - rounded).abs() > 1e-6 * hop_us.max(1.0) || !(1.0..=u32::MAX as f64).contains(&rounded) {
            return Err(GridIoError::UnrepresentableHop(grid.hop_seconds()));
        }
        let frames = u32::try_from(grid.num_frames())
            .map_err(|_| GridIoError::InvalidHeader("too many frames".into()))?;
        let keys = u32::try_from(grid.num_keys())
            .map_err(|_| GridIoError::InvalidHeader("too many keys".into()))?;
        Ok(Self { num_frames: frames, num_keys: keys, hop_microseconds: rounded as u32 })
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.num_frames.to_le_bytes());
        out[12..16].copy_from_slice(&self.num_keys.to_le_bytes());
        out[16..20].copy_from_slice(&self.hop_microseconds.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> IoResult<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(GridIoError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(GridIoError::BadMagic { expected: MAGIC, actual: magic });
        }
        if word(4) != VERSION {
            return Err(GridIoError::VersionMismatch { expected: VERSION, actual: word(4) });
        }
        Ok(Self { num_frames: word(8), num_keys: word(12), hop_microseconds: word(16) })
    }

    pub fn time_grid(&self) -> IoResult<TimeGrid> {
        TimeGrid::new(self.hop_microseconds as f64 / 1e6, self.num_frames as usize, self.num_keys as usize)
            .map_err(|e| GridIoError::InvalidHeader(e.to_string()))
    }
}

/// Serializes a grid; the hop must be a whole number of microseconds.
pub fn write_grid(grid: &RegressionGrid) -> IoResult<Vec<u8>> {
    let header = GridFileHeader::for_grid(grid.grid())?;
    let mut out = Vec::with_capacity(HEADER_LEN + grid.values().len() * 4);
    out.extend_from_slice(&header.to_bytes());
    for &v in grid.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn read_grid(bytes: &[u8]) -> IoResult<RegressionGrid> {
    let header = GridFileHeader::parse(bytes)?;
    let time_grid = header.time_grid()?;
    let cells = time_grid
        .num_frames()
        .checked_mul(time_grid.num_keys())
        .ok_or_else(|| GridIoError::InvalidHeader("grid dimensions overflow".into()))?;
    let expected = cells
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| GridIoError::InvalidHeader("grid dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(GridIoError::Truncated { expected, actual: bytes.len() });
    }
    let values = bytes[HEADER_LEN..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    build_grid(time_grid, values)
}

fn build_grid(grid: TimeGrid, values: impl Iterator<Item = f64>) -> IoResult<RegressionGrid> {
    let keys = grid.num_keys();
    let mut out = Vec::with_capacity(grid.num_frames() * keys);
    for (i, v) in values.enumerate() {
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
            return Err(GridIoError::ValueOutOfRange { frame: i / keys, key: i % keys, value: v });
        }
        out.push(v.clamp(0.0, 1.0));
    }
    Ok(RegressionGrid::new(grid, out).expect("values validated and counted"))
}

/// Parses `T` lines of `K` comma-separated decimals (values read as f32).
pub fn read_grid_csv(text: &str, hop_seconds: f64) -> IoResult<RegressionGrid> {
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    let lines: Vec<&str> = text.lines().collect();
    let used = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |p| p + 1);
    for (idx, line) in lines[..used].iter().enumerate() {
        let line_no = idx + 1;
        let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(GridIoError::RaggedRow { line: line_no, expected, found: cells.len() });
        }
        for (col, cell) in cells.iter().enumerate() {
            let text = cell.trim();
            let v: f32 = text.parse().map_err(|_| GridIoError::NotANumber {
                line: line_no,
                column: col + 1,
                text: text.to_string(),
            })?;
            values.push(v as f64);
        }
        rows += 1;
    }
    let width = width.ok_or(GridIoError::Empty)?;
    let grid = TimeGrid::new(hop_seconds, rows, width).map_err(|e| GridIoError::InvalidHeader(e.to_string()))?;
    build_grid(grid, values.into_iter())
}

/// One line per frame; each value written as the shortest decimal that
/// reads back to the same f32.
pub fn write_grid_csv(grid: &RegressionGrid) -> String {
    let keys = grid.grid().num_keys();
    let mut out = String::with_capacity(grid.values().len() * 6);
    for row in grid.values().chunks(keys) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{}", *v as f32).unwrap();
        }
        out.push('\n');
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridIoError + '_ {
    move |source| GridIoError::Io { path: path.to_path_buf(), source }
}

pub fn write_grid_file(path: &Path, grid: &RegressionGrid) -> IoResult<()> {
    std::fs::write(path, write_grid(grid)?).map_err(io_err(path))
}

pub fn read_grid_file(path: &Path) -> IoResult<RegressionGrid> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GridIoError::MissingFile(path.to_path_buf()),
        _ => GridIoError::Io { path: path.to_path_buf(), source: e },
    })?;
    read_grid(&bytes).map_err(|e| GridIoError::InFile { path: path.to_path_buf(), source: Box::new(e) })
}

fn check_present(dir: &Path, files: &[&str]) -> IoResult<()> {
    match files.iter().map(|f| dir.join(f)).find(|p| !p.is_file()) {
        Some(missing) => Err(GridIoError::MissingFile(missing)),
        None => Ok(()),
    }
}

pub fn write_note_bundle(dir: &Path, bundle: &NoteGridBundle) -> IoResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grids = [&bundle.frame, &bundle.onset_reg, &bundle.offset_reg, &bundle.velocity];
    // encode everything before touching the directory
    let encoded: Vec<Vec<u8>> = grids.iter().map(|g| write_grid(g)).collect::<IoResult<_>>()?;
    for (name, bytes) in NOTE_FILES.iter().zip(encoded) {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_note_bundle(dir: &Path) -> IoResult<NoteGridBundle> {
    check_present(dir, &NOTE_FILES)?;
    let [frame, onset, offset, velocity] = NOTE_FILES.map(|f| read_grid_file(&dir.join(f)));
    NoteGridBundle::new(frame?, onset?, offset?, velocity?).map_err(|e| GridIoError::Bundle(e.to_string()))
}

pub fn write_pedal_bundle(dir: &Path, bundle: &PedalGridBundle) -> IoResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grids = [&bundle.frame, &bundle.onset_reg, &bundle.offset_reg];
    let encoded: Vec<Vec<u8>> = grids.iter().map(|g| write_grid(g)).collect::<IoResult<_>>()?;
    for (name, bytes) in PEDAL_FILES.iter().zip(encoded) {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Reads the pedal bundle if any pedal file exists; a partial set is an error.
pub fn read_pedal_bundle(dir: &Path) -> IoResult<Option<PedalGridBundle>> {
    if !PEDAL_FILES.iter().any(|f| dir.join(f).exists()) {
        return Ok(None);
    }
    check_present(dir, &PEDAL_FILES)?;
    let [frame, onset, offset] = PEDAL_FILES.map(|f| read_grid_file(&dir.join(f)));
    PedalGridBundle::new(frame?, onset?, offset?)
        .map(Some)
        .map_err(|e| GridIoError::Bundle(e.to_string()))
}
