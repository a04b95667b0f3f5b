//! `hrpiano` command-line front end.

mod units;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hrpiano::decode::{decode_notes, decode_pedals, NoteGridBundle, PedalGridBundle};
use hrpiano::encode::{encode_note_targets, encode_pedal_targets, rasterize_notes};
use hrpiano::eval::{
    frame_metrics, match_notes, match_pedals, sweep_csv, tolerance_sweep, EvalResult, MatchConfig, SweepMode,
    OFFSET_SWEEP_TOLERANCES, ONSET_SWEEP_TOLERANCES,
};
use hrpiano::midi::{parse_midi, write_midi};
use hrpiano::noise::{perturb_events, robustness_report, NoiseConfig};
use hrpiano::pipeline::{roundtrip, RoundtripConfig};
use hrpiano::{grid_io, NoteSequence, Thresholds, TimeGrid, NUM_PIANO_KEYS};

use units::{parse_duration, parse_duration_list, DurationList};

const TICKS_PER_QUARTER: u16 = 480;
const TEMPO_BPM: f64 = 120.0;

#[derive(Parser, Debug)]
#[command(name = "hrpiano", version, about = "High-resolution piano transcription toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a MIDI file into regression-target grids.
    Encode(EncodeArgs),
    /// Decode a grid directory into a MIDI file.
    Decode(DecodeArgs),
    /// Score an estimated MIDI file against a reference.
    Eval(EvalArgs),
    /// Encode, decode and score a MIDI file against itself.
    Roundtrip(RoundtripArgs),
    /// Shift every onset and offset by uniform label noise.
    Perturb(PerturbArgs),
    /// Tolerance sweeps and the label-noise robustness simulation.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Hop between frame centers, with unit (e.g. 10ms).
    #[arg(long, default_value = "10ms", value_parser = parse_duration)]
    hop: f64,
    /// Regression-target sharpness, in frames.
    #[arg(long, default_value_t = hrpiano::DEFAULT_J, value_parser = parse_j)]
    j: usize,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    midi: PathBuf,
    /// Output directory for the grid bundle.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Default for every threshold below.
    #[arg(long, default_value_t = hrpiano::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    onset_threshold: Option<f64>,
    #[arg(long)]
    offset_threshold: Option<f64>,
    #[arg(long)]
    frame_threshold: Option<f64>,
    #[arg(long)]
    pedal_onset_threshold: Option<f64>,
    #[arg(long)]
    pedal_offset_threshold: Option<f64>,
    #[arg(long)]
    pedal_frame_threshold: Option<f64>,
}

impl ThresholdArgs {
    fn thresholds(&self) -> Result<Thresholds> {
        let d = self.threshold;
        let t = Thresholds {
            onset: self.onset_threshold.unwrap_or(d),
            offset: self.offset_threshold.unwrap_or(d),
            frame: self.frame_threshold.unwrap_or(d),
            pedal_onset: self.pedal_onset_threshold.unwrap_or(d),
            pedal_offset: self.pedal_offset_threshold.unwrap_or(d),
            pedal_frame: self.pedal_frame_threshold.unwrap_or(d),
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Directory holding a note bundle and optionally a pedal bundle.
    grids: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args, Debug)]
struct ToleranceArgs {
    #[arg(long, default_value = "50ms", value_parser = parse_duration)]
    onset_tolerance: f64,
    #[arg(long, default_value = "50ms", value_parser = parse_duration)]
    offset_tolerance: f64,
    #[arg(long, default_value_t = 0.2)]
    offset_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    velocity_tolerance: f64,
}

impl ToleranceArgs {
    fn config(&self, use_offset: bool, use_velocity: bool) -> Result<MatchConfig> {
        let cfg = MatchConfig {
            onset_tolerance_seconds: self.onset_tolerance,
            use_offset,
            offset_tolerance_seconds: self.offset_tolerance,
            offset_ratio: self.offset_ratio,
            use_velocity,
            velocity_tolerance: self.velocity_tolerance,
            ..MatchConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    reference: PathBuf,
    estimate: PathBuf,
    /// Hop for the frame-level rolls.
    #[arg(long, default_value = "10ms", value_parser = parse_duration)]
    hop: f64,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    /// Comma-separated onset tolerances, each with unit.
    #[arg(long, value_parser = parse_duration_list)]
    sweep_onset: Option<DurationList>,
    /// Comma-separated offset tolerances, each with unit.
    #[arg(long, value_parser = parse_duration_list)]
    sweep_offset: Option<DurationList>,
    /// Writes the metric table (or the sweep) as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    /// Half-width A of the uniform label noise, with unit.
    #[arg(long, value_parser = parse_duration)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RoundtripArgs {
    midi: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    midi: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_parser = parse_duration)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(subcommand)]
    kind: SweepKind,
}

#[derive(Subcommand, Debug)]
enum SweepKind {
    /// Note F1 across onset tolerances (default 2, 5, 10, 20, 50, 100 ms).
    Onset(ToleranceSweepArgs),
    /// Note-with-offset F1 across offset tolerances (default 10 … 500 ms).
    Offset(ToleranceSweepArgs),
    /// Onset recovery from noise-optimal triangular vs rectangular targets.
    Noise(NoiseSweepArgs),
}

#[derive(Args, Debug)]
struct ToleranceSweepArgs {
    reference: PathBuf,
    estimate: PathBuf,
    #[arg(long, value_parser = parse_duration_list)]
    tolerances: Option<DurationList>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NoiseSweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "50ms", value_parser = parse_duration)]
    noise: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes per-trial rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_j(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(j) if j >= 1 => Ok(j),
        _ => Err(format!("J must be a positive integer, got {s:?}")),
    }
}

fn read_midi(path: &Path) -> Result<NoteSequence> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_midi(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_midi_file(path: &Path, seq: &NoteSequence) -> Result<()> {
    let bytes = write_midi(seq, TICKS_PER_QUARTER, TEMPO_BPM)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let seq = read_midi(&args.midi)?;
    let grid = TimeGrid::covering(seq.duration_seconds(), args.grid.hop, NUM_PIANO_KEYS)?;
    let notes = encode_note_targets(&seq, &grid, args.grid.j)?;
    let notes = NoteGridBundle::from_targets(&notes, &seq, args.grid.j)?;
    let pedals = PedalGridBundle::from_targets(&encode_pedal_targets(&seq, &grid.with_keys(1)?, args.grid.j)?)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    grid_io::write_note_bundle(&args.out, &notes)?;
    grid_io::write_pedal_bundle(&args.out, &pedals)?;
    println!(
        "notes: {} x {} frames x keys; pedal: {} x 1; {} notes, {} pedal spans",
        grid.num_frames(),
        grid.num_keys(),
        grid.num_frames(),
        seq.notes().len(),
        seq.pedals().len()
    );
    Ok(())
}

fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let thresholds = args.thresholds.thresholds()?;
    let notes = grid_io::read_note_bundle(&args.grids)?;
    let pedals = grid_io::read_pedal_bundle(&args.grids)?;
    let grid = *notes.grid();
    let decoded_notes = decode_notes(&notes, &thresholds)?;
    let decoded_pedals = match &pedals {
        Some(p) => decode_pedals(p, &thresholds)?,
        None => vec![],
    };
    let seq = NoteSequence::new(decoded_notes, decoded_pedals, grid.end_seconds())?;
    write_midi_file(&args.out, &seq)?;
    println!("decoded {} notes, {} pedal spans", seq.notes().len(), seq.pedals().len());
    Ok(())
}

fn metric_line(name: &str, r: &EvalResult) -> String {
    format!(
        "{name:<28} P {:6.2}%  R {:6.2}%  F1 {:6.2}%",
        100.0 * r.precision,
        100.0 * r.recall,
        100.0 * r.f1
    )
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let onset_cfg = args.tolerances.config(false, false)?;
    let offset_cfg = args.tolerances.config(true, false)?;
    let velocity_cfg = args.tolerances.config(true, true)?;
    let reference = read_midi(&args.reference)?;
    let estimate = read_midi(&args.estimate)?;

    if args.sweep_onset.is_some() || args.sweep_offset.is_some() {
        let mut csv = String::new();
        for (mode, tolerances) in
            [(SweepMode::Onset, &args.sweep_onset), (SweepMode::Offset, &args.sweep_offset)]
        {
            if let Some(DurationList(tolerances)) = tolerances {
                let rows = tolerance_sweep(reference.notes(), estimate.notes(), tolerances, mode)?;
                print_sweep(mode, &rows);
                csv.push_str(&sweep_csv(&rows));
            }
        }
        if let Some(path) = &args.csv {
            write_text(path, &csv)?;
        }
        return Ok(());
    }

    let duration = reference.duration_seconds().max(estimate.duration_seconds());
    let grid = TimeGrid::covering(duration, args.hop, NUM_PIANO_KEYS)?;
    let frame = frame_metrics(&rasterize_notes(&reference, &grid)?, &rasterize_notes(&estimate, &grid)?)?;
    let (r, e) = (reference.notes(), estimate.notes());
    let mut groups = vec![
        ("Frame", frame),
        ("Note", match_notes(r, e, &onset_cfg)),
        ("Note w/ offset", match_notes(r, e, &offset_cfg)),
        ("Note w/ offset & velocity", match_notes(r, e, &velocity_cfg)),
    ];
    if !reference.pedals().is_empty() || !estimate.pedals().is_empty() {
        let (rp, ep) = (reference.pedals(), estimate.pedals());
        groups.push(("Pedal Event", match_pedals(rp, ep, &onset_cfg)));
        groups.push(("Pedal Event w/ offset", match_pedals(rp, ep, &offset_cfg)));
    }
    let mut csv = String::from("group,precision,recall,f1\n");
    for (name, result) in &groups {
        println!("{}", metric_line(name, result));
        csv.push_str(&format!("{name},{},{},{}\n", result.precision, result.recall, result.f1));
    }
    if let Some(path) = &args.csv {
        write_text(path, &csv)?;
    }
    Ok(())
}

fn print_sweep(mode: SweepMode, rows: &[(f64, EvalResult)]) {
    let label = match mode {
        SweepMode::Onset => "onset",
        SweepMode::Offset => "offset",
    };
    for (tol, r) in rows {
        println!("{}", metric_line(&format!("{label} tolerance {:.0} ms", tol * 1e3), r));
    }
}

fn noise_config(a: Option<f64>, seed: u64) -> Result<Option<NoiseConfig>> {
    a.map(|a| NoiseConfig::new(a, seed)).transpose().map_err(Into::into)
}

fn cmd_roundtrip(args: &RoundtripArgs) -> Result<()> {
    let noise = noise_config(args.noise.noise, args.noise.seed)?;
    let seq = read_midi(&args.midi)?;
    let cfg = RoundtripConfig { hop_seconds: args.grid.hop, j: args.grid.j, noise, ..Default::default() };
    let report = roundtrip(&seq, &cfg)?;
    print!("{}", report.summary_text());
    Ok(())
}

fn cmd_perturb(args: &PerturbArgs) -> Result<()> {
    let cfg = NoiseConfig::new(args.noise, args.seed)?;
    let seq = read_midi(&args.midi)?;
    let out = perturb_events(&seq, &cfg);
    write_midi_file(&args.out, &out)?;
    println!("perturbed {} notes, {} pedal spans", out.notes().len(), out.pedals().len());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    match &args.kind {
        SweepKind::Onset(a) => tolerance_sweep_cmd(a, SweepMode::Onset, &ONSET_SWEEP_TOLERANCES),
        SweepKind::Offset(a) => tolerance_sweep_cmd(a, SweepMode::Offset, &OFFSET_SWEEP_TOLERANCES),
        SweepKind::Noise(a) => {
            if a.trials == 0 {
                bail!("--trials must be at least 1");
            }
            let report = robustness_report(a.grid.j, a.grid.hop, a.noise, a.trials, a.seed)?;
            print!("{}", report.summary_text());
            if let Some(path) = &a.csv {
                write_text(path, &report.to_csv())?;
            }
            Ok(())
        }
    }
}

fn tolerance_sweep_cmd(args: &ToleranceSweepArgs, mode: SweepMode, defaults: &[f64]) -> Result<()> {
    let tolerances = args.tolerances.as_ref().map_or(defaults, |l| l.0.as_slice());
    let reference = read_midi(&args.reference)?;
    let estimate = read_midi(&args.estimate)?;
    let rows = tolerance_sweep(reference.notes(), estimate.notes(), tolerances, mode)?;
    print_sweep(mode, &rows);
    if let Some(path) = &args.csv {
        write_text(path, &sweep_csv(&rows))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
