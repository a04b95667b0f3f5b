//! Label-noise experiments.
//!
//! Ground-truth event times are shifted by independent draws from
//! `Uniform(−A, +A)`. Under such noise the best a model can do is output the
//! clean target shape convolved with the noise density, `u = f ∗ q`. This
//! module computes that curve numerically and measures how well the peak
//! detector recovers the true event time from it, for triangular regression
//! targets and for 2-frame rectangular targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::events::{NoteEvent, NoteSequence, PedalEvent};
use crate::grid::TimeGrid;
use crate::peak::detect_and_refine;
use crate::{Error, Result};

/// Shortest span an event is allowed to shrink to after perturbation.
pub const MIN_PERTURBED_DURATION: f64 = 0.001;

/// Width of the rectangular comparison target, in frames.
pub const RECT_WIDTH_FRAMES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub half_width_seconds: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(half_width_seconds: f64, seed: u64) -> Result<Self> {
        if !(half_width_seconds.is_finite() && half_width_seconds >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise half-width must be non-negative, got {half_width_seconds}"
            )));
        }
        Ok(Self { half_width_seconds, seed })
    }
}

/// Shifts every onset and offset independently.
///
/// Shifted times are clamped at 0 and each event keeps at least
/// [`MIN_PERTURBED_DURATION`]. Same-pitch notes that come to overlap are
/// truncated at the later onset (a note left shorter than the floor is
/// dropped), and overlapping pedal spans are merged.
pub fn perturb_events(seq: &NoteSequence, cfg: &NoiseConfig) -> NoteSequence {
    let a = cfg.half_width_seconds;
    if a == 0.0 {
        return seq.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shift = |t: f64| (t + rng.random_range(-a..=a)).max(0.0);
    let mut span = |on: f64, off: f64| {
        let on = shift(on);
        let off = shift(off).max(on + MIN_PERTURBED_DURATION);
        (on, off)
    };

    let mut notes: Vec<(u8, f64, f64, u8)> = seq
        .notes()
        .iter()
        .map(|n| {
            let (on, off) = span(n.onset_seconds(), n.offset_seconds());
            (n.pitch(), on, off, n.velocity())
        })
        .collect();
    let mut pedals: Vec<(f64, f64)> =
        seq.pedals().iter().map(|p| span(p.onset_seconds(), p.offset_seconds())).collect();

    notes.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut kept = Vec::with_capacity(notes.len());
    for i in 0..notes.len() {
        let (pitch, on, mut off, vel) = notes[i];
        if let Some(next) = notes.get(i + 1).filter(|n| n.0 == pitch) {
            off = off.min(next.1);
        }
        if off - on >= MIN_PERTURBED_DURATION {
            kept.push(NoteEvent::new(pitch, on, off, vel).expect("perturbed note stays valid"));
        }
    }

    pedals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pedals.len());
    for (on, off) in pedals {
        match merged.last_mut() {
            Some(last) if on < last.1 => last.1 = last.1.max(off),
            _ => merged.push((on, off)),
        }
    }
    let pedals = merged.into_iter().map(|(on, off)| PedalEvent::new(on, off).expect("valid span")).collect();

    NoteSequence::new(kept, pedals, seq.duration_seconds()).expect("normalized sequence is valid")
}

/// Clean target shapes, centered on the event at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetShape {
    /// `max(0, 1 − |t| / (J·hop))`.
    Triangular { j: usize, hop_seconds: f64 },
    /// 1 on an interval `width_frames·hop` wide, 0.5 on its edges.
    Rectangular { width_frames: usize, hop_seconds: f64 },
}

impl TargetShape {
    pub fn hop_seconds(&self) -> f64 {
        match *self {
            Self::Triangular { hop_seconds, .. } | Self::Rectangular { hop_seconds, .. } => hop_seconds,
        }
    }

    /// Half-width of the nonzero region.
    pub fn support_half_width(&self) -> f64 {
        match *self {
            Self::Triangular { j, hop_seconds } => j as f64 * hop_seconds,
            Self::Rectangular { width_frames, hop_seconds } => width_frames as f64 * hop_seconds / 2.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let half = self.support_half_width();
        match self {
            Self::Triangular { .. } => (1.0 - t.abs() / half).max(0.0),
            Self::Rectangular { .. } => {
                let d = t.abs();
                if d < half {
                    1.0
                } else if d == half {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact area under the shape.
    pub fn area(&self) -> f64 {
        match self {
            Self::Triangular { .. } => self.support_half_width(),
            Self::Rectangular { .. } => 2.0 * self.support_half_width(),
        }
    }

    fn validate(&self) -> Result<()> {
        let hop = self.hop_seconds();
        if !(hop.is_finite() && hop > 0.0) {
            return Err(Error::InvalidParameter(format!("hop must be positive, got {hop}")));
        }
        let width = match *self {
            Self::Triangular { j, .. } => j,
            Self::Rectangular { width_frames, .. } => width_frames,
        };
        if width == 0 {
            return Err(Error::InvalidParameter("target width must be at least 1 frame".into()));
        }
        Ok(())
    }
}

/// A curve sampled at `t = (k − center)·resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    resolution: f64,
    center: usize,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time_of(&self, index: usize) -> f64 {
        (index as f64 - self.center as f64) * self.resolution
    }

    /// Linear interpolation between samples; 0 outside the sampled range.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = t / self.resolution + self.center as f64;
        if !(x >= 0.0) || x > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        if frac == 0.0 || i + 1 == self.values.len() {
            return self.values[i];
        }
        let (a, b) = (self.values[i], self.values[i + 1]);
        a + (b - a) * frac
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Riemann-sum area.
    pub fn area(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution
    }

    /// Time of the first sample attaining the maximum.
    pub fn argmax_time(&self) -> f64 {
        let peak = self.peak();
        let i = self.values.iter().position(|&v| v == peak).unwrap_or(self.center);
        self.time_of(i)
    }
}

/// `u = f ∗ q` for clean shape `f` and uniform noise of half-width `a`.
///
/// `f` is sampled at `resolution` and convolved with `2M + 1` equal weights,
/// `M = round(a / resolution)`, so the result has exactly the area of the
/// sampled shape.
pub fn expected_target(shape: TargetShape, a: f64, resolution: f64) -> Result<SampledCurve> {
    shape.validate()?;
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise half-width must be non-negative, got {a}")));
    }
    let max_resolution = shape.hop_seconds() / 10.0;
    if !(resolution > 0.0 && resolution <= max_resolution * (1.0 + 1e-9)) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be in (0, {max_resolution}], got {resolution}"
        )));
    }
    let m = (a / resolution).round() as usize;
    let f_half = (shape.support_half_width() / resolution).ceil() as usize + 1;
    let f: Vec<f64> =
        (0..=2 * f_half).map(|k| shape.value((k as f64 - f_half as f64) * resolution)).collect();
    if m == 0 {
        return Ok(SampledCurve { resolution, center: f_half, values: f });
    }

    let weight = 1.0 / (2 * m + 1) as f64;
    let out_len = f.len() + 2 * m;
    let values = (0..out_len)
        .map(|k| {
            // f index j contributes to output k when k − 2m ≤ j ≤ k
            let lo = k.saturating_sub(2 * m);
            let hi = k.min(f.len() - 1);
            if lo > hi {
                return 0.0;
            }
            f[lo..=hi].iter().sum::<f64>() * weight
        })
        .collect();
    Ok(SampledCurve { resolution, center: f_half + m, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Triangular,
    Rectangular,
}

impl TargetKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Triangular => "triangular",
            Self::Rectangular => "rectangular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub trial: u64,
    pub kind: TargetKind,
    pub true_onset: f64,
    pub estimate: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub rows: Vec<TrialRow>,
    pub triangular: ErrorSummary,
    pub rectangular: ErrorSummary,
}

impl RobustnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,kind,t0,estimate,abs_error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.trial, r.kind.name(), r.true_onset, r.estimate, r.abs_error));
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let line = |name: &str, s: &ErrorSummary| {
            format!(
                "{name:<12} max |error| {:.3} ms, mean |error| {:.3} ms\n",
                s.max_abs_error * 1e3,
                s.mean_abs_error * 1e3
            )
        };
        line("triangular", &self.triangular) + &line("rectangular", &self.rectangular)
    }
}

/// Onset estimate from a sampled frame series: the strongest detected peak
/// (earliest on ties), refined; the argmax frame if nothing is detected.
fn estimate_onset(series: &[f64], threshold: f64, grid: &TimeGrid) -> f64 {
    let peaks = detect_and_refine(series, threshold, grid);
    let best = peaks
        .iter()
        .fold(None::<&crate::peak::RefinedPeak>, |best, p| match best {
            Some(b) if b.peak_value >= p.peak_value => Some(b),
            _ => Some(p),
        });
    match best {
        Some(p) => p.refined_time_seconds,
        None => {
            let top = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let i = series.iter().position(|&v| v == top).unwrap_or(0);
            i as f64 * grid.hop_seconds()
        }
    }
}

/// Simulates decoding the noise-optimal target for random true onsets.
///
/// Trial `i` draws `t0` uniformly in [1, 2) s from a generator seeded with
/// `seed ^ i`, samples both expected curves on a frame grid, and records the
/// detector's error. The detection threshold is half of each curve's peak,
/// since the rectangular curve flattens well below the usual 0.3.
pub fn robustness_report(j: usize, hop_seconds: f64, a: f64, trials: u64, seed: u64) -> Result<RobustnessReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let resolution = hop_seconds / 10.0;
    let kinds = [
        (TargetKind::Triangular, TargetShape::Triangular { j, hop_seconds }),
        (TargetKind::Rectangular, TargetShape::Rectangular { width_frames: RECT_WIDTH_FRAMES, hop_seconds }),
    ];
    let curves = kinds
        .iter()
        .map(|&(kind, shape)| Ok((kind, expected_target(shape, a, resolution)?)))
        .collect::<Result<Vec<_>>>()?;
    let grid = TimeGrid::covering(3.0, hop_seconds, 1)?;

    let mut rows = Vec::with_capacity(2 * trials as usize);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial);
        let t0 = 1.0 + rng.random::<f64>();
        for (kind, curve) in &curves {
            let series: Vec<f64> =
                (0..grid.num_frames()).map(|i| curve.value_at(i as f64 * hop_seconds - t0)).collect();
            let estimate = estimate_onset(&series, 0.5 * curve.peak(), &grid);
            rows.push(TrialRow { trial, kind: *kind, true_onset: t0, estimate, abs_error: (estimate - t0).abs() });
        }
    }
    let summarize = |kind: TargetKind| {
        let errors: Vec<f64> = rows.iter().filter(|r| r.kind == kind).map(|r| r.abs_error).collect();
        ErrorSummary {
            max_abs_error: errors.iter().copied().fold(0.0, f64::max),
            mean_abs_error: errors.iter().sum::<f64>() / errors.len() as f64,
        }
    };
    let triangular = summarize(TargetKind::Triangular);
    let rectangular = summarize(TargetKind::Rectangular);
    Ok(RobustnessReport { rows, triangular, rectangular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HOP: f64 = 0.01;
    const RES: f64 = 0.001;

    fn spaced_notes(n: usize) -> NoteSequence {
        let notes =
            (0..n).map(|i| NoteEvent::new(60, 1.0 + i as f64, 1.5 + i as f64, 80).unwrap()).collect();
        NoteSequence::new(notes, vec![], 0.0).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let seq = spaced_notes(10);
        assert_eq!(perturb_events(&seq, &NoiseConfig::new(0.0, 7).unwrap()), seq);
    }

    #[test]
    fn shifts_are_bounded_and_centered() {
        let seq = spaced_notes(5000);
        let out = perturb_events(&seq, &NoiseConfig::new(0.05, 11).unwrap());
        assert_eq!(out.notes().len(), 5000);
        let mut shifts = Vec::new();
        for (a, b) in seq.notes().iter().zip(out.notes()) {
            shifts.push(b.onset_seconds() - a.onset_seconds());
            shifts.push(b.offset_seconds() - a.offset_seconds());
        }
        assert!(shifts.iter().all(|s| s.abs() <= 0.05 + 1e-12));
        let mean = shifts.iter().sum::<f64>() / shifts.len() as f64;
        assert!(mean.abs() < 0.002, "mean shift {mean}");
    }

    #[test]
    fn same_seed_same_output() {
        let seq = spaced_notes(50);
        let cfg = NoiseConfig::new(0.03, 99).unwrap();
        assert_eq!(perturb_events(&seq, &cfg), perturb_events(&seq, &cfg));
        let other = NoiseConfig::new(0.03, 100).unwrap();
        assert_ne!(perturb_events(&seq, &cfg), perturb_events(&seq, &other));
    }

    #[test]
    fn perturbation_keeps_sequences_valid() {
        let notes = vec![
            NoteEvent::new(60, 0.0, 0.002, 80).unwrap(),
            NoteEvent::new(60, 0.01, 0.03, 80).unwrap(),
            NoteEvent::new(62, 0.0, 0.5, 80).unwrap(),
        ];
        let pedals = vec![PedalEvent::new(0.0, 0.05).unwrap(), PedalEvent::new(0.06, 0.1).unwrap()];
        let seq = NoteSequence::new(notes, pedals, 1.0).unwrap();
        for seed in 0..200 {
            let out = perturb_events(&seq, &NoiseConfig::new(0.05, seed).unwrap());
            for n in out.notes() {
                assert!(n.onset_seconds() >= 0.0);
                assert!(n.duration_seconds() >= MIN_PERTURBED_DURATION - 1e-12);
            }
            let c4: Vec<_> = out.notes().iter().filter(|n| n.pitch() == 60).collect();
            for w in c4.windows(2) {
                assert!(w[0].offset_seconds() <= w[1].onset_seconds());
            }
        }
    }

    #[test]
    fn zero_noise_curve_is_the_shape() {
        for shape in [
            TargetShape::Triangular { j: 5, hop_seconds: HOP },
            TargetShape::Rectangular { width_frames: 2, hop_seconds: HOP },
        ] {
            let u = expected_target(shape, 0.0, RES).unwrap();
            for (i, &v) in u.values().iter().enumerate() {
                assert_eq!(v, shape.value(u.time_of(i)));
            }
        }
    }

    #[test]
    fn triangular_curve_symmetric_unimodal() {
        let shape = TargetShape::Triangular { j: 5, hop_seconds: HOP };
        for a in [0.005, 0.02, 0.05, 0.08, 0.12] {
            let u = expected_target(shape, a, RES).unwrap();
            let v = u.values();
            let n = v.len();
            for i in 0..n {
                assert!((v[i] - v[n - 1 - i]).abs() < 1e-12);
            }
            // a box wider than the triangle flattens the top over
            // |t| ≤ A − J·hop; the flat run is still centered on 0
            let peak = u.peak();
            let top: Vec<usize> = (0..n).filter(|&i| (v[i] - peak).abs() < 1e-12).collect();
            let mid = u.time_of(top[0]) + u.time_of(*top.last().unwrap());
            assert!(mid.abs() <= RES + 1e-12);
            let flat_half = (a - 0.05).max(0.0);
            assert!(u.argmax_time().abs() <= flat_half + RES + 1e-12);
            let c = n / 2;
            assert!(v[..=c].windows(2).all(|w| w[0] <= w[1] + 1e-15));
            assert!(v[c..].windows(2).all(|w| w[0] + 1e-15 >= w[1]));
        }
    }

    #[test]
    fn rectangular_curve_has_plateau() {
        let shape = TargetShape::Rectangular { width_frames: 2, hop_seconds: HOP };
        let a = 0.05;
        let u = expected_target(shape, a, RES).unwrap();
        let peak = u.peak();
        let flat = u.values().iter().filter(|&&v| (v - peak).abs() < 1e-12).count();
        // |2A − w| = 80 ms, sampled at both ends
        let width = (flat - 1) as f64 * RES;
        assert!((width - 0.08).abs() < 1e-9, "plateau width {width}");
    }

    #[test]
    fn rejects_coarse_resolution() {
        let shape = TargetShape::Triangular { j: 5, hop_seconds: HOP };
        assert!(expected_target(shape, 0.05, 0.002).is_err());
        assert!(expected_target(shape, -0.01, RES).is_err());
    }

    #[test]
    fn noiseless_triangle_is_exact() {
        let report = robustness_report(5, HOP, 0.0, 200, 3).unwrap();
        assert!(report.triangular.max_abs_error < 1e-9, "{:?}", report.triangular);
    }

    #[test]
    fn noisy_triangle_beats_rectangle() {
        let report = robustness_report(5, HOP, 0.05, 300, 5).unwrap();
        assert!(report.triangular.max_abs_error <= HOP);
        assert!(report.rectangular.max_abs_error >= 0.02);
        assert!(report.triangular.mean_abs_error < report.rectangular.mean_abs_error);
        assert_eq!(report.rows.len(), 600);
        assert!(report.to_csv().starts_with("trial,kind,t0,estimate,abs_error\n0,triangular,"));
    }

    #[test]
    fn report_is_reproducible() {
        let a = robustness_report(5, HOP, 0.05, 20, 42).unwrap();
        let b = robustness_report(5, HOP, 0.05, 20, 42).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(robustness_report(5, HOP, 0.05, 0, 42).is_err());
    }

    proptest! {
        #[test]
        fn convolution_preserves_area(j in 1usize..20, w in 1usize..6, a_ms in 0u32..120) {
            let a = a_ms as f64 / 1000.0;
            for shape in [
                TargetShape::Triangular { j, hop_seconds: HOP },
                TargetShape::Rectangular { width_frames: w, hop_seconds: HOP },
            ] {
                let u = expected_target(shape, a, RES).unwrap();
                let rel = (u.area() - shape.area()).abs() / shape.area();
                prop_assert!(rel < 1e-6, "relative area error {}", rel);
            }
        }
    }
}
