use crate::decode::PedalGridBundle;
use crate::events::PedalEvent;
use crate::grid::Thresholds;
use crate::peak::detect_and_refine;
use crate::Result;

/// Decodes sustain-pedal spans with an open/closed state machine.
///
/// While closed, a frame whose pedal probability exceeds the pedal-onset
/// threshold and rises over the previous frame opens a span at its center
/// (the frame before the first is taken as 0). While open, a thresholded
/// maximum of the offset regression closes it at the refined time, or a frame
/// probability below the pedal-frame threshold closes it at that frame's center.
pub fn decode_pedals(bundle: &PedalGridBundle, thresholds: &Thresholds) -> Result<Vec<PedalEvent>> {
    bundle.validate()?;
    thresholds.validate()?;
    let grid = bundle.grid();
    let frame = bundle.frame.column(0);
    let mut offset_at = vec![None; grid.num_frames()];
    for peak in detect_and_refine(&bundle.offset_reg.column(0), thresholds.pedal_offset, grid) {
        offset_at[peak.frame_index] = Some(peak.refined_time_seconds);
    }

    let mut spans = Vec::new();
    let mut open: Option<f64> = None;
    let close = |onset: f64, offset: f64, spans: &mut Vec<PedalEvent>| {
        if let Ok(span) = PedalEvent::new(onset, offset) {
            spans.push(span);
        }
    };
    for (t, &p) in frame.iter().enumerate() {
        match open {
            Some(onset) => {
                let offset = offset_at[t]
                    .or_else(|| (p < thresholds.pedal_frame).then(|| grid.center(t)));
                if let Some(offset) = offset {
                    close(onset, offset, &mut spans);
                    open = None;
                }
            }
            None => {
                let previous = if t == 0 { 0.0 } else { frame[t - 1] };
                if p > thresholds.pedal_onset && p > previous {
                    open = Some(grid.center(t));
                }
            }
        }
    }
    if let Some(onset) = open {
        close(onset, grid.end_seconds(), &mut spans);
    }
    Ok(spans)
}
