//! Strict duration flags: a number with an explicit unit, never a bare number.

const UNITS: [(&str, f64); 3] = [("ms", 1e-3), ("us", 1e-6), ("s", 1.0)];

/// Parses `"50ms"`, `"0.05s"` or `"500us"` into seconds.
pub fn parse_duration(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let (number, scale) = UNITS
        .iter()
        .find_map(|&(unit, scale)| text.strip_suffix(unit).map(|n| (n, scale)))
        .ok_or_else(|| {
            if text.parse::<f64>().is_ok() {
                format!("{text:?} has no unit; write e.g. \"{text}s\" or \"{text}ms\"")
            } else {
                format!("{text:?} is not a duration; expected a number followed by ms, us or s")
            }
        })?;
    let number = number.trim_end();
    let value: f64 = number
        .parse()
        .map_err(|_| format!("{text:?} is not a duration; expected a number followed by ms, us or s"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("{text:?} must be a finite, non-negative duration"));
    }
    Ok(value * scale)
}

/// A comma-separated list of durations, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationList(pub Vec<f64>);

/// Comma-separated durations, each with its own unit.
pub fn parse_duration_list(text: &str) -> Result<DurationList, String> {
    let values = text.split(',').map(parse_duration).collect::<Result<Vec<_>, _>>()?;
    Ok(DurationList(values))
}
