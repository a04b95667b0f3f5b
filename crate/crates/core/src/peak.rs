//! Thresholded local-maximum detection with three-point sub-frame refinement.
//!
//! Given a maximum B and its neighbors A and C, the refined time is the
//! abscissa of the point G at which the line through A and B and its mirror
//! image through C meet, i.e. the apex of the symmetric triangle through the
//! three samples. For samples of an exact triangle this recovers the apex.

use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedPeak {
    pub frame_index: usize,
    pub refined_time_seconds: f64,
    pub peak_value: f64,
}

/// Indices of local maxima strictly above `threshold`.
///
/// A run of equal values counts as one maximum, reported at its first frame,
/// when both ends of the run drop off (or hit the series boundary).
pub fn find_local_maxima(series: &[f64], threshold: f64) -> Vec<usize> {
    let mut maxima = Vec::new();
    let n = series.len();
    let mut i = 0;
    while i < n {
        let value = series[i];
        let mut end = i;
        while end + 1 < n && series[end + 1] == value {
            end += 1;
        }
        let rises = i == 0 || series[i - 1] < value;
        let falls = end == n - 1 || series[end + 1] < value;
        if value > threshold && rises && falls {
            maxima.push(i);
        }
        i = end + 1;
    }
    maxima
}

/// Sub-frame position of the apex through three equally spaced samples.
///
/// Requires `b.1 >= max(a.1, c.1)`. Symmetric or flat triples return `b.0`.
pub fn refine_peak(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let (xa, ya) = a;
    let (xb, yb) = b;
    let (xc, yc) = c;
    assert!(xa < xb && xb < xc, "abscissae must be increasing");
    let left = xb - xa;
    let right = xc - xb;
    assert!(
        (left - right).abs() <= 1e-9 * left.max(right),
        "samples must be equally spaced ({left} vs {right})"
    );
    if yc > ya {
        xb + left / 2.0 * (yc - ya) / (yb - ya)
    } else if ya > yc {
        xb - right / 2.0 * (ya - yc) / (yb - yc)
    } else {
        xb
    }
}

/// Finds maxima above `threshold` and refines each interior one.
/// Maxima on the first or last frame keep their frame-center time.
pub fn detect_and_refine(series: &[f64], threshold: f64, grid: &TimeGrid) -> Vec<RefinedPeak> {
    let last = series.len().saturating_sub(1);
    find_local_maxima(series, threshold)
        .into_iter()
        .map(|i| {
            let xb = grid.center(i);
            let time = if i == 0 || i == last {
                xb
            } else {
                refine_peak(
                    (grid.center(i - 1), series[i - 1]),
                    (xb, series[i]),
                    (grid.center(i + 1), series[i + 1]),
                )
            };
            RefinedPeak { frame_index: i, refined_time_seconds: time, peak_value: series[i] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle(t0: f64, hop: f64, j: f64, frames: usize) -> Vec<f64> {
        (0..frames)
            .map(|i| (1.0 - (i as f64 * hop - t0).abs() / (j * hop)).max(0.0))
            .collect()
    }

    #[test]
    fn local_maxima_examples() {
        assert_eq!(find_local_maxima(&[0.1, 0.9, 0.1], 0.3), vec![1]);
        assert_eq!(find_local_maxima(&[0.5, 0.5, 0.1], 0.3), vec![0]);
        assert_eq!(find_local_maxima(&[0.1, 0.5, 0.5, 0.9], 0.3), vec![3]);
        assert_eq!(find_local_maxima(&[0.1, 0.5, 0.5, 0.2], 0.3), vec![1]);
        assert_eq!(find_local_maxima(&[0.9, 0.1, 0.9], 0.3), vec![0, 2]);
        assert_eq!(find_local_maxima(&[0.3, 0.3], 0.3), Vec::<usize>::new());
        assert_eq!(find_local_maxima(&[0.7], 0.3), vec![0]);
        assert!(find_local_maxima(&[], 0.3).is_empty());
    }

    #[test]
    fn encoded_triangle_has_one_maximum() {
        let series = triangle(1.234, 0.01, 5.0, 300);
        assert_eq!(find_local_maxima(&series, 0.3), vec![123]);
    }

    #[test]
    fn refine_examples() {
        assert_eq!(refine_peak((0.0, 0.4), (0.01, 0.9), (0.02, 0.4)), 0.01);
        let t = refine_peak((0.00, 0.2), (0.01, 1.0), (0.02, 0.6));
        assert!((t - 0.0125).abs() < 1e-15);
        // mirror image
        let t = refine_peak((0.00, 0.6), (0.01, 1.0), (0.02, 0.2));
        assert!((t - 0.0075).abs() < 1e-15);
        assert_eq!(refine_peak((0.0, 0.5), (0.01, 0.5), (0.02, 0.5)), 0.01);
    }

    #[test]
    fn refine_inverts_triangle_samples() {
        let hop = 0.01;
        let t0: f64 = 1.234;
        let y = |x: f64| 1.0 - (x - t0).abs() / (5.0 * hop);
        let t = refine_peak((1.22, y(1.22)), (1.23, y(1.23)), (1.24, y(1.24)));
        assert!((t - t0).abs() < 1e-12);
    }

    #[test]
    fn boundary_peak_is_unrefined() {
        let grid = TimeGrid::new(0.01, 4, 1).unwrap();
        let peaks = detect_and_refine(&[0.9, 0.5, 0.1, 0.0], 0.3, &grid);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].refined_time_seconds, 0.0);
        assert_eq!(peaks[0].frame_index, 0);
        assert!(detect_and_refine(&[0.1, 0.2, 0.1, 0.0], 0.3, &grid).is_empty());
    }

    #[test]
    fn two_triangles_refine_to_their_apexes() {
        let grid = TimeGrid::new(0.01, 400, 1).unwrap();
        let a = triangle(1.0137, 0.01, 5.0, 400);
        let b = triangle(1.1152, 0.01, 5.0, 400);
        let series: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let peaks = detect_and_refine(&series, 0.3, &grid);
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].refined_time_seconds - 1.0137).abs() < 1e-12);
        assert!((peaks[1].refined_time_seconds - 1.1152).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "equally spaced")]
    fn unequal_spacing_is_rejected() {
        refine_peak((0.0, 0.1), (0.01, 1.0), (0.03, 0.2));
    }

    proptest! {
        #[test]
        fn refined_time_stays_within_half_hop(
            ya in 0.0f64..1.0, yc in 0.0f64..1.0, extra in 0.0f64..1.0, xb in 0.0f64..10.0
        ) {
            let yb = ya.max(yc) + extra;
            prop_assume!(yb > ya.min(yc));
            let t = refine_peak((xb - 0.01, ya), (xb, yb), (xb + 0.01, yc));
            prop_assert!((t - xb).abs() <= 0.005 + 1e-12);
        }
    }
}
