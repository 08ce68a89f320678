//! Full width at half maximum of a sampled peak.

use crate::biphoton::Pattern;
use crate::error::{Error, Result};

/// Which peak to measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakSelector {
    /// Global maximum; crossings searched over the whole pattern.
    Global,
    /// Maximum inside `[lo, hi]`; crossings must also lie inside.
    Window { lo: f64, hi: f64 },
}

/// Half-maximum crossings `(left, right)` found by linear interpolation.
pub fn half_max_crossings(p: &Pattern, selector: PeakSelector) -> Result<(f64, f64)> {
    let xs = p.positions();
    let ys = p.rates();
    let (lo, hi) = match selector {
        PeakSelector::Global => (0, xs.len() - 1),
        PeakSelector::Window { lo, hi } => {
            let first = xs.partition_point(|&x| x < lo);
            let last = xs.partition_point(|&x| x <= hi);
            if last <= first + 2 {
                return Err(Error::Shape(format!(
                    "window [{lo:.4e}, {hi:.4e}] holds too few samples"
                )));
            }
            (first, last - 1)
        }
    };
    let mut peak = lo;
    for i in lo..=hi {
        if ys[i] > ys[peak] {
            peak = i;
        }
    }
    let half = 0.5 * ys[peak];
    if half <= 0.0 {
        return Err(Error::Shape("peak has zero height".into()));
    }
    let interp = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);

    let left = (lo..peak)
        .rev()
        .find(|&i| ys[i] < half)
        .map(|i| interp(i, i + 1))
        .ok_or_else(|| Error::Shape("no half-maximum crossing left of the peak".into()))?;
    let right = (peak + 1..=hi)
        .find(|&i| ys[i] < half)
        .map(|i| interp(i - 1, i))
        .ok_or_else(|| Error::Shape("no half-maximum crossing right of the peak".into()))?;
    Ok((left, right))
}

pub fn fwhm(p: &Pattern, selector: PeakSelector) -> Result<f64> {
    let (l, r) = half_max_crossings(p, selector)?;
    Ok(r - l)
}
