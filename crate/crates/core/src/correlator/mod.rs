//! Coincidence analysis of sorted time-tag streams.
//!
//! Every pass is a two-pointer merge: for each tag of the first stream a
//! lower pointer into the second stream only moves forward, so cost is
//! linear in the number of tags plus the number of pairs inside the range.

mod estimate;
mod grid;
mod histogram;

pub use estimate::{
    cauchy_schwarz_r, g2_auto_hbt, g2_cross, split_stream, CauchySchwarz, CorrelationEstimate, G2Options, Uncertainty,
};
pub use grid::{
    band_pairs, block_pairs, build_correlation_grid, CorrelationGrid, GridScenario, GridSummary, TABLE_MEASURED_PAIRS,
};
pub use histogram::{autocorrelation_histogram, histogram, CoincidenceHistogram};

use crate::error::{finite, Error, Result};
use crate::tags::TimeTag;

/// Default signal-idler coincidence window (s).
pub const DEFAULT_CROSS_WINDOW: f64 = 2.5e-9;
/// Default HBT window on the signal arm (s).
pub const DEFAULT_SIGNAL_AUTO_WINDOW: f64 = 1.2e-9;
/// Default HBT window on the idler arm (s).
pub const DEFAULT_IDLER_AUTO_WINDOW: f64 = 1.4e-9;
/// Default histogram bin (s).
pub const DEFAULT_BIN_WIDTH: f64 = 50e-12;
/// Default distance of the accidental sidebands from the window centre (s).
pub const DEFAULT_SIDEBAND_OFFSET: f64 = 10e-9;

pub(crate) fn to_ps(name: &'static str, seconds: f64) -> Result<i64> {
    finite(name, seconds)?;
    let ps = (seconds * 1e12).round();
    if ps.abs() > 9.0e18 {
        return Err(Error::param(name, "out of the picosecond range"));
    }
    Ok(ps as i64)
}

/// Calls `f(i, j, d)` for every pair with `d = b[j] − a[i]` in `[lo, hi)`,
/// or `[lo, hi]` when `closed`. Both streams must be sorted.
#[inline]
pub(crate) fn for_each_pair<F>(a: &[TimeTag], b: &[TimeTag], lo: i64, hi: i64, closed: bool, mut f: F)
where
    F: FnMut(usize, usize, i64),
{
    let mut start = 0usize;
    for (i, ta) in a.iter().enumerate() {
        let t = ta.time as i64;
        let first = t.saturating_add(lo);
        while start < b.len() && (b[start].time as i64) < first {
            start += 1;
        }
        let mut j = start;
        while j < b.len() {
            let d = b[j].time as i64 - t;
            if d > hi || (!closed && d == hi) {
                break;
            }
            f(i, j, d);
            j += 1;
        }
    }
}

/// Span covered by two streams (ps), used when no acquisition time is given.
pub(crate) fn observed_span(a: &[TimeTag], b: &[TimeTag]) -> u64 {
    let first = a.first().into_iter().chain(b.first()).map(|t| t.time).min();
    let last = a.last().into_iter().chain(b.last()).map(|t| t.time).max();
    match (first, last) {
        (Some(f), Some(l)) => l - f + 1,
        _ => 0,
    }
}

/// Counts pairs with delay in `[lo, hi)` ps.
pub fn count_window(a: &[TimeTag], b: &[TimeTag], lo: i64, hi: i64) -> Result<u64> {
    crate::tags::ensure_sorted(a, "a")?;
    crate::tags::ensure_sorted(b, "b")?;
    let mut n = 0u64;
    for_each_pair(a, b, lo, hi, false, |_, _, _| n += 1);
    Ok(n)
}
