use std::io::Write;

use super::{for_each_pair, observed_span, to_ps, CorrelationEstimate};
use crate::error::{Error, Result};
use crate::spectrum::width_at_half;
use crate::tags::{ensure_sorted, TimeTag};

/// Counts of delays `t_b − t_a` on bins covering `[−range, range]`. Bins are
/// half-open except the last, which also holds delays equal to `range`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: u64,
    pub range_ps: u64,
    pub counts: Vec<u64>,
    pub singles_a: u64,
    pub singles_b: u64,
    pub acquisition_ps: u64,
}

fn layout(bin_width: f64, range: f64) -> Result<(u64, u64, usize)> {
    let b = to_ps("bin_width", bin_width)?;
    let r = to_ps("range", range)?;
    if b <= 0 || r <= 0 {
        return Err(Error::param("bin_width", "bin width and range must be at least 1 ps"));
    }
    if (2 * r) % b != 0 {
        return Err(Error::param("range", format!("2·range ({} ps) is not a multiple of the bin width ({b} ps)", 2 * r)));
    }
    Ok((b as u64, r as u64, (2 * r / b) as usize))
}

impl CoincidenceHistogram {
    fn empty(bin: u64, range: u64, bins: usize) -> Self {
        Self {
            bin_width_ps: bin,
            range_ps: range,
            counts: vec![0; bins],
            singles_a: 0,
            singles_b: 0,
            acquisition_ps: 0,
        }
    }

    #[inline]
    fn add(&mut self, d: i64) {
        let i = ((d + self.range_ps as i64) as u64 / self.bin_width_ps) as usize;
        let last = self.counts.len() - 1;
        self.counts[i.min(last)] += 1;
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-12
    }

    pub fn range(&self) -> f64 {
        self.range_ps as f64 * 1e-12
    }

    pub fn acquisition_time(&self) -> f64 {
        self.acquisition_ps as f64 * 1e-12
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Lower edge of bin `i` (ps).
    pub fn bin_start_ps(&self, i: usize) -> i64 {
        i as i64 * self.bin_width_ps as i64 - self.range_ps as i64
    }

    /// Bin centres (s).
    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| (self.bin_start_ps(i) as f64 + self.bin_width_ps as f64 / 2.0) * 1e-12)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds a histogram of another acquisition with the same binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.bin_width_ps != self.bin_width_ps || other.range_ps != self.range_ps {
            return Err(Error::param("histogram", "cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.acquisition_ps += other.acquisition_ps;
        Ok(())
    }

    /// Centre (s) and count of the fullest bin.
    pub fn peak(&self) -> (f64, u64) {
        let (i, &c) = self
            .counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
            .expect("histogram has bins");
        (self.centers()[i], c)
    }

    /// FWHM (s) of the tallest peak above the median floor.
    pub fn peak_fwhm(&self) -> Option<f64> {
        let mut sorted = self.counts.clone();
        sorted.sort_unstable();
        let floor = sorted[sorted.len() / 2] as f64;
        let y: Vec<f64> = self.counts.iter().map(|&c| c as f64 - floor).collect();
        let (i, _) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if y[i] <= 0.0 {
            return None;
        }
        width_at_half(&self.centers(), &y, i)
    }

    /// Coincidences in `[lo, hi)` ps; both edges must fall on bin edges.
    pub fn window_count(&self, lo: i64, hi: i64) -> Result<u64> {
        let b = self.bin_width_ps as i64;
        let r = self.range_ps as i64;
        if lo < -r || hi >= r || hi <= lo {
            return Err(Error::param("window", "must lie inside the histogram range, ending before its last edge"));
        }
        if (lo + r) % b != 0 || (hi + r) % b != 0 {
            return Err(Error::param("window", "edges must coincide with bin edges"));
        }
        let (i0, i1) = (((lo + r) / b) as usize, ((hi + r) / b) as usize);
        Ok(self.counts[i0..i1].iter().sum())
    }

    /// Windowed g² from the binned counts with Poisson uncertainty.
    pub fn g2(&self, window: f64, offset: f64) -> Result<CorrelationEstimate> {
        let w = to_ps("window", window)?;
        let o = to_ps("offset", offset)?;
        let (lo, hi) = (o - w / 2, o - w / 2 + w);
        let c = self.window_count(lo, hi)?;
        CorrelationEstimate::from_counts(c, self.singles_a, self.singles_b, self.acquisition_ps, lo, hi, None)
    }

    /// CSV with columns `bin_start_ps,bin_end_ps,counts`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_start_ps,bin_end_ps,counts")?;
        for (i, c) in self.counts.iter().enumerate() {
            let s = self.bin_start_ps(i);
            writeln!(w, "{},{},{}", s, s + self.bin_width_ps as i64, c)?;
        }
        Ok(())
    }
}

/// Histogram of `t_b − t_a` over every pair with `|t_b − t_a| ≤ range`.
pub fn histogram(
    a: &[TimeTag],
    b: &[TimeTag],
    bin_width: f64,
    range: f64,
    acquisition_time: Option<f64>,
) -> Result<CoincidenceHistogram> {
    ensure_sorted(a, "a")?;
    ensure_sorted(b, "b")?;
    let (bin, r, bins) = layout(bin_width, range)?;
    let mut h = CoincidenceHistogram::empty(bin, r, bins);
    for_each_pair(a, b, -(r as i64), r as i64, true, |_, _, d| h.add(d));
    h.singles_a = a.len() as u64;
    h.singles_b = b.len() as u64;
    h.acquisition_ps = match acquisition_time {
        Some(t) => to_ps("acquisition_time", t)?.max(0) as u64,
        None => observed_span(a, b),
    };
    Ok(h)
}

/// Histogram of one stream against itself, excluding each tag's pairing with
/// itself; symmetric about zero delay.
pub fn autocorrelation_histogram(
    tags: &[TimeTag],
    bin_width: f64,
    range: f64,
    acquisition_time: Option<f64>,
) -> Result<CoincidenceHistogram> {
    ensure_sorted(tags, "tags")?;
    let (bin, r, bins) = layout(bin_width, range)?;
    let mut h = CoincidenceHistogram::empty(bin, r, bins);
    for_each_pair(tags, tags, -(r as i64), r as i64, true, |i, j, d| {
        if i != j {
            h.add(d)
        }
    });
    h.singles_a = tags.len() as u64;
    h.singles_b = tags.len() as u64;
    h.acquisition_ps = match acquisition_time {
        Some(t) => to_ps("acquisition_time", t)?.max(0) as u64,
        None => observed_span(tags, tags),
    };
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(times: &[u64]) -> Vec<TimeTag> {
        times.iter().map(|&t| TimeTag::new(0, t)).collect()
    }

    #[test]
    fn bins_cover_closed_range() {
        let a = tags(&[100]);
        let b = tags(&[90, 100, 109, 110, 111]);
        let h = histogram(&a, &b, 5e-12, 10e-12, None).unwrap();
        assert_eq!(h.bin_count(), 4);
        assert_eq!(h.counts, vec![1, 0, 1, 2]);
        assert_eq!(h.total(), 4);
        assert!(histogram(&a, &b, 3e-12, 10e-12, None).is_err());
    }

    #[test]
    fn autocorrelation_is_symmetric_without_self_pairs() {
        let t = tags(&[0, 3, 3, 7, 20, 22, 23]);
        let h = autocorrelation_histogram(&t, 1e-12, 5e-12, None).unwrap();
        let n = h.counts.len();
        // Bin i covers [i-5, i-4); its mirror for delay d is delay -d.
        for d in -4..=4i64 {
            let i = (d + 5) as usize;
            let m = (-d + 5) as usize;
            assert_eq!(h.counts[i], h.counts[m], "delay {d}");
        }
        assert_eq!(h.counts[5], 2);
        assert_eq!(n, 10);
    }

    #[test]
    fn windowed_histogram_matches_direct_count() {
        let a = tags(&[0, 10, 20, 35, 60, 61]);
        let b = tags(&[2, 9, 12, 30, 33, 64, 70]);
        let h = histogram(&a, &b, 2e-12, 20e-12, Some(100e-12)).unwrap();
        let direct = super::super::count_window(&a, &b, -4, 6).unwrap();
        assert_eq!(h.window_count(-4, 6).unwrap(), direct);
        assert!(h.window_count(-3, 6).is_err());
        let mut twice = h.clone();
        twice.merge(&h).unwrap();
        assert_eq!(twice.total(), 2 * h.total());
        assert_eq!(twice.acquisition_ps, 200);
    }
}
