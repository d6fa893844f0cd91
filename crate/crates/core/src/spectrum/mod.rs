//! Lorentzian frequency combs, demultiplexed spectra and linewidth fitting.

mod demux;
mod fit;
mod peaks;

use std::io::{BufRead, Write};

pub use demux::{simulate_demux_spectrum, DemuxSimulator, FilterMode, ResponseTable, SpectralSampling};
pub use fit::{fit_linewidth, FitOptions, LinewidthFit, LinewidthFitter};
pub use peaks::{find_peaks, width_at_half, Peak};

use crate::error::{finite, positive, Error, Result};
use crate::optics::EtalonFilter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianLine {
    /// Center frequency (Hz).
    pub center: f64,
    /// Half width at half maximum (Hz).
    pub half_width: f64,
    pub weight: f64,
}

impl LorentzianLine {
    /// Peak-normalized profile `w / (1 + ((ν − ν0) / b)²)`.
    pub fn profile(&self, frequency: f64) -> f64 {
        let u = (frequency - self.center) / self.half_width;
        self.weight / (1.0 + u * u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComb {
    pub lines: Vec<LorentzianLine>,
    pub spacing: f64,
}

impl SpectralComb {
    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::param("lines", "comb has no lines"));
        }
        positive("spacing", self.spacing)?;
        for l in &self.lines {
            finite("center", l.center)?;
            positive("half_width", l.half_width)?;
            finite("weight", l.weight)?;
            if l.weight < 0.0 {
                return Err(Error::param("weight", "must be >= 0"));
            }
        }
        for w in self.lines.windows(2) {
            let gap = w[1].center - w[0].center;
            if (gap - self.spacing).abs() > 0.01 * self.spacing {
                return Err(Error::param("lines", format!("line gap {gap} deviates from spacing by more than 1%")));
            }
        }
        Ok(())
    }

    pub fn intensity(&self, frequency: f64) -> f64 {
        self.lines.iter().map(|l| l.profile(frequency)).sum()
    }

    pub fn center(&self) -> f64 {
        let first = self.lines.first().map_or(0.0, |l| l.center);
        let last = self.lines.last().map_or(0.0, |l| l.center);
        0.5 * (first + last)
    }

    /// Common half-width (of the first line).
    pub fn half_width(&self) -> f64 {
        self.lines.first().map_or(0.0, |l| l.half_width)
    }

    pub fn with_half_width(&self, half_width: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.lines {
            l.half_width = half_width;
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.lines {
            l.weight *= factor;
        }
        out
    }

    pub fn nearest_line(&self, frequency: f64) -> &LorentzianLine {
        self.lines
            .iter()
            .min_by(|a, b| (a.center - frequency).abs().total_cmp(&(b.center - frequency).abs()))
            .expect("validated comb is not empty")
    }
}

/// `count` unit-weight lines placed symmetrically about `center`.
pub fn build_comb(center: f64, spacing: f64, count: usize, half_width: f64) -> Result<SpectralComb> {
    finite("center", center)?;
    positive("spacing", spacing)?;
    positive("half_width", half_width)?;
    if count == 0 {
        return Err(Error::param("count", "need at least one line"));
    }
    let mid = (count as f64 - 1.0) / 2.0;
    let lines = (0..count)
        .map(|i| LorentzianLine {
            center: center + (i as f64 - mid) * spacing,
            half_width,
            weight: 1.0,
        })
        .collect();
    Ok(SpectralComb { lines, spacing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// Fiber position in the focal plane (m).
    Position,
    /// Frequency detuning (Hz).
    Detuning,
}

impl Abscissa {
    pub fn header(self) -> &'static str {
        match self {
            Abscissa::Position => "position_m",
            Abscissa::Detuning => "detuning_hz",
        }
    }

    fn from_header(h: &str) -> Option<Self> {
        match h.trim() {
            "position_m" => Some(Abscissa::Position),
            "detuning_hz" => Some(Abscissa::Detuning),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSpectrum {
    pub abscissa: Abscissa,
    pub x: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl MeasuredSpectrum {
    pub fn new(abscissa: Abscissa, x: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if x.len() != intensity.len() {
            return Err(Error::Format(format!("{} abscissa values but {} intensities", x.len(), intensity.len())));
        }
        if x.is_empty() {
            return Err(Error::Format("spectrum has no samples".into()));
        }
        for (&a, &y) in x.iter().zip(&intensity) {
            finite("abscissa", a)?;
            finite("intensity", y)?;
        }
        if let Some(i) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Format(format!("abscissa not strictly increasing at row {}", i + 1)));
        }
        Ok(Self { abscissa, x, intensity })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Divides by the maximum; an all-zero spectrum is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            for v in &mut self.intensity {
                *v /= m;
            }
        }
        self
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},intensity", self.abscissa.header())?;
        for (x, y) in self.x.iter().zip(&self.intensity) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || headers.get(1) != Some("intensity") {
            return Err(Error::Format(format!("expected header `position_m|detuning_hz,intensity`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let abscissa = Abscissa::from_header(&headers[0])
            .ok_or_else(|| Error::Format(format!("unknown abscissa column `{}`", &headers[0])))?;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("row {}: cannot parse column {}", row + 2, i + 1)))
            };
            x.push(parse(0)?);
            y.push(parse(1)?);
        }
        Self::new(abscissa, x, y)
    }
}

/// Total power transmitted by a scanning filter cavity, normalized to its
/// maximum over the grid. Each Lorentzian line is integrated against the
/// filter with the substitution `ν = ν0 + b tan u`, so truncation is exact.
pub fn scan_filter_spectrum(comb: &SpectralComb, filter: &EtalonFilter, detunings: &[f64]) -> Result<MeasuredSpectrum> {
    let power = scan_filter_power(comb, filter, detunings)?;
    Ok(MeasuredSpectrum::new(Abscissa::Detuning, detunings.to_vec(), power)?.normalized())
}

/// Unnormalized transmitted power; unit-weight lines carry unit power.
pub fn scan_filter_power(comb: &SpectralComb, filter: &EtalonFilter, detunings: &[f64]) -> Result<Vec<f64>> {
    comb.validate()?;
    filter.validate()?;
    let b_max = comb.lines.iter().map(|l| l.half_width).fold(0.0, f64::max);
    let k = ((16.0 * std::f64::consts::PI * b_max / filter.fwhm).ceil() as usize).clamp(2048, 1 << 22);
    let du = std::f64::consts::PI / k as f64;
    let tans: Vec<f64> = (0..k).map(|i| (-std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * du).tan()).collect();
    Ok(detunings
        .iter()
        .map(|&d| {
            let center = filter.center_frequency + d;
            comb.lines
                .iter()
                .map(|l| {
                    let s: f64 = tans.iter().map(|&t| filter.transmission(l.center + l.half_width * t - center)).sum();
                    l.weight * s * du / std::f64::consts::PI
                })
                .sum()
        })
        .collect())
}
