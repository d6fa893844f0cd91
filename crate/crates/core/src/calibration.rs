//! Wavelength ↔ fiber-position ↔ channel mapping from a cubic calibration
//! polynomial. Positions are in µm, wavelengths in nm, frequencies in Hz.

use std::io::Write;

use crate::error::{finite, positive, Error, Result};
use crate::SPEED_OF_LIGHT;

/// Constant term of the reference calibration (nm).
pub const REFERENCE_WAVELENGTH_NM: f64 = 1532.9127;
/// Shortest wavelength covered by the reference calibration (nm).
pub const REFERENCE_SHORT_EDGE_NM: f64 = 1532.4374;
/// Optical-model coordinate (m) of the calibration origin. The calibrated
/// span is placed symmetrically about the VIPA envelope center.
pub const MODEL_ORIGIN_OFFSET: f64 = -330e-6;

/// `λ(x) = c0 + c1 x + c2 x² + c3 x³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoly {
    pub coefficients: [f64; 4],
    /// Closed interval of trusted positions (µm).
    pub valid_range: (f64, f64),
}

impl CalibrationPoly {
    /// Reference calibration, valid from the origin to the position of the
    /// short-wavelength edge.
    pub fn reference() -> Self {
        let coefficients = [REFERENCE_WAVELENGTH_NM, -7.03138e-4, -6.7756e-8, -6.3004e-11];
        let probe = Self {
            coefficients,
            valid_range: (0.0, 2000.0),
        };
        let mut upper = probe
            .position_of_wavelength(REFERENCE_SHORT_EDGE_NM)
            .expect("short edge lies inside the probe range");
        // Make the edge wavelength itself fall inside the image.
        while probe.evaluate(upper) > REFERENCE_SHORT_EDGE_NM {
            upper += upper * f64::EPSILON;
        }
        Self {
            coefficients,
            valid_range: (0.0, upper),
        }
    }

    pub fn new(coefficients: [f64; 4], valid_range: (f64, f64)) -> Result<Self> {
        for c in coefficients {
            finite("coefficient", c)?;
        }
        let (lo, hi) = valid_range;
        finite("valid_range", lo)?;
        finite("valid_range", hi)?;
        if !(hi > lo) {
            return Err(Error::param("valid_range", "upper bound must exceed lower bound"));
        }
        let cal = Self {
            coefficients,
            valid_range,
        };
        for i in 0..=1000 {
            let x = lo + (hi - lo) * i as f64 / 1000.0;
            if !(cal.slope(x) < 0.0) {
                return Err(Error::param("coefficients", format!("dλ/dx is not negative at x = {x} µm")));
            }
        }
        Ok(cal)
    }

    /// Horner evaluation, `((c3 x + c2) x + c1) x + c0`, without range check.
    pub fn evaluate(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coefficients;
        ((c3 * x + c2) * x + c1) * x + c0
    }

    /// dλ/dx (nm/µm).
    pub fn slope(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.coefficients;
        (3.0 * c3 * x + 2.0 * c2) * x + c1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.valid_range.0 && x <= self.valid_range.1
    }

    /// Wavelength image of the valid range, `(shortest, longest)`.
    pub fn wavelength_range(&self) -> (f64, f64) {
        (self.evaluate(self.valid_range.1), self.evaluate(self.valid_range.0))
    }

    /// Frequency image of the valid range, `(lowest, highest)` in Hz.
    pub fn frequency_range(&self) -> (f64, f64) {
        let (short, long) = self.wavelength_range();
        (nm_to_hz(long), nm_to_hz(short))
    }

    pub fn wavelength_of_position(&self, x: f64) -> Result<f64> {
        wavelength_of_position(x, self)
    }

    pub fn position_of_wavelength(&self, wavelength: f64) -> Result<f64> {
        position_of_wavelength(wavelength, self)
    }
}

pub fn nm_to_hz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

pub fn hz_to_nm(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency * 1e9
}

/// Calibrated wavelength (nm) at fiber position `x` (µm).
pub fn wavelength_of_position(x: f64, cal: &CalibrationPoly) -> Result<f64> {
    finite("x", x)?;
    if !cal.contains(x) {
        return Err(Error::OutOfRange {
            what: "position (µm)",
            value: x,
            lower: cal.valid_range.0,
            upper: cal.valid_range.1,
        });
    }
    Ok(cal.evaluate(x))
}

/// Inverse of the calibration by bisection on the monotone polynomial.
pub fn position_of_wavelength(wavelength: f64, cal: &CalibrationPoly) -> Result<f64> {
    finite("wavelength", wavelength)?;
    let (short, long) = cal.wavelength_range();
    if !(wavelength >= short && wavelength <= long) {
        return Err(Error::OutOfRange {
            what: "wavelength (nm)",
            value: wavelength,
            lower: short,
            upper: long,
        });
    }
    let (mut lo, mut hi) = cal.valid_range;
    if wavelength == long {
        return Ok(lo);
    }
    if wavelength == short {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cal.evaluate(mid) > wavelength {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub index: usize,
    pub frequency: f64,
    /// Fiber position (µm).
    pub position: f64,
    pub detector_channel: u8,
    /// Number of free spectral ranges subtracted to bring the channel into
    /// the calibrated span.
    pub order: i32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelMap {
    pub channels: Vec<Channel>,
}

impl ChannelMap {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Channel> {
        self.channels.iter().find(|c| c.index == index)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,frequency_Hz,position_um,detector_channel")?;
        for c in &self.channels {
            writeln!(w, "{},{},{},{}", c.index, c.frequency, c.position, c.detector_channel)?;
        }
        Ok(())
    }
}

/// Channel `i` sits at `center + i·spacing`. Channels outside the calibrated
/// span are refused unless `fsr` is given, in which case they are folded back
/// by whole free spectral ranges (the same fiber position serves every order).
pub fn build_channel_map(
    center: f64,
    spacing: f64,
    count: usize,
    cal: &CalibrationPoly,
    fsr: Option<f64>,
    first_detector_channel: u8,
) -> Result<ChannelMap> {
    positive("center", center)?;
    positive("spacing", spacing)?;
    if count == 0 {
        return Err(Error::param("count", "need at least one channel"));
    }
    if let Some(f) = fsr {
        positive("fsr", f)?;
    }
    let (nu_lo, nu_hi) = cal.frequency_range();
    let mut channels = Vec::with_capacity(count);
    for i in 0..count {
        let frequency = center + i as f64 * spacing;
        let mut order = 0i32;
        let mut folded = frequency;
        if let Some(f) = fsr {
            order = ((folded - nu_lo) / f).floor() as i32;
            folded -= order as f64 * f;
        }
        if !(folded >= nu_lo && folded <= nu_hi) {
            return Err(Error::OutOfRange {
                what: "channel frequency (Hz)",
                value: frequency,
                lower: nu_lo,
                upper: nu_hi,
            });
        }
        let position = position_of_wavelength(hz_to_nm(folded), cal)?;
        channels.push(Channel {
            index: i,
            frequency,
            position,
            detector_channel: first_detector_channel.wrapping_add(i as u8),
            order,
        });
    }
    Ok(ChannelMap { channels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_term_is_exact() {
        let cal = CalibrationPoly::reference();
        assert_eq!(wavelength_of_position(0.0, &cal).unwrap(), 1532.9127);
        assert_eq!(position_of_wavelength(1532.9127, &cal).unwrap(), 0.0);
    }

    #[test]
    fn horner_values_outside_trusted_range() {
        let cal = CalibrationPoly::reference();
        // Direct power-form evaluation as the oracle.
        let power = |x: f64| 1532.9127 - 7.03138e-4 * x - 6.7756e-8 * x * x - 6.3004e-11 * x * x * x;
        assert_relative_eq!(cal.evaluate(1000.0), power(1000.0), epsilon = 1e-9);
        assert!((cal.evaluate(1000.0) - 1532.0788).abs() < 5e-5);
        assert!((cal.evaluate(-100.0) - 1532.98240).abs() < 5e-6);
        assert!(matches!(wavelength_of_position(1000.0, &cal), Err(Error::OutOfRange { .. })));
        assert!(matches!(wavelength_of_position(-100.0, &cal), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn short_edge_is_upper_bound() {
        let cal = CalibrationPoly::reference();
        let x = position_of_wavelength(REFERENCE_SHORT_EDGE_NM, &cal).unwrap();
        assert_eq!(x, cal.valid_range.1);
        assert!((cal.valid_range.1 - 618.0).abs() < 1.0, "{}", cal.valid_range.1);
        assert!((cal.evaluate(x) - REFERENCE_SHORT_EDGE_NM).abs() < 1e-6);
        assert!(position_of_wavelength(1532.4, &cal).is_err());
        assert!(position_of_wavelength(1533.0, &cal).is_err());
    }

    #[test]
    fn rejects_non_monotone_polynomial() {
        assert!(CalibrationPoly::new([1.0, 1e-3, 0.0, 0.0], (0.0, 10.0)).is_err());
        assert!(CalibrationPoly::new([1.0, -1e-3, 0.0, 0.0], (10.0, 0.0)).is_err());
    }

    #[test]
    fn channel_map_single_and_folded() {
        let cal = CalibrationPoly::reference();
        let (lo, _) = cal.frequency_range();
        let one = build_channel_map(lo + 1e9, 6.5e9, 1, &cal, None, 2).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.channels[0].frequency, lo + 1e9);
        assert!(build_channel_map(lo + 1e9, 6.5e9, 20, &cal, None, 2).is_err());
        let map = build_channel_map(lo + 1e9, 6.5e9, 20, &cal, Some(60.8e9), 2).unwrap();
        assert_eq!(map.len(), 20);
        let gaps: Vec<f64> = map.channels[..10].windows(2).map(|w| w[1].position - w[0].position).collect();
        let spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1.0, "gaps {gaps:?}");
        let mut csv = Vec::new();
        map.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("index,frequency_Hz,position_um,detector_channel\n"));
        assert_eq!(text.lines().count(), 21);
    }
}
