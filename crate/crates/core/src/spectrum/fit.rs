use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::{DemuxSimulator, FilterMode, MeasuredSpectrum, SpectralComb};
use crate::error::{positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Lower end of the half-width search range (Hz).
    pub lower: f64,
    /// Upper end of the half-width search range (Hz).
    pub upper: f64,
    /// Log-spaced points of the initial bracketing scan.
    pub scan_points: usize,
    /// Final bracket width in `ln(half_width)`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lower: 1e6,
            upper: 10e9,
            scan_points: 16,
            tolerance: 1e-4,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinewidthFit {
    pub half_width: f64,
    /// Sum of squared residuals at the optimum.
    pub residual: f64,
    /// Least-squares amplitude applied to the model.
    pub scale: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Final bracket on the half-width (Hz).
    pub bracket: (f64, f64),
    /// Initial scan range (Hz).
    pub scanned: (f64, f64),
}

impl LinewidthFit {
    /// `key = value` report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "half_width_hz = {}", self.half_width);
        let _ = writeln!(s, "fwhm_hz = {}", 2.0 * self.half_width);
        let _ = writeln!(s, "residual = {}", self.residual);
        let _ = writeln!(s, "scale = {}", self.scale);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "evaluations = {}", self.evaluations);
        let _ = writeln!(s, "bracket_low_hz = {}", self.bracket.0);
        let _ = writeln!(s, "bracket_high_hz = {}", self.bracket.1);
        let _ = writeln!(s, "scan_low_hz = {}", self.scanned.0);
        let _ = writeln!(s, "scan_high_hz = {}", self.scanned.1);
        s
    }
}

/// Golden-section fit of the common half-width of a comb template.
///
/// Model spectra are cached by half-width, so repeated fits against
/// different data on the same grid share the bracketing scan.
pub struct LinewidthFitter<'a> {
    sim: &'a DemuxSimulator,
    template: SpectralComb,
    filter: FilterMode,
    options: FitOptions,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl<'a> LinewidthFitter<'a> {
    pub fn new(sim: &'a DemuxSimulator, template: SpectralComb, filter: FilterMode, options: FitOptions) -> Result<Self> {
        template.validate()?;
        positive("lower", options.lower)?;
        positive("upper", options.upper)?;
        positive("tolerance", options.tolerance)?;
        if options.upper <= options.lower {
            return Err(Error::param("upper", "search range is empty"));
        }
        if options.scan_points < 3 {
            return Err(Error::param("scan_points", "need at least 3 scan points"));
        }
        Ok(Self {
            sim,
            template,
            filter,
            options,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Unnormalized model at half-width `b`.
    pub fn model(&self, b: f64) -> Result<Arc<Vec<f64>>> {
        let key = b.to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.sim.raw(&self.template.with_half_width(b), &self.filter)?);
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    /// Residual after the best amplitude scaling, and that scale.
    fn objective(&self, b: f64, data: &[f64]) -> Result<(f64, f64)> {
        let m = self.model(b)?;
        let (mut smm, mut smd, mut sdd) = (0.0, 0.0, 0.0);
        for (a, d) in m.iter().zip(data) {
            smm += a * a;
            smd += a * d;
            sdd += d * d;
        }
        if smm == 0.0 {
            return Ok((sdd, 0.0));
        }
        let scale = smd / smm;
        Ok(((sdd - smd * scale).max(0.0), scale))
    }

    pub fn fit(&self, measured: &MeasuredSpectrum) -> Result<LinewidthFit> {
        if measured.abscissa != self.sim.abscissa() || measured.len() != self.sim.axis().len() {
            return Err(Error::Format("measured spectrum does not share the simulator grid".into()));
        }
        let span = self.sim.axis().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if measured
            .x
            .iter()
            .zip(self.sim.axis())
            .any(|(a, b)| (a - b).abs() > 1e-9 * span)
        {
            return Err(Error::Format("measured abscissa differs from the simulator grid".into()));
        }
        let data = &measured.intensity;
        let o = &self.options;
        let (l0, l1) = (o.lower.ln(), o.upper.ln());
        let n = o.scan_points;
        let grid: Vec<f64> = (0..n).map(|i| l0 + (l1 - l0) * i as f64 / (n - 1) as f64).collect();
        let values = grid
            .par_iter()
            .map(|&l| self.objective(l.exp(), data).map(|v| v.0))
            .collect::<Result<Vec<f64>>>()?;
        let mut evaluations = n;
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("scan is not empty");
        if best == 0 || best == n - 1 {
            return Err(Error::NoBracket {
                lower: o.lower,
                upper: o.upper,
                points: n,
            });
        }
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.objective(c.exp(), data)?.0;
        let mut fd = self.objective(d.exp(), data)?.0;
        evaluations += 2;
        let mut iterations = 0;
        while (b - a) > o.tolerance && iterations < o.max_iterations {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.objective(c.exp(), data)?.0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.objective(d.exp(), data)?.0;
            }
            evaluations += 1;
            iterations += 1;
        }
        let x = if fc < fd { c } else { d };
        let (residual, scale) = self.objective(x.exp(), data)?;
        Ok(LinewidthFit {
            half_width: x.exp(),
            residual,
            scale,
            iterations,
            evaluations,
            bracket: (a.exp(), b.exp()),
            scanned: (o.lower, o.upper),
        })
    }
}

/// One-shot fit; see [`LinewidthFitter`] for repeated fits on one grid.
pub fn fit_linewidth(
    measured: &MeasuredSpectrum,
    sim: &DemuxSimulator,
    template: &SpectralComb,
    filter: FilterMode,
    options: FitOptions,
) -> Result<LinewidthFit> {
    LinewidthFitter::new(sim, template.clone(), filter, options)?.fit(measured)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{EtalonFilter, VipaParams};
    use crate::spectrum::build_comb;
    use crate::SPEED_OF_LIGHT;

    fn setup() -> (DemuxSimulator, SpectralComb, FilterMode) {
        let nu0 = SPEED_OF_LIGHT / 1532.7e-9;
        let det: Vec<f64> = (0..=150).map(|i| -13.5e9 + i as f64 * 0.18e9).collect();
        let sim = DemuxSimulator::tracked(&VipaParams::reference(), 5.2e-6, &det, nu0).unwrap();
        let comb = build_comb(nu0, 6.5e9, 5, 38.3e6).unwrap();
        let filter = FilterMode::Tracked(EtalonFilter::new(nu0, 16e9, 1.0).unwrap());
        (sim, comb, filter)
    }

    #[test]
    fn noiseless_round_trip_and_rescaling() {
        let (sim, comb, filter) = setup();
        let measured = sim.spectrum(&comb, &filter).unwrap();
        let fitter = LinewidthFitter::new(&sim, comb.clone(), filter, FitOptions::default()).unwrap();
        let fit = fitter.fit(&measured).unwrap();
        assert!((fit.half_width / 38.3e6 - 1.0).abs() < 0.01, "{}", fit.half_width);
        let mut scaled = measured.clone();
        scaled.intensity.iter_mut().for_each(|v| *v *= 0.37);
        let fit2 = fitter.fit(&scaled).unwrap();
        assert!((fit2.half_width / fit.half_width - 1.0).abs() < 1e-3);
        assert!(fit.report().contains("half_width_hz = "));
    }

    #[test]
    fn unreachable_optimum_is_a_bracket_error() {
        let (sim, comb, filter) = setup();
        let measured = sim.spectrum(&comb, &filter).unwrap();
        let opts = FitOptions {
            lower: 200e6,
            upper: 10e9,
            ..FitOptions::default()
        };
        match fit_linewidth(&measured, &sim, &comb, filter, opts) {
            Err(Error::NoBracket { lower, upper, .. }) => {
                assert_eq!((lower, upper), (200e6, 10e9));
            }
            other => panic!("expected bracket error, got {other:?}"),
        }
    }
}
