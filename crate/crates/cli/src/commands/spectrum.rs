use std::io::{BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use freqmux::optics::{EtalonFilter, VipaParams};
use freqmux::spectrum::{
    build_comb, find_peaks, Abscissa, DemuxSimulator, FilterMode, FitOptions, LinewidthFitter, MeasuredSpectrum,
};
use freqmux::SPEED_OF_LIGHT;

use super::{open, Context, GHZ, MHZ, UM};
use crate::config::{Manifest, Params};
use crate::error::CliError;

/// Comb and instrument shared by synthesis and fitting.
struct Template {
    frequency: f64,
    lines: usize,
    spacing: f64,
    filter_fwhm: f64,
    fiber_radius: f64,
    prominence: f64,
}

fn template(p: &Params) -> Result<Template, CliError> {
    let wavelength_nm: f64 = p.get("wavelength_nm", 1532.7)?;
    Ok(Template {
        frequency: SPEED_OF_LIGHT / (wavelength_nm * 1e-9),
        lines: p.get("lines", 20)?,
        spacing: p.get("spacing_ghz", 6.5)? * GHZ,
        filter_fwhm: p.get("filter_fwhm_ghz", 16.0)? * GHZ,
        fiber_radius: p.get("fiber_radius_um", 5.2)? * UM,
        prominence: p.get("peak_prominence", 0.005)?,
    })
}

impl Template {
    fn simulator(&self, abscissa: Abscissa, axis: &[f64]) -> Result<DemuxSimulator, CliError> {
        let p = VipaParams::reference();
        Ok(match abscissa {
            Abscissa::Detuning => DemuxSimulator::tracked(&p, self.fiber_radius, axis, self.frequency)?,
            Abscissa::Position => DemuxSimulator::positions(&p, self.fiber_radius, axis, self.frequency)?,
        })
    }

    fn filter(&self) -> Result<FilterMode, CliError> {
        Ok(FilterMode::Tracked(EtalonFilter::new(self.frequency, self.filter_fwhm, 1.0)?))
    }

    fn peaks(&self, s: &MeasuredSpectrum) -> usize {
        let top = s.max();
        let y: Vec<f64> = s.intensity.iter().map(|v| v / top).collect();
        find_peaks(&s.x, &y, self.prominence).len()
    }
}

/// Noiseless or noisy demultiplexed spectrum of a Lorentzian comb, sampled at
/// tracked detunings.
pub fn demux_spectrum(ctx: Context) -> Result<(), CliError> {
    let p = &ctx.params;
    let t = template(p)?;
    let half_width = p.get("half_width_mhz", 38.3)? * MHZ;
    let span = p.get("span_ghz", 65.0)? * GHZ;
    let step = p.get("step_ghz", 0.18)? * GHZ;
    let noise: f64 = p.get("noise_fraction", 0.0)?;
    p.finish()?;
    if !(step > 0.0 && span > 0.0) {
        return Err(CliError::Config("keys `span_ghz` and `step_ghz` must be > 0".into()));
    }
    if !(noise >= 0.0) {
        return Err(CliError::Config("key `noise_fraction` must be >= 0".into()));
    }
    let n = (span / step).round() as i64;
    let axis: Vec<f64> = (-n..=n).map(|k| k as f64 * step).collect();
    let sim = t.simulator(Abscissa::Detuning, &axis)?;
    let comb = build_comb(t.frequency, t.spacing, t.lines, half_width)?;
    let mut spectrum = sim.spectrum(&comb, &t.filter()?)?;
    if noise > 0.0 {
        let dist = Normal::new(0.0, noise * spectrum.max()).map_err(|e| CliError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        for v in &mut spectrum.intensity {
            *v += dist.sample(&mut rng);
        }
    }
    let mut w = ctx.create("spectrum.csv")?;
    spectrum.write_csv(&mut w)?;
    w.flush()?;

    let mut m = Manifest::default();
    m.put("points", spectrum.len());
    m.put("detected_peaks", t.peaks(&spectrum));
    ctx.finish(&m)
}

/// Fits the common half-width of the comb to a measured spectrum and writes
/// an overlay of data and scaled model.
pub fn fit_spectrum(ctx: Context, measured: &Path) -> Result<(), CliError> {
    let p = &ctx.params;
    let t = template(p)?;
    let options = FitOptions {
        lower: p.get("fit_lower_mhz", 1.0)? * MHZ,
        upper: p.get("fit_upper_mhz", 10_000.0)? * MHZ,
        ..FitOptions::default()
    };
    p.finish()?;
    let data = MeasuredSpectrum::read_csv(BufReader::new(open(measured)?))?;
    let sim = t.simulator(data.abscissa, &data.x)?;
    let comb = build_comb(t.frequency, t.spacing, t.lines, options.lower)?;
    let fitter = LinewidthFitter::new(&sim, comb, t.filter()?, options)?;
    let fit = fitter.fit(&data)?;
    let model = fitter.model(fit.half_width)?;

    let mut w = ctx.create("overlay.csv")?;
    writeln!(w, "{},measured,model", data.abscissa.header())?;
    for ((x, y), mv) in data.x.iter().zip(&data.intensity).zip(model.iter()) {
        writeln!(w, "{x},{y},{}", mv * fit.scale)?;
    }
    w.flush()?;
    let mut w = ctx.create("fit_report.txt")?;
    w.write_all(fit.report().as_bytes())?;
    w.flush()?;

    let mut m = Manifest::default();
    m.put("half_width_hz", fit.half_width);
    m.put("residual", fit.residual);
    m.put("scale", fit.scale);
    m.put("detected_peaks", t.peaks(&data));
    ctx.finish(&m)
}
