//! Demultiplexed spectrum through filter, VIPA and collection fiber.
//!
//! For a fixed fiber position `x0` the coupled amplitude is expanded in the
//! geometric series of the VIPA resonance,
//! `A(ψ) = Σ_m ρ^m e^{imψ} c_m`, with
//! `c_m = ∫ g(τ − x0) env(τ) e^{im(φ(τ) − φ(x0))} dτ`
//! and `ψ = φ(x0, ν)` linear in ν. `|A|²` is tabulated over one period of ψ
//! with an inverse FFT, so every spectral sample costs one interpolation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{Abscissa, MeasuredSpectrum, SpectralComb};
use crate::error::{finite, positive, Error, Result};
use crate::optics::{EtalonFilter, FiberMode, VipaParams};
use crate::SPEED_OF_LIGHT;

const TABLE_MIN_LEN: usize = 4096;
const TABLE_QUAD_POINTS: usize = 1201;
const TABLE_HALF_SPAN_RADII: f64 = 8.0;
const SERIES_CUTOFF: f64 = 1e-14;

/// Coupled intensity of one fiber position over one period of the VIPA
/// round-trip phase.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    values: Vec<f64>,
    position: f64,
    reference_frequency: f64,
    psi_ref: f64,
    kappa: f64,
}

impl ResponseTable {
    pub fn build(p: &VipaParams, fiber: &FiberMode, reference_frequency: f64) -> Result<Self> {
        p.validate()?;
        positive("reference_frequency", reference_frequency)?;
        let x0 = fiber.center;
        let rho = p.round_trip_reflectance();
        let k_ref = 2.0 * PI * p.thickness * reference_frequency / SPEED_OF_LIGHT;
        let p0 = p.path_polynomial(x0);
        let half = TABLE_HALF_SPAN_RADII * fiber.mode_field_radius;
        let q = TABLE_QUAD_POINTS;
        let h = 2.0 * half / (q - 1) as f64;
        let mut weight = Vec::with_capacity(q);
        let mut step = Vec::with_capacity(q);
        for i in 0..q {
            let tau = x0 - half + i as f64 * h;
            let end = if i == 0 || i == q - 1 { 0.5 } else { 1.0 };
            weight.push(Complex64::new(end * h * fiber.amplitude(tau) * p.envelope(tau), 0.0));
            step.push(Complex64::from_polar(1.0, k_ref * (p.path_polynomial(tau) - p0)));
        }
        let mut coeffs = Vec::new();
        let mut power = weight;
        let mut rho_m = 1.0;
        let mut first = 0.0;
        loop {
            let c: Complex64 = power.iter().sum();
            let a = c * rho_m;
            if coeffs.is_empty() {
                first = a.norm().max(f64::MIN_POSITIVE);
            }
            let negligible = a.norm() < SERIES_CUTOFF * first && rho_m < 1e-3;
            coeffs.push(a);
            if negligible || rho_m < SERIES_CUTOFF || coeffs.len() >= 1 << 20 || rho == 0.0 {
                break;
            }
            for (u, s) in power.iter_mut().zip(&step) {
                *u *= s;
            }
            rho_m *= rho;
        }
        let n = (4 * coeffs.len()).next_power_of_two().max(TABLE_MIN_LEN);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..coeffs.len()].copy_from_slice(&coeffs);
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let values = buf.iter().map(|z| z.norm_sqr()).collect();
        let kappa = 2.0 * PI * p.thickness * p0 / SPEED_OF_LIGHT;
        Ok(Self {
            values,
            position: x0,
            reference_frequency,
            psi_ref: (kappa * reference_frequency).rem_euclid(2.0 * PI),
            kappa,
        })
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    /// Monochromatic coupled intensity at `frequency`.
    #[inline]
    pub fn eval(&self, frequency: f64) -> f64 {
        let psi = self.psi_ref + self.kappa * (frequency - self.reference_frequency);
        let n = self.values.len();
        let u = psi * (n as f64 / (2.0 * PI));
        let fl = u.floor();
        let t = u - fl;
        let mask = n - 1;
        let i = (fl as i64).rem_euclid(n as i64) as usize;
        let y0 = self.values[(i + mask) & mask];
        let y1 = self.values[i];
        let y2 = self.values[(i + 1) & mask];
        let y3 = self.values[(i + 2) & mask];
        // Catmull-Rom
        let v = y1
            + 0.5
                * t
                * (y2 - y0 + t * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + t * (3.0 * (y1 - y2) + y3 - y0)));
        v.max(0.0)
    }
}

/// Spectral sampling of each Lorentzian line in the incoherent sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralSampling {
    pub samples_per_half_width: usize,
    pub truncation_half_widths: usize,
}

impl Default for SpectralSampling {
    fn default() -> Self {
        Self {
            samples_per_half_width: 15,
            truncation_half_widths: 20,
        }
    }
}

/// How the filter cavity in front of the VIPA is set for each scan point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMode {
    /// No filter.
    Flat,
    /// Filter parked at its own center frequency.
    Fixed(EtalonFilter),
    /// Filter re-centered on the comb line nearest the frequency the fiber
    /// is resonant with, so the line being read out sees peak transmission.
    Tracked(EtalonFilter),
}

/// Precomputed response tables for a scan; reusable across combs.
#[derive(Debug, Clone)]
pub struct DemuxSimulator {
    abscissa: Abscissa,
    x: Vec<f64>,
    /// Frequency each scan point is resonant with (Hz).
    scan_frequency: Vec<f64>,
    /// Resonance shift per abscissa unit at each point (1 for a detuning axis).
    dispersion: Vec<f64>,
    /// Channel bandwidth at each point (Hz).
    bandwidth: Vec<f64>,
    tables: Vec<ResponseTable>,
    sampling: SpectralSampling,
}

impl DemuxSimulator {
    /// Scan of the fiber over focal-plane positions `xs` (m).
    pub fn positions(p: &VipaParams, fiber_radius: f64, xs: &[f64], reference_frequency: f64) -> Result<Self> {
        p.validate()?;
        positive("fiber_radius", fiber_radius)?;
        check_axis(xs)?;
        let scan_frequency: Vec<f64> = xs.iter().map(|&x| p.resonant_frequency(x, reference_frequency)).collect();
        let dispersion = xs
            .iter()
            .zip(&scan_frequency)
            .map(|(&x, &nu)| p.dispersion(x, nu).abs())
            .collect();
        Self::assemble(p, fiber_radius, Abscissa::Position, xs, scan_frequency, dispersion)
    }

    /// Tracked frequency scan: for each detuning from `reference_frequency`
    /// the fiber sits where that frequency resonates, in the order closest to
    /// the envelope center.
    pub fn tracked(p: &VipaParams, fiber_radius: f64, detunings: &[f64], reference_frequency: f64) -> Result<Self> {
        p.validate()?;
        positive("fiber_radius", fiber_radius)?;
        check_axis(detunings)?;
        let scan_frequency: Vec<f64> = detunings.iter().map(|d| reference_frequency + d).collect();
        let xs = scan_frequency
            .iter()
            .map(|&nu| {
                let half = p.order_spacing(0.0, nu);
                p.resonance_near(nu, 0.0, half).ok_or_else(|| {
                    Error::param("detunings", format!("no resonance for {nu} Hz near the envelope center"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut sim = Self::assemble(
            p,
            fiber_radius,
            Abscissa::Detuning,
            &xs,
            scan_frequency,
            vec![1.0; detunings.len()],
        )?;
        sim.x = detunings.to_vec();
        Ok(sim)
    }

    fn assemble(
        p: &VipaParams,
        fiber_radius: f64,
        abscissa: Abscissa,
        xs: &[f64],
        scan_frequency: Vec<f64>,
        dispersion: Vec<f64>,
    ) -> Result<Self> {
        let tables = xs
            .par_iter()
            .zip(scan_frequency.par_iter())
            .map(|(&x, &nu)| ResponseTable::build(p, &FiberMode::new(fiber_radius, x)?, nu))
            .collect::<Result<Vec<_>>>()?;
        let bandwidth = xs.iter().map(|&x| p.local_fsr(x) / p.finesse()).collect();
        Ok(Self {
            abscissa,
            x: xs.to_vec(),
            scan_frequency,
            dispersion,
            bandwidth,
            tables,
            sampling: SpectralSampling::default(),
        })
    }

    pub fn with_sampling(mut self, sampling: SpectralSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn abscissa(&self) -> Abscissa {
        self.abscissa
    }

    pub fn axis(&self) -> &[f64] {
        &self.x
    }

    pub fn tables(&self) -> &[ResponseTable] {
        &self.tables
    }

    pub fn scan_frequencies(&self) -> &[f64] {
        &self.scan_frequency
    }

    /// Errors when adjacent scan points are further apart than a quarter of
    /// the width of a channel peak broadened by the line.
    pub fn check_resolution(&self, half_width: f64) -> Result<()> {
        for i in 1..self.x.len() {
            let disp = self.dispersion[i - 1].max(self.dispersion[i]);
            let step = (self.x[i] - self.x[i - 1]).abs();
            let required_hz = (self.bandwidth[i - 1].min(self.bandwidth[i]) + 2.0 * half_width) / 4.0;
            if step * disp > required_hz {
                let (unit, required) = match self.abscissa {
                    Abscissa::Position => ("m", required_hz / disp),
                    Abscissa::Detuning => ("Hz", required_hz),
                };
                return Err(Error::GridTooCoarse { step, required, unit });
            }
        }
        Ok(())
    }

    /// Unnormalized detected power at every scan point.
    pub fn raw(&self, comb: &SpectralComb, filter: &FilterMode) -> Result<Vec<f64>> {
        comb.validate()?;
        if let FilterMode::Fixed(f) | FilterMode::Tracked(f) = filter {
            f.validate()?;
        }
        let b_min = comb.lines.iter().map(|l| l.half_width).fold(f64::INFINITY, f64::min);
        self.check_resolution(b_min)?;
        let s = self.sampling.samples_per_half_width.max(1);
        let jmax = (s * self.sampling.truncation_half_widths) as i64;
        let profile: Vec<f64> = (-jmax..=jmax)
            .map(|j| {
                let u = j as f64 / s as f64;
                1.0 / (1.0 + u * u)
            })
            .collect();
        let norm = 1.0 / (PI * s as f64);
        let out = self
            .tables
            .par_iter()
            .zip(self.scan_frequency.par_iter())
            .map(|(table, &nu_scan)| {
                let filter_at = match *filter {
                    FilterMode::Flat => EtalonFilter {
                        center_frequency: 0.0,
                        fwhm: f64::INFINITY,
                        peak_transmission: 1.0,
                    },
                    FilterMode::Fixed(f) => f,
                    FilterMode::Tracked(f) => f.recentered(comb.nearest_line(nu_scan).center),
                };
                let mut acc = 0.0;
                for line in &comb.lines {
                    if line.weight == 0.0 {
                        continue;
                    }
                    let step = line.half_width / s as f64;
                    let mut sum = 0.0;
                    for (k, &f) in profile.iter().enumerate() {
                        let nu = line.center + (k as i64 - jmax) as f64 * step;
                        sum += f * filter_at.transmission_at(nu) * table.eval(nu);
                    }
                    acc += line.weight * sum;
                }
                acc * norm
            })
            .collect();
        Ok(out)
    }

    /// Peak-normalized spectrum.
    pub fn spectrum(&self, comb: &SpectralComb, filter: &FilterMode) -> Result<MeasuredSpectrum> {
        let raw = self.raw(comb, filter)?;
        Ok(MeasuredSpectrum::new(self.abscissa, self.x.clone(), raw)?.normalized())
    }
}

fn check_axis(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::param("grid", "scan grid is empty"));
    }
    for &x in xs {
        finite("grid", x)?;
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("grid", "scan grid must be strictly increasing"));
    }
    Ok(())
}

/// Spectrum recorded by scanning the fiber over `x_grid` (m) behind a fixed
/// filter; `fiber` supplies the mode radius.
pub fn simulate_demux_spectrum(
    comb: &SpectralComb,
    filter: &EtalonFilter,
    p: &VipaParams,
    fiber: &FiberMode,
    x_grid: &[f64],
) -> Result<MeasuredSpectrum> {
    comb.validate()?;
    DemuxSimulator::positions(p, fiber.mode_field_radius, x_grid, comb.center())?
        .spectrum(comb, &FilterMode::Fixed(*filter))
}
