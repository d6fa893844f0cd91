//! Forward optical model: VIPA output field, fiber coupling, etalon filters
//! and the collection-efficiency envelope.
//!
//! Positions are in meters in the back focal plane of the collection lens,
//! frequencies in Hz, wavelengths in meters.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{finite, positive, unit_interval, Error, Result};
use crate::SPEED_OF_LIGHT;

/// Which angle factor multiplies the spatial terms of the round-trip phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// `cos(θ_in · n)`, as the field expression is usually transcribed.
    #[default]
    Verbatim,
    /// `cos(θ_in / n)`, the internal-angle form of the standard VIPA model.
    InternalAngle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VipaParams {
    pub refractive_index: f64,
    /// Plate thickness `t` (m).
    pub thickness: f64,
    pub front_reflectivity: f64,
    pub back_reflectivity: f64,
    /// Tilt `θ_in` (rad).
    pub incidence_angle: f64,
    /// Collimated input beam radius `W` along x (m).
    pub input_beam_radius: f64,
    /// Cylindrical focusing lens `f1` (m).
    pub focus_focal_length: f64,
    /// Collection lens `f2` (m).
    pub collection_focal_length: f64,
    pub convention: PhaseConvention,
}

/// Free spectral range of the reference device (Hz).
pub const DESIGN_FSR: f64 = 60.8e9;
/// Single-channel bandwidth of the reference device (Hz).
pub const DESIGN_BANDWIDTH: f64 = 0.76e9;
/// Tilt used for the reference geometry (rad).
pub const DESIGN_INCIDENCE_ANGLE: f64 = 0.0454;
/// Reflectivity of the high-reflector side in the reference geometry.
pub const DESIGN_FRONT_REFLECTIVITY: f64 = 0.999;

/// Round-trip reflectance `ρ = rR` giving the requested finesse,
/// from `π√ρ / (1 − ρ) = F`.
pub fn reflectance_for_finesse(finesse: f64) -> Result<f64> {
    positive("finesse", finesse)?;
    let s = (-PI + (PI * PI + 4.0 * finesse * finesse).sqrt()) / (2.0 * finesse);
    Ok(s * s)
}

impl VipaParams {
    /// Reference geometry: n = 2, W = 1.05 mm, f1 = 150 mm, f2 = 45 mm,
    /// finesse 80, thickness chosen so that the FSR is close to 60.8 GHz and
    /// 1532.9127 nm resonates at the calibration origin
    /// ([`crate::calibration::MODEL_ORIGIN_OFFSET`]).
    pub fn reference() -> Self {
        let rho = reflectance_for_finesse(DESIGN_FSR / DESIGN_BANDWIDTH)
            .expect("finesse constant is positive");
        let base = VipaParams {
            refractive_index: 2.0,
            thickness: 1.0e-3,
            front_reflectivity: DESIGN_FRONT_REFLECTIVITY,
            back_reflectivity: rho / DESIGN_FRONT_REFLECTIVITY,
            incidence_angle: DESIGN_INCIDENCE_ANGLE,
            input_beam_radius: 1.05e-3,
            focus_focal_length: 0.150,
            collection_focal_length: 0.045,
            convention: PhaseConvention::Verbatim,
        };
        base.with_resonance_at(
            crate::calibration::REFERENCE_WAVELENGTH_NM * 1e-9,
            crate::calibration::MODEL_ORIGIN_OFFSET,
            DESIGN_FSR,
        )
        .expect("reference geometry is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let n = finite("refractive_index", self.refractive_index)?;
        if n < 1.0 {
            return Err(Error::param("refractive_index", format!("must be >= 1, got {n}")));
        }
        positive("thickness", self.thickness)?;
        unit_interval("front_reflectivity", self.front_reflectivity)?;
        unit_interval("back_reflectivity", self.back_reflectivity)?;
        finite("incidence_angle", self.incidence_angle)?;
        positive("input_beam_radius", self.input_beam_radius)?;
        positive("focus_focal_length", self.focus_focal_length)?;
        positive("collection_focal_length", self.collection_focal_length)?;
        let rho = self.round_trip_reflectance();
        if rho >= 1.0 {
            return Err(Error::SingularResonance(rho));
        }
        let fsr = self.fsr();
        if !(fsr.is_finite() && fsr > 0.0) {
            return Err(Error::param("incidence_angle", format!("derived FSR {fsr} is not positive")));
        }
        Ok(())
    }

    pub fn round_trip_reflectance(&self) -> f64 {
        self.front_reflectivity * self.back_reflectivity
    }

    pub fn finesse(&self) -> f64 {
        let rho = self.round_trip_reflectance();
        PI * rho.sqrt() / (1.0 - rho)
    }

    /// `c / (2 n t cos θ_in)`.
    pub fn fsr(&self) -> f64 {
        SPEED_OF_LIGHT
            / (2.0 * self.refractive_index * self.thickness * self.incidence_angle.cos())
    }

    fn angle_factor(&self) -> f64 {
        let (theta, n) = (self.incidence_angle, self.refractive_index);
        match self.convention {
            PhaseConvention::Verbatim => (theta * n).cos(),
            PhaseConvention::InternalAngle => (theta / n).cos(),
        }
    }

    /// Coefficients `(A, B, C)` of the dimensionless path polynomial
    /// `P(x) = A x² + B x + C`; the round-trip phase is `2π t P(x) / λ`.
    pub fn phase_coefficients(&self) -> (f64, f64, f64) {
        let n = self.refractive_index;
        let f2 = self.collection_focal_length;
        let k = self.angle_factor();
        (
            k / (f2 * f2 * n),
            2.0 * self.incidence_angle.tan() * k / f2,
            -2.0 * n * self.incidence_angle.cos(),
        )
    }

    pub fn path_polynomial(&self, x: f64) -> f64 {
        let (a, b, c) = self.phase_coefficients();
        (a * x + b) * x + c
    }

    /// Round-trip phase at position `x` for vacuum wavelength `wavelength`.
    pub fn phase(&self, x: f64, wavelength: f64) -> f64 {
        2.0 * PI * self.thickness * self.path_polynomial(x) / wavelength
    }

    /// Gaussian envelope `exp(−f1² x² / (f2² W²))`.
    pub fn envelope(&self, x: f64) -> f64 {
        let s = self.focus_focal_length * x
            / (self.collection_focal_length * self.input_beam_radius);
        (-s * s).exp()
    }

    /// Fractional interference order `−t P(x) / λ` (positive for the usual
    /// geometry).
    pub fn order(&self, x: f64, frequency: f64) -> f64 {
        -self.thickness * self.path_polynomial(x) * frequency / SPEED_OF_LIGHT
    }

    /// Local free spectral range at `x`: the frequency step between
    /// successive resonances seen by a fixed point.
    pub fn local_fsr(&self, x: f64) -> f64 {
        SPEED_OF_LIGHT / (self.thickness * self.path_polynomial(x).abs())
    }

    /// Rescales the thickness so that `wavelength` resonates exactly at
    /// position `x`, keeping the FSR as close as possible to `nominal_fsr`.
    pub fn with_resonance_at(mut self, wavelength: f64, x: f64, nominal_fsr: f64) -> Result<Self> {
        positive("wavelength", wavelength)?;
        positive("nominal_fsr", nominal_fsr)?;
        self.thickness = SPEED_OF_LIGHT
            / (2.0 * self.refractive_index * nominal_fsr * self.incidence_angle.cos());
        let p0 = self.path_polynomial(x);
        if p0 >= 0.0 {
            return Err(Error::param("incidence_angle", "path polynomial must be negative at the reference position"));
        }
        let m = (-p0 * self.thickness / wavelength).round();
        self.thickness = -m * wavelength / p0;
        self.validate()?;
        Ok(self)
    }

    /// Positions inside `[lo, hi]` where `frequency` is exactly resonant.
    pub fn resonance_positions(&self, frequency: f64, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b, c) = self.phase_coefficients();
        let q_lo = self.order(lo, frequency);
        let q_hi = self.order(hi, frequency);
        let (kmin, kmax) = (q_lo.min(q_hi).ceil() as i64, q_lo.max(q_hi).floor() as i64);
        let scale = SPEED_OF_LIGHT / (self.thickness * frequency);
        let mut out = Vec::new();
        for k in kmin..=kmax {
            // A x² + B x + (C + k c / (t ν)) = 0, root on the branch through x ≈ 0.
            let cc = c + k as f64 * scale;
            let x = if a == 0.0 {
                -cc / b
            } else {
                let disc = b * b - 4.0 * a * cc;
                if disc < 0.0 {
                    continue;
                }
                -2.0 * cc / (b + b.signum() * disc.sqrt())
            };
            if x >= lo && x <= hi {
                out.push(x);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// The resonance position of `frequency` closest to `center` within
    /// `center ± half_window`.
    pub fn resonance_near(&self, frequency: f64, center: f64, half_window: f64) -> Option<f64> {
        self.resonance_positions(frequency, center - half_window, center + half_window)
            .into_iter()
            .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
    }

    /// Resonant frequency seen at `x` closest to `near`.
    pub fn resonant_frequency(&self, x: f64, near: f64) -> f64 {
        let k = self.order(x, near).round().max(1.0);
        k * self.local_fsr(x)
    }

    /// Distance in the focal plane between adjacent orders of `frequency`
    /// near `x` (m).
    pub fn order_spacing(&self, x: f64, frequency: f64) -> f64 {
        let (a, b, _) = self.phase_coefficients();
        SPEED_OF_LIGHT / (frequency * self.thickness * (2.0 * a * x + b).abs())
    }

    /// Resonant-frequency shift per unit fiber displacement at `x` (Hz/m).
    pub fn dispersion(&self, x: f64, frequency: f64) -> f64 {
        let (a, b, _) = self.phase_coefficients();
        -frequency * (2.0 * a * x + b) / self.path_polynomial(x)
    }
}

/// Output field of the VIPA at focal-plane position `x` for vacuum wavelength
/// `wavelength`: Gaussian envelope times the resonant factor
/// `[1 − rR exp(iφ)]⁻¹`.
pub fn vipa_field(x: f64, wavelength: f64, p: &VipaParams) -> Result<Complex64> {
    finite("x", x)?;
    positive("wavelength", wavelength)?;
    p.validate()?;
    Ok(vipa_field_unchecked(x, wavelength, p))
}

#[inline]
pub(crate) fn vipa_field_unchecked(x: f64, wavelength: f64, p: &VipaParams) -> Complex64 {
    let rho = p.round_trip_reflectance();
    let denom = Complex64::new(1.0, 0.0) - Complex64::from_polar(rho, p.phase(x, wavelength));
    p.envelope(x) / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberMode {
    /// Mode-field radius `a` (m).
    pub mode_field_radius: f64,
    /// Fiber core position `x0` (m).
    pub center: f64,
}

/// SMF-28 mode-field radius (m).
pub const SMF28_MODE_RADIUS: f64 = 5.2e-6;

impl FiberMode {
    pub fn new(mode_field_radius: f64, center: f64) -> Result<Self> {
        positive("mode_field_radius", mode_field_radius)?;
        finite("center", center)?;
        Ok(Self {
            mode_field_radius,
            center,
        })
    }

    pub fn smf28(center: f64) -> Self {
        Self {
            mode_field_radius: SMF28_MODE_RADIUS,
            center,
        }
    }

    pub fn amplitude(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.mode_field_radius;
        (-s * s).exp()
    }
}

/// Uniform-grid trapezoid settings for the fiber overlap integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub points: usize,
    /// Half-width of the integration domain in units of the mode radius.
    pub half_span_radii: f64,
    /// Maximum relative change of `|result|²` when the step is halved.
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            points: 2001,
            half_span_radii: 8.0,
            tolerance: 1e-4,
        }
    }
}

/// Overlap of an arbitrary field with the fiber mode,
/// `∫ g(τ − x0) E(τ) dτ`, with a step-halving convergence check.
pub fn couple_into_fiber<F>(field: F, fiber: &FiberMode, quad: &Quadrature) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if quad.points < 3 {
        return Err(Error::param("points", "need at least 3 quadrature points"));
    }
    positive("half_span_radii", quad.half_span_radii)?;
    let half = quad.half_span_radii * fiber.mode_field_radius;
    let lo = fiber.center - half;
    let fine_n = 2 * quad.points - 1;
    let h = 2.0 * half / (fine_n - 1) as f64;
    let mut coarse = Complex64::new(0.0, 0.0);
    let mut odd = Complex64::new(0.0, 0.0);
    for i in 0..fine_n {
        let tau = lo + i as f64 * h;
        let v = field(tau) * fiber.amplitude(tau);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        let end = i == 0 || i == fine_n - 1;
        if i % 2 == 0 {
            coarse += if end { v * 0.5 } else { v };
        } else {
            odd += v;
        }
    }
    let coarse_integral = coarse * (2.0 * h);
    let fine_integral = coarse * h + odd * h;
    let (ic, ifn) = (coarse_integral.norm_sqr(), fine_integral.norm_sqr());
    let scale = ic.max(ifn);
    if scale > 0.0 {
        let rel = (ifn - ic).abs() / scale;
        if rel > quad.tolerance {
            return Err(Error::QuadratureNotConverged {
                points: quad.points,
                relative_change: rel,
            });
        }
    }
    Ok(fine_integral)
}

/// Fiber-coupled amplitude of monochromatic light at `wavelength`.
pub fn fiber_coupled_field(wavelength: f64, fiber: &FiberMode, p: &VipaParams) -> Result<Complex64> {
    fiber_coupled_field_with(wavelength, fiber, p, &Quadrature::default())
}

pub fn fiber_coupled_field_with(
    wavelength: f64,
    fiber: &FiberMode,
    p: &VipaParams,
    quad: &Quadrature,
) -> Result<Complex64> {
    positive("wavelength", wavelength)?;
    p.validate()?;
    positive("mode_field_radius", fiber.mode_field_radius)?;
    finite("center", fiber.center)?;
    couple_into_fiber(|x| vipa_field_unchecked(x, wavelength, p), fiber, quad)
}

/// Monochromatic coupled intensity at frequency `frequency`.
pub fn coupled_intensity(frequency: f64, fiber: &FiberMode, p: &VipaParams, quad: &Quadrature) -> Result<f64> {
    fiber_coupled_field_with(SPEED_OF_LIGHT / frequency, fiber, p, quad).map(|a| a.norm_sqr())
}

/// Spectral response of one fixed fiber position, referenced to its peak.
#[derive(Debug, Clone)]
pub struct ChannelResponse {
    pub params: VipaParams,
    pub fiber: FiberMode,
    pub quadrature: Quadrature,
    pub peak_frequency: f64,
    pub peak_intensity: f64,
}

impl ChannelResponse {
    /// Finds the transmission maximum of the fiber channel nearest to
    /// `near_frequency`.
    pub fn locate(p: &VipaParams, fiber: &FiberMode, near_frequency: f64, quad: Quadrature) -> Result<Self> {
        positive("near_frequency", near_frequency)?;
        p.validate()?;
        let guess = p.resonant_frequency(fiber.center, near_frequency);
        let span = p.local_fsr(fiber.center) / 20.0;
        let f = |nu: f64| coupled_intensity(nu, fiber, p, &quad);
        let (peak_frequency, peak_intensity) = golden_max(f, guess - span, guess + span, 1.0)?;
        if !(peak_intensity > 0.0) {
            return Err(Error::ZeroPeak);
        }
        Ok(Self {
            params: *p,
            fiber: *fiber,
            quadrature: quad,
            peak_frequency,
            peak_intensity,
        })
    }

    pub fn fsr(&self) -> f64 {
        self.params.local_fsr(self.fiber.center)
    }

    pub fn intensity(&self, detuning: f64) -> Result<f64> {
        coupled_intensity(self.peak_frequency + detuning, &self.fiber, &self.params, &self.quadrature)
    }

    /// Intensity relative to the peak.
    pub fn relative(&self, detuning: f64) -> Result<f64> {
        Ok(self.intensity(detuning)? / self.peak_intensity)
    }

    /// `10 log10(I(Δν) / I(0))`, clamped to ≤ 0; exactly 0 at zero detuning.
    pub fn crosstalk_db(&self, detuning: f64) -> Result<f64> {
        finite("detuning", detuning)?;
        let half = self.fsr() / 2.0;
        if detuning.abs() > half {
            return Err(Error::param("detuning", format!("|{detuning}| exceeds FSR/2 = {half}")));
        }
        if detuning == 0.0 {
            return Ok(0.0);
        }
        let r = self.relative(detuning)?;
        Ok((10.0 * r.log10()).min(0.0))
    }

    /// Full width at half maximum of the response; `None` when the response
    /// never drops to half within ±FSR/2 (no spectral selectivity).
    pub fn fwhm(&self) -> Result<Option<f64>> {
        let half = self.fsr() / 2.0;
        let step = self.fsr() / 400.0;
        let mut edges = [0.0; 2];
        for (slot, dir) in edges.iter_mut().zip([-1.0, 1.0]) {
            let mut inner = 0.0;
            let mut outer = None;
            let mut d = step;
            while d <= half {
                if self.relative(dir * d)? < 0.5 {
                    outer = Some(d);
                    break;
                }
                inner = d;
                d += step;
            }
            let Some(mut hi) = outer else { return Ok(None) };
            let mut lo = inner;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.relative(dir * mid)? < 0.5 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            *slot = 0.5 * (lo + hi);
        }
        Ok(Some(edges[0] + edges[1]))
    }
}

/// Cross-talk of the channel at `fiber` for a detuning from its peak, the peak
/// being the resonance nearest `near_frequency`.
pub fn crosstalk_db(detuning: f64, fiber: &FiberMode, p: &VipaParams, near_frequency: f64) -> Result<f64> {
    ChannelResponse::locate(p, fiber, near_frequency, Quadrature::default())?.crosstalk_db(detuning)
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Lorentzian filter cavity transmission around one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtalonFilter {
    pub center_frequency: f64,
    pub fwhm: f64,
    pub peak_transmission: f64,
}

impl EtalonFilter {
    pub fn new(center_frequency: f64, fwhm: f64, peak_transmission: f64) -> Result<Self> {
        let f = Self {
            center_frequency,
            fwhm,
            peak_transmission,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        finite("center_frequency", self.center_frequency)?;
        positive("fwhm", self.fwhm)?;
        positive("peak_transmission", self.peak_transmission)?;
        unit_interval("peak_transmission", self.peak_transmission)?;
        Ok(())
    }

    pub fn transmission(&self, detuning: f64) -> f64 {
        etalon_transmission(detuning, self)
    }

    pub fn transmission_at(&self, frequency: f64) -> f64 {
        etalon_transmission(frequency - self.center_frequency, self)
    }

    pub fn recentered(&self, center_frequency: f64) -> Self {
        Self {
            center_frequency,
            ..*self
        }
    }
}

/// `T_peak / (1 + (2Δν / FWHM)²)`.
pub fn etalon_transmission(detuning: f64, f: &EtalonFilter) -> f64 {
    let u = 2.0 * detuning / f.fwhm;
    f.peak_transmission / (1.0 + u * u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyEnvelope {
    pub peak_efficiency: f64,
    pub center_offset: f64,
    /// May be `f64::INFINITY` for a flat envelope.
    pub gaussian_sigma: f64,
}

impl EfficiencyEnvelope {
    /// 25.5 % at +2.5 GHz, falling to 17 % at ±22.5 GHz from there.
    pub fn reference() -> Self {
        let sigma = 22.5e9 / (2.0 * (0.255f64 / 0.17).ln()).sqrt();
        Self {
            peak_efficiency: 0.255,
            center_offset: 2.5e9,
            gaussian_sigma: sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite("peak_efficiency", self.peak_efficiency)?;
        if !(self.peak_efficiency > 0.0 && self.peak_efficiency <= 1.0) {
            return Err(Error::param("peak_efficiency", "must lie in (0, 1]"));
        }
        finite("center_offset", self.center_offset)?;
        if !(self.gaussian_sigma > 0.0) {
            return Err(Error::param("gaussian_sigma", "must be > 0"));
        }
        Ok(())
    }
}

pub fn system_efficiency(detuning: f64, env: &EfficiencyEnvelope) -> f64 {
    let d = detuning - env.center_offset;
    env.peak_efficiency * (-d * d / (2.0 * env.gaussian_sigma * env.gaussian_sigma)).exp()
}

/// Channels that fit into one free spectral range without aliasing.
pub fn usable_channel_count(spacing: f64, p: &VipaParams) -> Result<usize> {
    positive("spacing", spacing)?;
    p.validate()?;
    Ok((p.fsr() / spacing).floor() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> VipaParams {
        VipaParams::reference()
    }

    #[test]
    fn finesse_reflectance_round_trip() {
        let rho = reflectance_for_finesse(80.0).unwrap();
        assert_relative_eq!(rho, 0.96149, epsilon = 1e-5);
        let p = params();
        assert_relative_eq!(p.finesse(), 80.0, epsilon = 1e-9);
    }

    #[test]
    fn reference_geometry_matches_targets() {
        let p = params();
        assert_eq!(p.refractive_index, 2.0);
        assert!((p.fsr() - 60.8e9).abs() < 0.05e9, "fsr {}", p.fsr());
        assert!((p.refractive_index * p.thickness - 2.466e-3).abs() < 5e-6);
        let lambda0 = 1532.9127e-9;
        let q = p.order(crate::calibration::MODEL_ORIGIN_OFFSET, SPEED_OF_LIGHT / lambda0);
        assert!((q - q.round()).abs() < 1e-9);
    }

    #[test]
    fn zero_reflectance_gives_envelope() {
        let mut p = params();
        p.back_reflectivity = 0.0;
        for &x in &[-3e-4, -1e-5, 0.0, 2e-4] {
            let v = vipa_field(x, 1.5329e-6, &p).unwrap();
            let env = (-(0.15f64 * x / (0.045 * 1.05e-3)).powi(2)).exp();
            assert_relative_eq!(v.re, env, epsilon = 1e-15);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn envelope_is_one_at_origin() {
        let p = params();
        let lam = 1.5327e-6;
        let v = vipa_field(0.0, lam, &p).unwrap();
        let rho = p.round_trip_reflectance();
        let expected = Complex64::new(1.0, 0.0) / (1.0 - Complex64::from_polar(rho, p.phase(0.0, lam)));
        assert_relative_eq!(v.re, expected.re, epsilon = 1e-12);
        assert_relative_eq!(v.im, expected.im, epsilon = 1e-12);
    }

    #[test]
    fn rejects_singular_and_non_finite() {
        let mut p = params();
        p.front_reflectivity = 1.0;
        p.back_reflectivity = 1.0;
        assert!(matches!(vipa_field(0.0, 1.5e-6, &p), Err(Error::SingularResonance(_))));
        assert!(matches!(vipa_field(f64::NAN, 1.5e-6, &params()), Err(Error::NonFinite(_))));
        assert!(vipa_field(0.0, -1.0, &params()).is_err());
    }

    #[test]
    fn maxima_along_frequency_are_one_fsr_apart() {
        // Independent scan of |E|² at a fixed point, with parabolic peak refinement.
        let p = params();
        let x = 1e-4;
        let nu0 = SPEED_OF_LIGHT / 1532.7e-9;
        let step = 20e6;
        let n = (140e9 / step) as usize;
        let vals: Vec<f64> = (0..n)
            .map(|i| vipa_field(x, SPEED_OF_LIGHT / (nu0 + i as f64 * step), &p).unwrap().norm_sqr())
            .collect();
        let mut peaks = Vec::new();
        for i in 1..n - 1 {
            if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
                let (a, b, c) = (vals[i - 1], vals[i], vals[i + 1]);
                let off = 0.5 * (a - c) / (a - 2.0 * b + c);
                peaks.push((i as f64 + off) * step);
            }
        }
        assert!(peaks.len() >= 2);
        let sep = peaks[1] - peaks[0];
        assert!((sep - 60.8e9).abs() < 0.1e9, "separation {sep}");
    }

    #[test]
    fn constant_field_couples_like_gaussian_integral() {
        let quad = Quadrature::default();
        let a = 5.2e-6;
        let expected = a * PI.sqrt();
        for &x0 in &[-2e-4, 0.0, 3.3e-4] {
            let v = couple_into_fiber(|_| Complex64::new(2.0, 0.0), &FiberMode::smf28(x0), &quad).unwrap();
            assert_relative_eq!(v.re, 2.0 * expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn coarse_grid_is_reported() {
        let quad = Quadrature {
            points: 5,
            half_span_radii: 8.0,
            tolerance: 1e-4,
        };
        let r = couple_into_fiber(
            |x| Complex64::from_polar(1.0, x * 4e6),
            &FiberMode::smf28(0.0),
            &quad,
        );
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn response_resolution_near_design_value() {
        let p = params();
        let nu = SPEED_OF_LIGHT / 1532.71e-9;
        let x0 = p.resonance_near(nu, 0.0, 3.3e-4).unwrap();
        let r = ChannelResponse::locate(&p, &FiberMode::smf28(x0), nu, Quadrature::default()).unwrap();
        let fwhm = r.fwhm().unwrap().unwrap();
        assert!((fwhm - 1.53e9).abs() < 0.15 * 1.53e9, "fwhm {fwhm}");
        assert_eq!(r.crosstalk_db(0.0).unwrap(), 0.0);
        assert!(r.crosstalk_db(2e9).unwrap() < -3.0);
        assert!(r.crosstalk_db(40e9).is_err());
    }

    #[test]
    fn resonance_positions_are_resonant() {
        let p = params();
        let nu = SPEED_OF_LIGHT / 1532.6e-9;
        let xs = p.resonance_positions(nu, -4e-4, 4e-4);
        assert!(!xs.is_empty());
        for x in xs {
            let q = p.order(x, nu);
            assert!((q - q.round()).abs() < 1e-7);
        }
    }

    #[test]
    fn etalon_closed_forms() {
        let f = EtalonFilter::new(0.0, 6.1e9, 0.8).unwrap();
        assert_eq!(f.transmission(0.0), 0.8);
        assert_relative_eq!(f.transmission(3.05e9), 0.4, epsilon = 1e-15);
        let unit = EtalonFilter::new(0.0, 6.1e9, 1.0).unwrap();
        assert_relative_eq!(unit.transmission(6.5e9), 1.0 / (1.0 + (13.0f64 / 6.1).powi(2)), epsilon = 1e-15);
        assert!((unit.transmission(6.5e9) - 0.1806).abs() < 2e-4);
        assert!(EtalonFilter::new(0.0, 0.0, 1.0).is_err());
        assert!(EtalonFilter::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn efficiency_envelope_values() {
        let env = EfficiencyEnvelope::reference();
        assert_eq!(system_efficiency(2.5e9, &env), 0.255);
        assert!((env.gaussian_sigma - 25e9).abs() < 0.05e9);
        assert_relative_eq!(system_efficiency(2.5e9 + 22.5e9, &env), 0.17, epsilon = 1e-12);
        assert_relative_eq!(system_efficiency(2.5e9 - 22.5e9, &env), 0.17, epsilon = 1e-12);
        let flat = EfficiencyEnvelope {
            peak_efficiency: 1.0,
            center_offset: 0.0,
            gaussian_sigma: f64::INFINITY,
        };
        assert_eq!(system_efficiency(-3e10, &flat), 1.0);
    }

    #[test]
    fn channel_counts() {
        let mut p = params();
        assert_eq!(usable_channel_count(6.5e9, &p).unwrap(), 9);
        assert_eq!(usable_channel_count(10e9, &p).unwrap(), 6);
        assert_eq!(usable_channel_count(p.fsr(), &p).unwrap(), 1);
        p.thickness = SPEED_OF_LIGHT / (2.0 * 2.0 * 60.8e9 * p.incidence_angle.cos());
        assert_eq!(usable_channel_count(6.5e9, &p).unwrap(), 9);
    }
}
