use std::io::Write;

use freqmux::optics::{
    system_efficiency, usable_channel_count, ChannelResponse, EfficiencyEnvelope, FiberMode, Quadrature, VipaParams,
};
use freqmux::SPEED_OF_LIGHT;

use super::{Context, GHZ, UM};
use crate::config::Manifest;
use crate::error::CliError;

struct Settings {
    params: VipaParams,
    frequency: f64,
    fiber_radius: f64,
    channels: usize,
    spacing: f64,
    span: f64,
    step: f64,
}

fn settings(ctx: &Context) -> Result<Settings, CliError> {
    let p = &ctx.params;
    let mut params = VipaParams::reference();
    let wavelength_nm: f64 = p.get("wavelength_nm", 1532.71)?;
    let rr: f64 = p.get("rr", params.round_trip_reflectance())?;
    if !(0.0..1.0).contains(&rr) {
        return Err(CliError::Config(format!("key `rr`: must lie in [0, 1), got {rr}")));
    }
    params.back_reflectivity = rr / params.front_reflectivity;
    let s = Settings {
        params,
        frequency: SPEED_OF_LIGHT / (wavelength_nm * 1e-9),
        fiber_radius: p.get("fiber_radius_um", 5.2)? * UM,
        channels: p.get("channels", 1)?,
        spacing: p.get("channel_spacing_ghz", 6.5)? * GHZ,
        span: p.get("span_ghz", 30.0)? * GHZ,
        step: p.get("step_ghz", 0.1)? * GHZ,
    };
    p.finish()?;
    if s.channels == 0 {
        return Err(CliError::Config("key `channels`: need at least one channel".into()));
    }
    if !(s.step > 0.0 && s.span > 0.0) {
        return Err(CliError::Config("keys `span_ghz` and `step_ghz` must be > 0".into()));
    }
    Ok(s)
}

/// Fiber-coupled response of the channel at the configured wavelength, the
/// cross-talk curve, the efficiency envelope and optionally a set of
/// neighbouring channels on a common detuning axis.
pub fn vipa_response(ctx: Context) -> Result<(), CliError> {
    let s = settings(&ctx)?;
    let quad = Quadrature::default();
    let x0 = s
        .params
        .resonance_near(s.frequency, 0.0, 3.3e-4)
        .ok_or_else(|| CliError::Numeric("no resonance of the configured wavelength inside the aperture".into()))?;
    let fiber = FiberMode::new(s.fiber_radius, x0)?;
    let centre = ChannelResponse::locate(&s.params, &fiber, s.frequency, quad)?;
    let half = (centre.fsr() / 2.0).min(s.span);
    let n = (half / s.step).floor() as i64;
    let detunings: Vec<f64> = (-n..=n).map(|k| k as f64 * s.step).collect();

    let mut w = ctx.create("response.csv")?;
    writeln!(w, "detuning_hz,relative,crosstalk_db")?;
    for &d in &detunings {
        writeln!(w, "{d},{},{}", centre.relative(d)?, centre.crosstalk_db(d)?)?;
    }
    w.flush()?;

    let env = EfficiencyEnvelope::reference();
    let mut w = ctx.create("efficiency.csv")?;
    writeln!(w, "detuning_hz,efficiency")?;
    for &d in &detunings {
        writeln!(w, "{d},{}", system_efficiency(d, &env))?;
    }
    w.flush()?;

    // Neighbouring channels: fibers moved to where ν0 + kΔ resonates.
    let dispersion = s.params.dispersion(x0, s.frequency);
    let reach = 0.5 * s.params.order_spacing(x0, s.frequency);
    let mid = (s.channels as f64 - 1.0) / 2.0;
    let mut w = ctx.create("channels.csv")?;
    writeln!(w, "channel,offset_hz,detuning_hz,relative,weighted")?;
    for k in 0..s.channels {
        let offset = (k as f64 - mid) * s.spacing;
        let nu = s.frequency + offset;
        let guess = x0 + offset / dispersion;
        let xk = s
            .params
            .resonance_near(nu, guess, reach)
            .ok_or_else(|| CliError::Numeric(format!("channel {k}: no resonance near {guess:.3e} m")))?;
        let r = ChannelResponse::locate(&s.params, &FiberMode::new(s.fiber_radius, xk)?, nu, quad)?;
        let shift = r.peak_frequency - centre.peak_frequency;
        let eff = system_efficiency(shift, &env);
        for &d in &detunings {
            let rel = r.relative(d - shift)?;
            writeln!(w, "{k},{shift},{d},{rel},{}", rel * eff)?;
        }
    }
    w.flush()?;

    let mut m = Manifest::default();
    let fwhm = centre.fwhm()?;
    m.put("flat_response", fwhm.is_none());
    m.put("fwhm_hz", fwhm.unwrap_or(f64::NAN));
    m.put("peak_frequency_hz", centre.peak_frequency);
    m.put("fsr_hz", centre.fsr());
    m.put("finesse", s.params.finesse());
    for d in [5e9, 6.5e9] {
        let worst = centre.crosstalk_db(-d)?.max(centre.crosstalk_db(d)?);
        m.put(&format!("crosstalk_db_at_{}mhz", (d / 1e6).round()), worst);
    }
    m.put("usable_channels", usable_channel_count(s.spacing, &s.params)?);
    m.put("channel_curves", s.channels);
    ctx.finish(&m)
}
