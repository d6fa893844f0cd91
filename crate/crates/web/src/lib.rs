//! Browser bindings. Every export returns a flat `Float64Array` of
//! interleaved `(x, y)` pairs or a `key = value` text summary; errors become
//! JavaScript exceptions carrying the message.

use wasm_bindgen::prelude::*;

use freqmux::optics::{ChannelResponse, EtalonFilter, FiberMode, Quadrature, VipaParams};
use freqmux::source::{CollectionPath, DetectorModel, OracleContext, RunConfig, SourceConfig};
use freqmux::spectrum::{build_comb, DemuxSimulator, FilterMode};
use freqmux::SPEED_OF_LIGHT;

const WAVELENGTH: f64 = 1532.71e-9;

fn channel(rr: f64) -> freqmux::Result<ChannelResponse> {
    let mut p = VipaParams::reference();
    if !(0.0..1.0).contains(&rr) {
        return Err(freqmux::Error::InvalidParameter {
            name: "rr",
            reason: format!("must lie in [0, 1), got {rr}"),
        });
    }
    p.back_reflectivity = rr / p.front_reflectivity;
    let nu = SPEED_OF_LIGHT / WAVELENGTH;
    let x0 = p
        .resonance_near(nu, 0.0, 3.3e-4)
        .ok_or_else(|| freqmux::Error::Format("no resonance inside the aperture".into()))?;
    ChannelResponse::locate(&p, &FiberMode::smf28(x0), nu, Quadrature::default())
}

/// `(detuning GHz, dB)` pairs of the fiber-coupled channel response.
pub fn response_curve(rr: f64, span_ghz: f64, points: usize) -> freqmux::Result<Vec<f64>> {
    let r = channel(rr)?;
    let half = (span_ghz * 1e9).min(r.fsr() / 2.0);
    let n = points.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let d = -half + 2.0 * half * k as f64 / (n - 1) as f64;
        out.push(d / 1e9);
        out.push(r.crosstalk_db(d)?);
    }
    Ok(out)
}

pub fn response_text(rr: f64) -> freqmux::Result<String> {
    let r = channel(rr)?;
    let fwhm = r.fwhm()?;
    let mut s = match fwhm {
        Some(w) => format!("fwhm_ghz = {:.3}\n", w / 1e9),
        None => "fwhm_ghz = none (flat response)\n".to_string(),
    };
    for d in [5e9, 6.5e9] {
        let db = r.crosstalk_db(-d)?.max(r.crosstalk_db(d)?);
        s.push_str(&format!("crosstalk_at_{:.1}_ghz_db = {db:.2}\n", d / 1e9));
    }
    s.push_str(&format!("finesse = {:.1}\n", r.params.finesse()));
    Ok(s)
}

/// `(detuning GHz, normalized intensity)` pairs of a demultiplexed comb.
pub fn spectrum_curve(half_width_mhz: f64, lines: usize, filter_fwhm_ghz: f64, span_ghz: f64) -> freqmux::Result<Vec<f64>> {
    let nu0 = SPEED_OF_LIGHT / 1532.7e-9;
    let step = 0.18e9;
    let n = (span_ghz * 1e9 / step).round() as i64;
    let axis: Vec<f64> = (-n..=n).map(|k| k as f64 * step).collect();
    let sim = DemuxSimulator::tracked(&VipaParams::reference(), 5.2e-6, &axis, nu0)?;
    let comb = build_comb(nu0, 6.5e9, lines, half_width_mhz * 1e6)?;
    let filter = FilterMode::Tracked(EtalonFilter::new(nu0, filter_fwhm_ghz * 1e9, 1.0)?);
    let s = sim.spectrum(&comb, &filter)?;
    Ok(s.x.iter().zip(&s.intensity).flat_map(|(x, y)| [x / 1e9, *y]).collect())
}

fn oracle(mu: f64, decay_ns: f64, leakage: bool) -> freqmux::Result<OracleContext> {
    let mut src = SourceConfig::reference();
    src.mean_pairs_per_slot = mu;
    let path = if leakage {
        CollectionPath::reference(10, 10)
    } else {
        CollectionPath::single(10, 10)
    };
    let mut run = RunConfig::for_source(&src, 1.0, 0);
    run.correlation_decay = decay_ns * 1e-9;
    OracleContext::new(&src, &path, &DetectorModel::apd(1), &DetectorModel::snspd(2), &run)
}

/// `(window ns, g²)` pairs of the analytic signal-idler correlation.
pub fn g2_window_curve(mu: f64, decay_ns: f64, leakage: bool) -> freqmux::Result<Vec<f64>> {
    let o = oracle(mu, decay_ns, leakage)?;
    let mut out = Vec::new();
    for k in 1..=60 {
        let w = 0.1e-9 * k as f64;
        out.push(w * 1e9);
        out.push(o.cross(w, 0.0)?.g2);
    }
    Ok(out)
}

/// `(μ, g²)` pairs at a fixed window, log-spaced μ from 0.01 to 10.
pub fn g2_mu_curve(window_ns: f64, decay_ns: f64, leakage: bool) -> freqmux::Result<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..=40 {
        let mu = 10f64.powf(-2.0 + 3.0 * k as f64 / 40.0);
        out.push(mu);
        out.push(oracle(mu, decay_ns, leakage)?.cross(window_ns * 1e-9, 0.0)?.g2);
    }
    Ok(out)
}

fn js(e: freqmux::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen(js_name = responseCurve)]
pub fn response_curve_js(rr: f64, span_ghz: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    response_curve(rr, span_ghz, points).map_err(js)
}

#[wasm_bindgen(js_name = responseSummary)]
pub fn response_text_js(rr: f64) -> Result<String, JsValue> {
    response_text(rr).map_err(js)
}

#[wasm_bindgen(js_name = spectrumCurve)]
pub fn spectrum_curve_js(half_width_mhz: f64, lines: usize, filter_fwhm_ghz: f64, span_ghz: f64) -> Result<Vec<f64>, JsValue> {
    spectrum_curve(half_width_mhz, lines, filter_fwhm_ghz, span_ghz).map_err(js)
}

#[wasm_bindgen(js_name = g2WindowCurve)]
pub fn g2_window_curve_js(mu: f64, decay_ns: f64, leakage: bool) -> Result<Vec<f64>, JsValue> {
    g2_window_curve(mu, decay_ns, leakage).map_err(js)
}

#[wasm_bindgen(js_name = g2MuCurve)]
pub fn g2_mu_curve_js(window_ns: f64, decay_ns: f64, leakage: bool) -> Result<Vec<f64>, JsValue> {
    g2_mu_curve(window_ns, decay_ns, leakage).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_peaks_at_zero_db() {
        let c = response_curve(0.96, 10.0, 41).unwrap();
        assert_eq!(c.len(), 82);
        assert_eq!(c[40], 0.0);
        assert!(c.chunks(2).all(|p| p[1] <= 0.0));
        assert!(response_text(0.0).unwrap().contains("flat"));
        assert!(response_curve(1.0, 10.0, 5).is_err());
    }

    #[test]
    fn spectrum_has_one_peak_per_line() {
        let c = spectrum_curve(38.3, 3, 16.0, 12.0).unwrap();
        let y: Vec<f64> = c.chunks(2).map(|p| p[1]).collect();
        let peaks = (1..y.len() - 1).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.1).count();
        assert_eq!(peaks, 3);
    }

    #[test]
    fn ideal_g2_approaches_the_thermal_limit() {
        let c = g2_mu_curve(2.5, 0.0, false).unwrap();
        let (mu, g) = (c[0], c[1]);
        // Detector jitter spreads some coincidences outside the window.
        assert!(g < 2.0 + 1.0 / mu && g > 0.8 * (2.0 + 1.0 / mu));
        let w = g2_window_curve(0.125, 0.25, true).unwrap();
        assert!(w[1] > w[w.len() - 1]);
    }
}
