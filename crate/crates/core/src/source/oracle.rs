//! Closed-form expectations for the slot-grid generator.
//!
//! Per slot, mode `k` carries a geometric pair number with mean μ, detected
//! with probability `w_k` on the signal arm and `v_k` on the idler arm.
//! With `W = Σ w_k`, `V = Σ v_k`, `O = Σ w_k v_k`, the photon coincidence
//! rate in a window is
//!
//! `C = [(μ + μ²) O P₀ + μ² W V Q] / Δ`
//!
//! where `P₀` is the kernel mass inside the window and `Q` the kernel mass
//! summed over the window shifted by every whole slot. Dark counts add
//! `(R_s R_i − P_s P_i) w` uniformly.

use super::{CollectionPath, DelayKernel, DetectorModel, RunConfig, SourceConfig};
use crate::error::{positive, unit_interval, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticG2 {
    pub g2: f64,
    /// g² of photon events alone, darks and their accidentals removed.
    pub g2_dark_subtracted: f64,
    /// Expected coincidences per second in the window.
    pub coincidence_rate: f64,
    /// Total count rate of the first stream (Hz).
    pub rate_a: f64,
    /// Total count rate of the second stream (Hz).
    pub rate_b: f64,
    /// s.
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleContext {
    pub mu: f64,
    /// s.
    pub slot: f64,
    /// Per-mode signal detection probability.
    pub signal_weights: Vec<f64>,
    /// Per-mode idler detection probability.
    pub idler_weights: Vec<f64>,
    /// Hz.
    pub signal_dark: f64,
    /// Hz.
    pub idler_dark: f64,
    pub cross_kernel: DelayKernel,
    pub auto_kernel: DelayKernel,
}

impl OracleContext {
    pub fn new(
        src: &SourceConfig,
        path: &CollectionPath,
        det_s: &DetectorModel,
        det_i: &DetectorModel,
        run: &RunConfig,
    ) -> Result<Self> {
        src.validate()?;
        path.validate(src.mode_count)?;
        det_s.validate()?;
        det_i.validate()?;
        run.validate()?;
        // The generator works on an integer picosecond slot.
        let slot = (run.slot_duration * 1e12).round() * 1e-12;
        Ok(Self {
            mu: src.mean_pairs_per_slot,
            slot,
            signal_weights: (0..src.mode_count)
                .map(|k| det_s.efficiency * path.signal_transmission(k))
                .collect(),
            idler_weights: (0..src.mode_count)
                .map(|k| det_i.efficiency * path.idler_transmission(k))
                .collect(),
            signal_dark: det_s.dark_rate,
            idler_dark: det_i.dark_rate,
            cross_kernel: DelayKernel::cross(run.correlation_decay, det_s.jitter_sigma, det_i.jitter_sigma),
            auto_kernel: DelayKernel::auto(det_s.jitter_sigma),
        })
    }

    /// One mode, unit efficiencies, no darks, no delay spread.
    pub fn single_mode(mu: f64, slot: f64) -> Self {
        let k = DelayKernel { decay: 0.0, sigma: 0.0 };
        Self {
            mu,
            slot,
            signal_weights: vec![1.0],
            idler_weights: vec![1.0],
            signal_dark: 0.0,
            idler_dark: 0.0,
            cross_kernel: k,
            auto_kernel: k,
        }
    }

    fn shifted_mass(&self, kernel: &DelayKernel, lo: f64, hi: f64) -> f64 {
        let reach = lo.abs().max(hi.abs()) + 60.0 * (kernel.decay + kernel.sigma);
        let k_max = (reach / self.slot).ceil() as i64 + 2;
        (-k_max..=k_max)
            .map(|k| {
                let shift = k as f64 * self.slot;
                kernel.mass(lo - shift, hi - shift)
            })
            .sum()
    }

    /// Signal-idler g² for delays (idler − signal) in `[offset − w/2, offset + w/2)`.
    pub fn cross(&self, window: f64, offset: f64) -> Result<AnalyticG2> {
        positive("window", window)?;
        let (lo, hi) = (offset - window / 2.0, offset + window / 2.0);
        let w: f64 = self.signal_weights.iter().sum();
        let v: f64 = self.idler_weights.iter().sum();
        let o: f64 = self.signal_weights.iter().zip(&self.idler_weights).map(|(a, b)| a * b).sum();
        let mu = self.mu;
        let p0 = self.cross_kernel.mass(lo, hi);
        let q = self.shifted_mass(&self.cross_kernel, lo, hi);
        let photon_c = ((mu + mu * mu) * o * p0 + mu * mu * w * v * q) / self.slot;
        let (ps, pi) = (mu * w / self.slot, mu * v / self.slot);
        finish(photon_c, ps, pi, ps + self.signal_dark, pi + self.idler_dark, window)
    }

    /// HBT g² of the signal arm split with ratio `split` into two detectors
    /// that share the signal detector model.
    pub fn auto_signal(&self, window: f64, split: f64) -> Result<AnalyticG2> {
        positive("window", window)?;
        unit_interval("split", split)?;
        let (lo, hi) = (-window / 2.0, window / 2.0);
        let w: f64 = self.signal_weights.iter().sum();
        let w2: f64 = self.signal_weights.iter().map(|a| a * a).sum();
        let mu = self.mu;
        let p0 = self.auto_kernel.mass(lo, hi);
        let q = self.shifted_mass(&self.auto_kernel, lo, hi);
        let s = split * (1.0 - split);
        let photon_c = s * mu * mu * (w2 * p0 + w * w * q) / self.slot;
        let ps = mu * w / self.slot;
        let (pa, pb) = (split * ps, (1.0 - split) * ps);
        let dark = self.signal_dark;
        finish(photon_c, pa, pb, pa + split * dark, pb + (1.0 - split) * dark, window)
    }
}

fn finish(photon_c: f64, pa: f64, pb: f64, ra: f64, rb: f64, window: f64) -> Result<AnalyticG2> {
    if ra <= 0.0 || rb <= 0.0 {
        return Err(Error::NoSingles("oracle stream has zero rate"));
    }
    let c = photon_c + (ra * rb - pa * pb) * window;
    let g2_dark_subtracted = if pa > 0.0 && pb > 0.0 {
        photon_c / (pa * pb * window)
    } else {
        f64::NAN
    };
    Ok(AnalyticG2 {
        g2: c / (ra * rb * window),
        g2_dark_subtracted,
        coincidence_rate: c,
        rate_a: ra,
        rate_b: rb,
        window,
    })
}

/// Expected signal-idler g² for one configuration.
pub fn analytic_g2_cross(
    src: &SourceConfig,
    path: &CollectionPath,
    det_s: &DetectorModel,
    det_i: &DetectorModel,
    run: &RunConfig,
    window: f64,
    offset: f64,
) -> Result<AnalyticG2> {
    OracleContext::new(src, path, det_s, det_i, run)?.cross(window, offset)
}

/// Expected HBT g² of the signal arm.
pub fn analytic_g2_auto(
    src: &SourceConfig,
    path: &CollectionPath,
    det_s: &DetectorModel,
    run: &RunConfig,
    window: f64,
    split: f64,
) -> Result<AnalyticG2> {
    OracleContext::new(src, path, det_s, &DetectorModel::ideal(0), run)?.auto_signal(window, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_single_mode_limits() {
        for mu in [0.05, 0.125, 0.5, 2.0] {
            let o = OracleContext::single_mode(mu, 2.5e-9);
            let c = o.cross(2.5e-9, 0.0).unwrap();
            assert!((c.g2 - (2.0 + 1.0 / mu)).abs() < 1e-12);
            let a = o.auto_signal(2.5e-9, 0.5).unwrap();
            assert!((a.g2 - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leaked_auto_value() {
        let mut o = OracleContext::single_mode(0.125, 2.5e-9);
        o.signal_weights = vec![0.18, 1.0, 0.18];
        o.idler_weights = vec![0.0, 1.0, 0.0];
        let a = o.auto_signal(2.5e-9, 0.5).unwrap();
        let expected = 1.0 + (1.0 + 2.0 * 0.18f64.powi(2)) / 1.36f64.powi(2);
        assert!((a.g2 - expected).abs() < 1e-12);
        assert!((a.g2 - 1.576).abs() < 1e-3);
    }

    #[test]
    fn far_offsets_are_uncorrelated() {
        let src = SourceConfig::reference();
        let path = CollectionPath::reference(9, 9);
        let run = RunConfig::for_source(&src, 1.0, 0);
        let o = OracleContext::new(&src, &path, &DetectorModel::apd(1), &DetectorModel::snspd(2), &run).unwrap();
        let side = o.cross(2.5e-9, 10e-9).unwrap();
        assert!((side.g2 - 1.0).abs() < 1e-9);
        let centre = o.cross(2.5e-9, 0.0).unwrap();
        assert!(centre.g2 > 6.0 && centre.g2 < 8.0, "{}", centre.g2);
        assert!(centre.g2_dark_subtracted >= centre.g2);
        let narrow = o.cross(2.5e-9 / 3.0, 0.0).unwrap();
        let ratio = narrow.g2 / centre.g2;
        assert!(ratio > 1.6 && ratio < 2.4, "{ratio}");
    }

    #[test]
    fn darks_only_give_unity() {
        let mut src = SourceConfig::reference();
        src.mean_pairs_per_slot = 0.0;
        let path = CollectionPath::single(0, 0);
        let run = RunConfig::for_source(&src, 1.0, 0);
        let g = analytic_g2_cross(&src, &path, &DetectorModel::apd(1), &DetectorModel::snspd(2), &run, 2.5e-9, 0.0)
            .unwrap();
        assert!((g.g2 - 1.0).abs() < 1e-12);
        assert!(g.g2_dark_subtracted.is_nan());
        let none = analytic_g2_cross(&src, &path, &DetectorModel::ideal(1), &DetectorModel::ideal(2), &run, 2.5e-9, 0.0);
        assert!(matches!(none, Err(Error::NoSingles(_))));
    }
}
