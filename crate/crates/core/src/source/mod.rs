//! Time-tag generator for a multimode cavity photon-pair source.
//!
//! Emission is discretized into coherence slots on a fixed grid. In every
//! slot each mode pair carries a Bose-Einstein (geometric) number of pairs
//! with mean μ. All photons of a slot leave at the slot epoch; each idler is
//! delayed from its signal partner by a double-exponential draw. Detection
//! thins photons independently, detectors add Gaussian jitter and Poisson
//! dark counts.
//!
//! A geometric count thinned with probability `r` is again geometric with
//! mean `μ r`. The generator samples that count of pairs with at least one
//! detected photon directly and splits each into signal-only, idler-only or
//! both, which is exact and skips the slots that leave no tag.

mod classical;
mod kernel;
mod oracle;

use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal, Poisson};
use rayon::prelude::*;

pub use classical::{ClassicalSource, ClassicalRun};
pub use kernel::DelayKernel;
pub use oracle::{analytic_g2_auto, analytic_g2_cross, AnalyticG2, OracleContext};

use crate::error::{finite, positive, unit_interval, Error, Result};
use crate::optics::{etalon_transmission, EtalonFilter};
use crate::tags::TimeTag;

/// Signal-idler delay decay used by default (s).
pub const DEFAULT_CORRELATION_DECAY: f64 = 0.25e-9;
/// Default mode FWHM (Hz): gives a 2.5 ns coherence slot.
pub const DEFAULT_MODE_FWHM: f64 = 1.0 / (std::f64::consts::PI * 2.5e-9);
/// Per-mode mean pairs per slot at 1 mW of pump.
pub const DEFAULT_MU_PER_MW: f64 = 0.125;
/// Largest delay offset applied to any photon (s); bounds streaming hold-back.
pub const MAX_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub mode_count: usize,
    /// Hz.
    pub mode_spacing: f64,
    /// Hz, half width at half maximum of each cavity mode.
    pub mode_half_width: f64,
    /// μ, per mode pair per coherence slot.
    pub mean_pairs_per_slot: f64,
    /// μ per mW of pump power.
    pub pump_power_scale: f64,
    /// Hz.
    pub pump_frequency: f64,
    /// Hz; idler frequency of the central mode.
    pub idler_center: f64,
}

impl SourceConfig {
    /// Twenty modes at 6.5 GHz, 795/1532 nm pair, μ = 0.125 at 1 mW.
    pub fn reference() -> Self {
        Self {
            mode_count: 20,
            mode_spacing: 6.5e9,
            mode_half_width: DEFAULT_MODE_FWHM / 2.0,
            mean_pairs_per_slot: DEFAULT_MU_PER_MW,
            pump_power_scale: DEFAULT_MU_PER_MW,
            pump_frequency: 572_699_000_000_000.0,
            idler_center: 195_602_000_000_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_count == 0 {
            return Err(Error::param("mode_count", "need at least one mode"));
        }
        positive("mode_spacing", self.mode_spacing)?;
        positive("mode_half_width", self.mode_half_width)?;
        finite("mean_pairs_per_slot", self.mean_pairs_per_slot)?;
        if self.mean_pairs_per_slot < 0.0 {
            return Err(Error::param("mean_pairs_per_slot", "must be >= 0"));
        }
        finite("pump_power_scale", self.pump_power_scale)?;
        positive("pump_frequency", self.pump_frequency)?;
        positive("idler_center", self.idler_center)?;
        if self.idler_center >= self.pump_frequency {
            return Err(Error::param("idler_center", "must be below the pump frequency"));
        }
        Ok(())
    }

    /// Sets μ from a pump power through the linear scale.
    pub fn at_pump_power(mut self, milliwatts: f64) -> Self {
        self.mean_pairs_per_slot = self.pump_power_scale * milliwatts;
        self
    }

    pub fn mode_fwhm(&self) -> f64 {
        2.0 * self.mode_half_width
    }

    /// Coherence slot `1 / (π · FWHM)` (s).
    pub fn coherence_slot(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.mode_fwhm())
    }

    pub fn idler_frequency(&self, mode: usize) -> f64 {
        let mid = (self.mode_count as f64 - 1.0) / 2.0;
        self.idler_center + (mode as f64 - mid) * self.mode_spacing
    }

    /// Energy-conserving partner: `ω_p − ω_i`.
    pub fn signal_frequency(&self, mode: usize) -> f64 {
        self.pump_frequency - self.idler_frequency(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Hz.
    pub dark_rate: f64,
    /// Gaussian timing jitter, standard deviation (s).
    pub jitter_sigma: f64,
    pub channel: u8,
}

impl DetectorModel {
    /// Silicon APD on the signal arm.
    pub fn apd(channel: u8) -> Self {
        Self {
            efficiency: 0.55,
            dark_rate: 60.0,
            jitter_sigma: 120e-12,
            channel,
        }
    }

    /// Superconducting nanowire detector on the idler arm.
    pub fn snspd(channel: u8) -> Self {
        Self {
            efficiency: 0.65,
            dark_rate: 70.0,
            jitter_sigma: 120e-12,
            channel,
        }
    }

    pub fn ideal(channel: u8) -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 0.0,
            channel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        unit_interval("efficiency", self.efficiency)?;
        finite("dark_rate", self.dark_rate)?;
        finite("jitter_sigma", self.jitter_sigma)?;
        if self.dark_rate < 0.0 || self.jitter_sigma < 0.0 {
            return Err(Error::param("detector", "dark rate and jitter must be >= 0"));
        }
        Ok(())
    }
}

/// Signal filter transmissions of modes detuned by `0, 1, .., cutoff` mode
/// spacings from the selected mode.
pub fn filter_leakage(filter_fwhm: f64, spacing: f64, cutoff: usize) -> Vec<f64> {
    let f = EtalonFilter {
        center_frequency: 0.0,
        fwhm: filter_fwhm,
        peak_transmission: 1.0,
    };
    (0..=cutoff).map(|k| etalon_transmission(k as f64 * spacing, &f)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionPath {
    pub signal_mode: usize,
    pub idler_mode: usize,
    /// Transmission of signal modes at `|k − signal_mode| = 0, 1, ..`.
    pub signal_leakage: Vec<f64>,
    /// Transmission of idler modes at `|k − idler_mode| = 0, 1, ..`.
    pub idler_leakage: Vec<f64>,
    /// Extra idler transmission factor (0.05 makes the idler rate 20× smaller).
    pub excess_idler_loss: f64,
}

impl CollectionPath {
    /// 6.1 GHz signal filter passing `m ± 1` and `m ± 2`, ideal VIPA channel.
    pub fn reference(signal_mode: usize, idler_mode: usize) -> Self {
        Self {
            signal_mode,
            idler_mode,
            signal_leakage: filter_leakage(6.1e9, 6.5e9, 2),
            idler_leakage: vec![1.0],
            excess_idler_loss: 1.0,
        }
    }

    /// Only the selected modes are transmitted.
    pub fn single(signal_mode: usize, idler_mode: usize) -> Self {
        Self {
            signal_mode,
            idler_mode,
            signal_leakage: vec![1.0],
            idler_leakage: vec![1.0],
            excess_idler_loss: 1.0,
        }
    }

    pub fn validate(&self, mode_count: usize) -> Result<()> {
        for &m in &[self.signal_mode, self.idler_mode] {
            if m >= mode_count {
                return Err(Error::UnknownMode { mode: m, count: mode_count });
            }
        }
        for &t in self.signal_leakage.iter().chain(&self.idler_leakage) {
            unit_interval("leakage", t)?;
        }
        unit_interval("excess_idler_loss", self.excess_idler_loss)?;
        Ok(())
    }

    pub fn signal_transmission(&self, mode: usize) -> f64 {
        self.signal_leakage.get(mode.abs_diff(self.signal_mode)).copied().unwrap_or(0.0)
    }

    pub fn idler_transmission(&self, mode: usize) -> f64 {
        self.idler_leakage.get(mode.abs_diff(self.idler_mode)).copied().unwrap_or(0.0) * self.excess_idler_loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// s.
    pub duration: f64,
    pub rng_seed: u64,
    /// s.
    pub slot_duration: f64,
    /// Decay of the double-exponential signal-idler delay (s).
    pub correlation_decay: f64,
    /// Slots generated per shard; part of the reproducibility contract.
    pub shard_slots: u64,
    /// Largest number of tags a batch run may hold in memory.
    pub memory_budget: u64,
}

impl RunConfig {
    pub fn for_source(src: &SourceConfig, duration: f64, rng_seed: u64) -> Self {
        Self {
            duration,
            rng_seed,
            slot_duration: src.coherence_slot(),
            correlation_decay: DEFAULT_CORRELATION_DECAY,
            shard_slots: 1 << 20,
            memory_budget: 40_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("duration", self.duration)?;
        positive("slot_duration", self.slot_duration)?;
        finite("correlation_decay", self.correlation_decay)?;
        if self.correlation_decay < 0.0 {
            return Err(Error::param("correlation_decay", "must be >= 0"));
        }
        if self.shard_slots == 0 {
            return Err(Error::param("shard_slots", "must be > 0"));
        }
        if (self.slot_duration * 1e12).round() < 1.0 {
            return Err(Error::param("slot_duration", "must be at least 1 ps"));
        }
        Ok(())
    }
}

/// Signal and idler tag streams, each sorted by time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagStreams {
    pub signal: Vec<TimeTag>,
    pub idler: Vec<TimeTag>,
}

/// Expected detection rates of a configuration (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub signal_photons: f64,
    pub idler_photons: f64,
    pub signal_dark: f64,
    pub idler_dark: f64,
}

impl ExpectedRates {
    pub fn signal(&self) -> f64 {
        self.signal_photons + self.signal_dark
    }

    pub fn idler(&self) -> f64 {
        self.idler_photons + self.idler_dark
    }
}

#[derive(Debug, Clone, Copy)]
struct ModeChannel {
    p_signal: f64,
    p_idler: f64,
}

/// Sharded, reproducible generator.
#[derive(Debug, Clone)]
pub struct TagGenerator {
    mu: f64,
    modes: Vec<ModeChannel>,
    det_s: DetectorModel,
    det_i: DetectorModel,
    run: RunConfig,
    slot_ps: u64,
    end_ps: u64,
    total_slots: u64,
    guard_ps: u64,
}

impl TagGenerator {
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
        let modes = (0..src.mode_count)
            .map(|k| ModeChannel {
                p_signal: det_s.efficiency * path.signal_transmission(k),
                p_idler: det_i.efficiency * path.idler_transmission(k),
            })
            .filter(|m| m.p_signal > 0.0 || m.p_idler > 0.0)
            .collect();
        let slot_ps = (run.slot_duration * 1e12).round() as u64;
        let end_ps = (run.duration * 1e12).round() as u64;
        if end_ps == 0 {
            return Err(Error::param("duration", "shorter than 1 ps"));
        }
        Ok(Self {
            mu: src.mean_pairs_per_slot,
            modes,
            det_s: *det_s,
            det_i: *det_i,
            run: *run,
            slot_ps,
            end_ps,
            total_slots: end_ps.div_ceil(slot_ps),
            guard_ps: (MAX_OFFSET * 1e12) as u64,
        })
    }

    pub fn expected_rates(&self) -> ExpectedRates {
        let slot = self.slot_ps as f64 * 1e-12;
        let w: f64 = self.modes.iter().map(|m| m.p_signal).sum();
        let v: f64 = self.modes.iter().map(|m| m.p_idler).sum();
        ExpectedRates {
            signal_photons: self.mu * w / slot,
            idler_photons: self.mu * v / slot,
            signal_dark: self.det_s.dark_rate,
            idler_dark: self.det_i.dark_rate,
        }
    }

    pub fn expected_tags(&self) -> f64 {
        let r = self.expected_rates();
        (r.signal() + r.idler()) * self.end_ps as f64 * 1e-12
    }

    pub fn shard_count(&self) -> u64 {
        self.total_slots.div_ceil(self.run.shard_slots)
    }

    fn shard_bounds(&self, shard: u64) -> (u64, u64) {
        let first = shard * self.run.shard_slots;
        let last = ((shard + 1) * self.run.shard_slots).min(self.total_slots);
        (first, last)
    }

    /// Unsorted tags originating in `shard`.
    fn generate_shard(&self, shard: u64) -> TagStreams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run.rng_seed);
        rng.set_stream(shard);
        let (first, last) = self.shard_bounds(shard);
        let mut out = TagStreams::default();
        let guard = self.guard_ps as f64;
        let jitter = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
            if sigma > 0.0 {
                Normal::new(0.0, sigma * 1e12).expect("sigma > 0").sample(rng)
            } else {
                0.0
            }
        };
        let decay = (self.run.correlation_decay > 0.0)
            .then(|| Exp::new(1.0 / (self.run.correlation_decay * 1e12)).expect("decay > 0"));
        let end = self.end_ps as i64;
        let push = |v: &mut Vec<TimeTag>, base: u64, offset: f64, channel: u8| {
            let t = base as i64 + offset.clamp(-guard, guard).round() as i64;
            if (0..end).contains(&t) {
                v.push(TimeTag::new(channel, t as u64));
            }
        };
        for m in &self.modes {
            // Pairs with at least one detected photon form a thinned
            // geometric count, so only slots holding one are visited.
            let seen = 1.0 - (1.0 - m.p_signal) * (1.0 - m.p_idler);
            let mu = self.mu * seen;
            if mu <= 0.0 {
                continue;
            }
            let occupied = Geometric::new(mu / (1.0 + mu)).expect("probability in (0, 1)");
            let extra = Geometric::new(1.0 / (1.0 + mu)).expect("probability in (0, 1)");
            let signal_only = m.p_signal * (1.0 - m.p_idler) / seen;
            let idler_only = (1.0 - m.p_signal) * m.p_idler / seen;
            let mut slot = first.saturating_add(occupied.sample(&mut rng));
            while slot < last {
                let epoch = slot * self.slot_ps;
                let pairs = 1 + extra.sample(&mut rng);
                for _ in 0..pairs {
                    let u = rng.random::<f64>();
                    let (signal, idler) = if u < signal_only {
                        (true, false)
                    } else if u < signal_only + idler_only {
                        (false, true)
                    } else {
                        (true, true)
                    };
                    if signal {
                        let dt = jitter(&mut rng, self.det_s.jitter_sigma);
                        push(&mut out.signal, epoch, dt, self.det_s.channel);
                    }
                    if idler {
                        let mut dt = jitter(&mut rng, self.det_i.jitter_sigma);
                        if let Some(e) = &decay {
                            let d = e.sample(&mut rng);
                            dt += if rng.random::<bool>() { d } else { -d };
                        }
                        push(&mut out.idler, epoch, dt, self.det_i.channel);
                    }
                }
                slot = slot.saturating_add(1 + occupied.sample(&mut rng));
            }
        }
        let t0 = first * self.slot_ps;
        let t1 = (last * self.slot_ps).min(self.end_ps);
        for (det, stream) in [(&self.det_s, &mut out.signal), (&self.det_i, &mut out.idler)] {
            let mean = det.dark_rate * (t1 - t0) as f64 * 1e-12;
            if mean > 0.0 {
                let n = Poisson::new(mean).expect("mean > 0").sample(&mut rng) as u64;
                for _ in 0..n {
                    stream.push(TimeTag::new(det.channel, rng.random_range(t0..t1)));
                }
            }
        }
        out
    }

    /// Whole run in memory, shards generated in parallel.
    pub fn generate(&self) -> Result<TagStreams> {
        let expected = self.expected_tags();
        if expected > self.run.memory_budget as f64 {
            return Err(Error::MemoryBudget {
                expected: expected as u64,
                budget: self.run.memory_budget,
            });
        }
        let shards: Vec<TagStreams> = (0..self.shard_count()).into_par_iter().map(|k| self.generate_shard(k)).collect();
        let mut out = TagStreams {
            signal: Vec::with_capacity(shards.iter().map(|s| s.signal.len()).sum()),
            idler: Vec::with_capacity(shards.iter().map(|s| s.idler.len()).sum()),
        };
        for s in shards {
            out.signal.extend(s.signal);
            out.idler.extend(s.idler);
        }
        out.signal.par_sort_unstable();
        out.idler.par_sort_unstable();
        Ok(out)
    }

    /// Shard-by-shard generation with constant memory. `sink` receives sorted
    /// batches; concatenating them reproduces [`TagGenerator::generate`].
    pub fn stream<F>(&self, mut sink: F) -> Result<()>
    where
        F: FnMut(TagStreams) -> Result<()>,
    {
        let mut pending = TagStreams::default();
        for k in 0..self.shard_count() {
            let mut s = self.generate_shard(k);
            pending.signal.append(&mut s.signal);
            pending.idler.append(&mut s.idler);
            pending.signal.sort_unstable();
            pending.idler.sort_unstable();
            let (_, last) = self.shard_bounds(k);
            // Later shards cannot produce tags before this time.
            let safe = (last * self.slot_ps).saturating_sub(self.guard_ps + 1);
            let split = |v: &mut Vec<TimeTag>| {
                let at = v.partition_point(|t| t.time < safe);
                let rest = v.split_off(at);
                std::mem::replace(v, rest)
            };
            let batch = TagStreams {
                signal: split(&mut pending.signal),
                idler: split(&mut pending.idler),
            };
            if !batch.signal.is_empty() || !batch.idler.is_empty() {
                sink(batch)?;
            }
        }
        if !pending.signal.is_empty() || !pending.idler.is_empty() {
            sink(pending)?;
        }
        Ok(())
    }

    /// Generation on a worker thread feeding a bounded queue of batches.
    pub fn spawn(self, capacity: usize) -> Receiver<Result<TagStreams>> {
        let (tx, rx) = sync_channel(capacity.max(1));
        thread::spawn(move || {
            let result = self.stream(|batch| {
                tx.send(Ok(batch))
                    .map_err(|_| Error::Format("tag consumer hung up".into()))
            });
            if let Err(e) = result {
                let _ = tx.send(Err(e));
            }
        });
        rx
    }
}

/// Generates both tag streams for one configuration.
pub fn generate_tags(
    src: &SourceConfig,
    path: &CollectionPath,
    det_s: &DetectorModel,
    det_i: &DetectorModel,
    run: &RunConfig,
) -> Result<TagStreams> {
    TagGenerator::new(src, path, det_s, det_i, run)?.generate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode(mu: f64) -> (SourceConfig, CollectionPath) {
        let mut src = SourceConfig::reference();
        src.mode_count = 1;
        src.mean_pairs_per_slot = mu;
        (src, CollectionPath::single(0, 0))
    }

    #[test]
    fn energy_conservation_is_exact() {
        let src = SourceConfig::reference();
        for m in 0..src.mode_count {
            assert_eq!(src.signal_frequency(m) + src.idler_frequency(m), src.pump_frequency);
        }
        assert!((src.coherence_slot() - 2.5e-9).abs() < 1e-15);
    }

    #[test]
    fn leakage_weights() {
        let w = filter_leakage(6.1e9, 6.5e9, 2);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.181).abs() < 1e-3);
        assert!((w[2] - 0.052).abs() < 1e-3);
    }

    #[test]
    fn empty_when_nothing_emits() {
        let (src, path) = single_mode(0.0);
        let run = RunConfig::for_source(&src, 1e-3, 1);
        let t = generate_tags(&src, &path, &DetectorModel::ideal(1), &DetectorModel::ideal(2), &run).unwrap();
        assert!(t.signal.is_empty() && t.idler.is_empty());
    }

    #[test]
    fn singles_rate_matches_oracle() {
        let (src, path) = single_mode(0.125);
        let run = RunConfig::for_source(&src, 2e-3, 7);
        let g = TagGenerator::new(&src, &path, &DetectorModel::ideal(1), &DetectorModel::ideal(2), &run).unwrap();
        let t = g.generate().unwrap();
        let rate = 0.125 / 2.5e-9;
        for n in [t.signal.len(), t.idler.len()] {
            let expected: f64 = rate * 2e-3;
            // Pair counts are geometric, so the count variance is (1 + μ) times Poisson.
            let sigma = (expected * (1.0 + 0.125) * (1.0 + 2.0 * 0.125)).sqrt();
            assert!((n as f64 - expected).abs() < 3.0 * sigma, "{n} vs {expected}");
        }
    }

    #[test]
    fn determinism_and_streaming_equivalence() {
        let src = SourceConfig::reference();
        let path = CollectionPath::reference(9, 9);
        let mut run = RunConfig::for_source(&src, 3e-4, 99);
        run.shard_slots = 10_000;
        let (ds, di) = (DetectorModel::apd(1), DetectorModel::snspd(2));
        let g = TagGenerator::new(&src, &path, &ds, &di, &run).unwrap();
        let a = g.generate().unwrap();
        let b = g.generate().unwrap();
        assert_eq!(a, b);
        assert!(crate::tags::first_unsorted(&a.signal).is_none());
        let mut streamed = TagStreams::default();
        g.stream(|batch| {
            if let (Some(last), Some(first)) = (streamed.signal.last(), batch.signal.first()) {
                assert!(last.time <= first.time);
            }
            streamed.signal.extend(batch.signal);
            streamed.idler.extend(batch.idler);
            Ok(())
        })
        .unwrap();
        assert_eq!(streamed, a);
        let rx = g.clone().spawn(2);
        let mut queued = TagStreams::default();
        for batch in rx {
            let batch = batch.unwrap();
            queued.signal.extend(batch.signal);
            queued.idler.extend(batch.idler);
        }
        assert_eq!(queued, a);
        run.rng_seed = 100;
        let c = generate_tags(&src, &path, &ds, &di, &run).unwrap();
        assert_ne!(c.signal, a.signal);
    }

    #[test]
    fn memory_budget_is_enforced() {
        let (src, path) = single_mode(0.125);
        let mut run = RunConfig::for_source(&src, 1e-3, 1);
        run.memory_budget = 1000;
        let r = generate_tags(&src, &path, &DetectorModel::ideal(1), &DetectorModel::ideal(2), &run);
        assert!(matches!(r, Err(Error::MemoryBudget { .. })));
    }

    #[test]
    fn rejects_bad_configs() {
        let (src, path) = single_mode(0.1);
        let run = RunConfig::for_source(&src, 1e-3, 1);
        let mut det = DetectorModel::ideal(1);
        det.efficiency = 1.5;
        assert!(generate_tags(&src, &path, &det, &DetectorModel::ideal(2), &run).is_err());
        let bad_path = CollectionPath::single(3, 0);
        assert!(matches!(
            generate_tags(&src, &bad_path, &DetectorModel::ideal(1), &DetectorModel::ideal(2), &run),
            Err(Error::UnknownMode { .. })
        ));
    }
}
