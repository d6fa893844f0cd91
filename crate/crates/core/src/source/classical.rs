use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};

use super::TagStreams;
use crate::error::{finite, positive, unit_interval, Error, Result};
use crate::tags::TimeTag;

/// Two streams driven by a common classical thermal intensity.
///
/// Every slot draws an intensity `I ~ Exp(1)`; each arm emits
/// `Poisson(mean · I)` photons at the slot epoch plus an independent Poisson
/// background. Any such field obeys `g_si² ≤ g_ss · g_ii`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalSource {
    /// s.
    pub slot: f64,
    /// Modulated counts per slot on the signal arm.
    pub signal_mean: f64,
    /// Modulated counts per slot on the idler arm.
    pub idler_mean: f64,
    /// Unmodulated fraction of the signal rate.
    pub signal_background_fraction: f64,
    /// Unmodulated fraction of the idler rate.
    pub idler_background_fraction: f64,
    /// s, Gaussian timing jitter on every tag.
    pub jitter_sigma: f64,
    pub signal_channel: u8,
    pub idler_channel: u8,
}

/// Output of [`ClassicalSource::generate`].
pub type ClassicalRun = TagStreams;

impl ClassicalSource {
    pub fn reference() -> Self {
        Self {
            slot: 2.5e-9,
            signal_mean: 0.15,
            idler_mean: 0.15,
            signal_background_fraction: 0.1,
            idler_background_fraction: 0.7,
            jitter_sigma: 120e-12,
            signal_channel: 1,
            idler_channel: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("slot", self.slot)?;
        finite("signal_mean", self.signal_mean)?;
        finite("idler_mean", self.idler_mean)?;
        if self.signal_mean < 0.0 || self.idler_mean < 0.0 {
            return Err(Error::param("mean", "must be >= 0"));
        }
        unit_interval("signal_background_fraction", self.signal_background_fraction)?;
        unit_interval("idler_background_fraction", self.idler_background_fraction)?;
        finite("jitter_sigma", self.jitter_sigma)?;
        if self.jitter_sigma < 0.0 {
            return Err(Error::param("jitter_sigma", "must be >= 0"));
        }
        Ok(())
    }

    pub fn generate(&self, duration: f64, seed: u64) -> Result<ClassicalRun> {
        self.validate()?;
        positive("duration", duration)?;
        let slot_ps = ((self.slot * 1e12).round() as u64).max(1);
        let end_ps = (duration * 1e12).round() as u64;
        let slots = end_ps.div_ceil(slot_ps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = (self.jitter_sigma > 0.0).then(|| Normal::new(0.0, self.jitter_sigma * 1e12).expect("sigma > 0"));
        let arms = [
            (self.signal_mean, self.signal_background_fraction, self.signal_channel),
            (self.idler_mean, self.idler_background_fraction, self.idler_channel),
        ];
        let mut out = [Vec::new(), Vec::new()];
        let place = |rng: &mut ChaCha8Rng, v: &mut Vec<TimeTag>, base: f64, ch: u8| {
            let dt = jitter.map_or(0.0, |j| j.sample(rng));
            let t = (base + dt).round();
            if t >= 0.0 && t < end_ps as f64 {
                v.push(TimeTag::new(ch, t as u64));
            }
        };
        for slot in 0..slots {
            let intensity: f64 = Exp1.sample(&mut rng);
            let epoch = (slot * slot_ps) as f64;
            for (i, &(mean, bg, ch)) in arms.iter().enumerate() {
                let m = mean * (1.0 - bg) * intensity;
                if m > 0.0 {
                    let n = Poisson::new(m).expect("mean > 0").sample(&mut rng) as u64;
                    for _ in 0..n {
                        place(&mut rng, &mut out[i], epoch, ch);
                    }
                }
            }
        }
        for (i, &(mean, bg, ch)) in arms.iter().enumerate() {
            let total = mean * bg * slots as f64;
            if total > 0.0 {
                let n = Poisson::new(total).expect("mean > 0").sample(&mut rng) as u64;
                for _ in 0..n {
                    let t = rng.random_range(0..end_ps);
                    out[i].push(TimeTag::new(ch, t));
                }
            }
        }
        let [mut signal, mut idler] = out;
        signal.sort_unstable();
        idler.sort_unstable();
        Ok(TagStreams { signal, idler })
    }

    /// Expected g² values at window = slot: `(g_si, g_ss, g_ii)`.
    pub fn expected_g2(&self) -> (f64, f64, f64) {
        let fs = 1.0 - self.signal_background_fraction;
        let fi = 1.0 - self.idler_background_fraction;
        (1.0 + fs * fi, 1.0 + fs * fs, 1.0 + fi * fi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_bound_holds_in_expectation() {
        let c = ClassicalSource::reference();
        let (si, ss, ii) = c.expected_g2();
        assert!(si * si <= ss * ii);
        assert!(si <= 2.0);
    }

    #[test]
    fn rates_and_reproducibility() {
        let c = ClassicalSource::reference();
        let a = c.generate(1e-4, 3).unwrap();
        assert_eq!(a, c.generate(1e-4, 3).unwrap());
        let expected = 0.15 * 1e-4 / 2.5e-9;
        assert!((a.signal.len() as f64 / expected - 1.0).abs() < 0.1);
        assert!(crate::tags::first_unsorted(&a.idler).is_none());
    }
}
