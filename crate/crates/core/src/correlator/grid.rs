use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use super::{g2_cross, CorrelationEstimate, G2Options, Uncertainty, DEFAULT_CROSS_WINDOW};
use crate::error::{positive, Error, Result};
use crate::source::{
    filter_leakage, CollectionPath, DetectorModel, RunConfig, SourceConfig, TagGenerator, DEFAULT_CORRELATION_DECAY,
};

/// Signal/idler mode pairs (0-based) measured on the 20 × 20 grid at 1 mW.
pub const TABLE_MEASURED_PAIRS: [(usize, usize); 89] = [
    (0, 0), (0, 1), (0, 3), (0, 5), (1, 0), (1, 1), (1, 2), (1, 4), (2, 0), (2, 1), (2, 2), (2, 5), (3, 2), (3, 3),
    (3, 4), (4, 0), (4, 2), (4, 4), (5, 1), (5, 3), (5, 5), (6, 4), (6, 6), (6, 8), (7, 5), (7, 7), (7, 8), (8, 4),
    (8, 6), (8, 8), (9, 9), (9, 10), (9, 11), (9, 12), (9, 13), (9, 14), (9, 15), (10, 9), (10, 10), (10, 11),
    (10, 12), (10, 13), (10, 14), (10, 15), (11, 9), (11, 10), (11, 11), (11, 12), (11, 13), (11, 14), (11, 15),
    (12, 9), (12, 10), (12, 11), (12, 12), (12, 13), (12, 14), (12, 15), (13, 9), (13, 10), (13, 11), (13, 12),
    (13, 13), (13, 14), (13, 15), (14, 9), (14, 10), (14, 11), (14, 12), (14, 13), (14, 14), (14, 15), (15, 9),
    (15, 10), (15, 11), (15, 12), (15, 13), (15, 14), (15, 15), (16, 13), (16, 14), (16, 16), (17, 13), (17, 15),
    (17, 17), (18, 18), (18, 19), (19, 18), (19, 19),
];

/// Every pair of a square block of modes.
pub fn block_pairs(modes: std::ops::RangeInclusive<usize>) -> Vec<(usize, usize)> {
    modes.clone().flat_map(|s| modes.clone().map(move |i| (s, i))).collect()
}

/// Pairs with `|m_s − m_i| ≤ width` among `0..mode_count`.
pub fn band_pairs(mode_count: usize, width: usize) -> Vec<(usize, usize)> {
    (0..mode_count)
        .flat_map(|s| (0..mode_count).filter(move |&i| s.abs_diff(i) <= width).map(move |i| (s, i)))
        .collect()
}

/// Everything needed to simulate one grid entry apart from the mode pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScenario {
    pub source: SourceConfig,
    /// Signal filter transmission by `|Δm|`.
    pub signal_leakage: Vec<f64>,
    /// Idler channel transmission by `|Δm|`.
    pub idler_leakage: Vec<f64>,
    pub excess_idler_loss: f64,
    pub signal_detector: DetectorModel,
    pub idler_detector: DetectorModel,
    /// Simulated time per entry (s).
    pub duration: f64,
    pub seed: u64,
    pub correlation_decay: f64,
    pub window: f64,
    pub uncertainty: Uncertainty,
    pub dark_subtract: bool,
    pub memory_budget: u64,
}

impl GridScenario {
    /// 6.1 GHz signal filter with two leaked neighbours per side, single-mode
    /// idler channel, APD and SNSPD detectors.
    pub fn reference(duration: f64, seed: u64) -> Self {
        Self {
            source: SourceConfig::reference(),
            signal_leakage: filter_leakage(6.1e9, 6.5e9, 2),
            idler_leakage: vec![1.0],
            excess_idler_loss: 0.05,
            signal_detector: DetectorModel::apd(1),
            idler_detector: DetectorModel::snspd(2),
            duration,
            seed,
            correlation_decay: DEFAULT_CORRELATION_DECAY,
            window: DEFAULT_CROSS_WINDOW,
            uncertainty: Uncertainty::Poisson,
            dark_subtract: false,
            memory_budget: 40_000_000,
        }
    }

    /// Same scenario with no leakage: only the selected modes are seen.
    pub fn without_leakage(mut self) -> Self {
        self.signal_leakage = vec![1.0];
        self.idler_leakage = vec![1.0];
        self
    }

    fn path(&self, m_s: usize, m_i: usize) -> CollectionPath {
        CollectionPath {
            signal_mode: m_s,
            idler_mode: m_i,
            signal_leakage: self.signal_leakage.clone(),
            idler_leakage: self.idler_leakage.clone(),
            excess_idler_loss: self.excess_idler_loss,
        }
    }

    /// Run settings of one entry; the seed depends on the mode pair only.
    pub fn run(&self, m_s: usize, m_i: usize) -> RunConfig {
        let mut run = RunConfig::for_source(&self.source, self.duration, entry_seed(self.seed, m_s, m_i));
        run.correlation_decay = self.correlation_decay;
        run.memory_budget = self.memory_budget;
        run
    }

    /// Simulates and estimates one entry at the scenario's μ.
    pub fn entry(&self, m_s: usize, m_i: usize) -> Result<CorrelationEstimate> {
        let path = self.path(m_s, m_i);
        let run = self.run(m_s, m_i);
        let tags = TagGenerator::new(&self.source, &path, &self.signal_detector, &self.idler_detector, &run)?.generate()?;
        let opts = G2Options {
            window: self.window,
            acquisition_time: Some(self.duration),
            dark_rates: self
                .dark_subtract
                .then_some((self.signal_detector.dark_rate, self.idler_detector.dark_rate)),
            uncertainty: self.uncertainty,
            ..G2Options::default()
        };
        g2_cross(&tags.signal, &tags.idler, &opts)
    }
}

/// SplitMix64 finalizer over the master seed and the mode pair.
fn entry_seed(master: u64, m_s: usize, m_i: usize) -> u64 {
    let mut z = master ^ ((m_s as u64) << 32 | m_i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub signal_modes: Vec<usize>,
    pub idler_modes: Vec<usize>,
    /// Row-major over `signal_modes × idler_modes`; `None` where not measured.
    pub entries: Vec<Option<CorrelationEstimate>>,
    pub pump_power_mw: f64,
    pub mean_pairs_per_slot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSummary {
    pub measured: usize,
    pub diagonal_min: f64,
    pub diagonal_max: f64,
    pub diagonal_mean: f64,
    /// Range over `|Δm| = 1`, NaN when none were measured.
    pub neighbour_min: f64,
    pub neighbour_max: f64,
    /// Largest value with `|Δm| ≥ 2`, NaN when none were measured.
    pub far_max: f64,
}

impl CorrelationGrid {
    pub fn get(&self, m_s: usize, m_i: usize) -> Option<&CorrelationEstimate> {
        let r = self.signal_modes.iter().position(|&m| m == m_s)?;
        let c = self.idler_modes.iter().position(|&m| m == m_i)?;
        self.entries[r * self.idler_modes.len() + c].as_ref()
    }

    /// Measured entries as `(m_s, m_i, estimate)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CorrelationEstimate)> {
        let n = self.idler_modes.len();
        self.entries.iter().enumerate().filter_map(move |(k, e)| {
            e.as_ref().map(|e| (self.signal_modes[k / n], self.idler_modes[k % n], e))
        })
    }

    pub fn summary(&self) -> GridSummary {
        let mut diag = Vec::new();
        let mut near = Vec::new();
        let mut far = Vec::new();
        for (s, i, e) in self.iter() {
            match s.abs_diff(i) {
                0 => diag.push(e.g2),
                1 => near.push(e.g2),
                _ => far.push(e.g2),
            }
        }
        let min = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
        GridSummary {
            measured: diag.len() + near.len() + far.len(),
            diagonal_min: min(&diag),
            diagonal_max: max(&diag),
            diagonal_mean: diag.iter().sum::<f64>() / diag.len() as f64,
            neighbour_min: min(&near),
            neighbour_max: max(&near),
            far_max: max(&far),
        }
    }

    /// CSV columns `m_s,m_i,g2,sigma,coincidences,window_ps,diagonal`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m_s,m_i,g2,sigma,coincidences,window_ps,diagonal")?;
        for (s, i, e) in self.iter() {
            writeln!(
                w,
                "{s},{i},{},{},{},{},{}",
                e.g2,
                e.sigma,
                e.coincidences,
                (e.window * 1e12).round() as i64,
                u8::from(s == i)
            )?;
        }
        Ok(())
    }

    /// Fixed-width table with `-` for unmeasured entries.
    pub fn table(&self) -> String {
        let mut s = String::from("m_s\\m_i");
        for i in &self.idler_modes {
            let _ = write!(s, "{i:>8}");
        }
        s.push('\n');
        for (r, ms) in self.signal_modes.iter().enumerate() {
            let _ = write!(s, "{ms:>7}");
            for c in 0..self.idler_modes.len() {
                match &self.entries[r * self.idler_modes.len() + c] {
                    Some(e) => {
                        let _ = write!(s, "{:>8.2}", e.g2);
                    }
                    None => s.push_str("       -"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Simulates every requested entry at the given pump power. Diagonal entries
/// of every mode involved are always added. Entries run in parallel, each
/// with its own seed.
pub fn build_correlation_grid(
    scenario: &GridScenario,
    pump_power_mw: f64,
    measured_pairs: &[(usize, usize)],
) -> Result<CorrelationGrid> {
    positive("pump_power_mw", pump_power_mw)?;
    if measured_pairs.is_empty() {
        return Err(Error::param("measured_pairs", "no grid entries requested"));
    }
    let mut sc = scenario.clone();
    sc.source = sc.source.at_pump_power(pump_power_mw);
    let count = sc.source.mode_count;
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(s, i) in measured_pairs {
        for m in [s, i] {
            if m >= count {
                return Err(Error::UnknownMode { mode: m, count });
            }
        }
        pairs.insert((s, i));
        pairs.insert((s, s));
        pairs.insert((i, i));
    }
    let signal_modes: Vec<usize> = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let idler_modes: Vec<usize> = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
    let list: Vec<(usize, usize)> = pairs.into_iter().collect();
    let results = list
        .par_iter()
        .map(|&(s, i)| sc.entry(s, i).map(|e| ((s, i), e)))
        .collect::<Result<Vec<_>>>()?;
    let n = idler_modes.len();
    let mut entries = vec![None; signal_modes.len() * n];
    for ((s, i), e) in results {
        let r = signal_modes.binary_search(&s).expect("signal mode listed");
        let c = idler_modes.binary_search(&i).expect("idler mode listed");
        entries[r * n + c] = Some(e);
    }
    Ok(CorrelationGrid {
        signal_modes,
        idler_modes,
        entries,
        pump_power_mw,
        mean_pairs_per_slot: sc.source.mean_pairs_per_slot,
    })
}
