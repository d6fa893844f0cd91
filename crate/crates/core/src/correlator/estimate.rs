use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{for_each_pair, observed_span, to_ps, DEFAULT_CROSS_WINDOW, DEFAULT_SIDEBAND_OFFSET};
use crate::error::{positive, Error, Result};
use crate::tags::{ensure_sorted, TimeTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uncertainty {
    /// Poisson errors on coincidences and both singles, in quadrature.
    Poisson,
    /// Block bootstrap over equal time blocks of the acquisition.
    Bootstrap { blocks: usize, resamples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Options {
    /// s.
    pub window: f64,
    /// Window centre on the delay axis `t_b − t_a` (s).
    pub offset: f64,
    /// s; defaults to the span covered by the tags.
    pub acquisition_time: Option<f64>,
    /// Dark rates of the two streams (Hz); enables dark subtraction.
    pub dark_rates: Option<(f64, f64)>,
    pub uncertainty: Uncertainty,
    /// Distance of the two accidental sidebands from `offset` (s).
    pub sideband_offset: Option<f64>,
}

impl Default for G2Options {
    fn default() -> Self {
        Self {
            window: DEFAULT_CROSS_WINDOW,
            offset: 0.0,
            acquisition_time: None,
            dark_rates: None,
            uncertainty: Uncertainty::Poisson,
            sideband_offset: Some(DEFAULT_SIDEBAND_OFFSET),
        }
    }
}

impl G2Options {
    pub fn with_window(window: f64) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub g2: f64,
    /// 1σ.
    pub sigma: f64,
    /// s.
    pub window: f64,
    /// s.
    pub offset: f64,
    pub coincidences: u64,
    /// Coincidences expected from uncorrelated singles, `N_a N_b w / T`.
    pub accidental_estimate: f64,
    /// Mean coincidences in the two sideband windows, when measured.
    pub sideband_accidentals: Option<f64>,
    pub dark_subtracted: bool,
    pub singles_a: u64,
    pub singles_b: u64,
    /// s.
    pub acquisition_time: f64,
}

impl CorrelationEstimate {
    /// Plug-in estimate `C T / (N_a N_b w)` for the window `[lo, hi)` ps.
    pub(crate) fn from_counts(
        c: u64,
        na: u64,
        nb: u64,
        acquisition_ps: u64,
        lo: i64,
        hi: i64,
        dark_rates: Option<(f64, f64)>,
    ) -> Result<Self> {
        if na == 0 {
            return Err(Error::NoSingles("a"));
        }
        if nb == 0 {
            return Err(Error::NoSingles("b"));
        }
        if acquisition_ps == 0 {
            return Err(Error::param("acquisition_time", "must be positive"));
        }
        let t = acquisition_ps as f64 * 1e-12;
        let w = (hi - lo) as f64 * 1e-12;
        let (na_f, nb_f, c_f) = (na as f64, nb as f64, c as f64);
        let accidental = na_f * nb_f * w / t;
        let g = c_f / accidental;
        let sigma = if c == 0 {
            1.0 / accidental
        } else {
            g * (1.0 / c_f + 1.0 / na_f + 1.0 / nb_f).sqrt()
        };
        let mut est = Self {
            g2: g,
            sigma,
            window: w,
            offset: (lo + hi) as f64 * 0.5e-12,
            coincidences: c,
            accidental_estimate: accidental,
            sideband_accidentals: None,
            dark_subtracted: false,
            singles_a: na,
            singles_b: nb,
            acquisition_time: t,
        };
        if let Some((da, db)) = dark_rates {
            let (ra, rb) = (na_f / t, nb_f / t);
            let (pa, pb) = (ra - da, rb - db);
            if pa <= 0.0 || pb <= 0.0 {
                return Err(Error::param("dark_rates", "dark rate exceeds the measured singles rate"));
            }
            let floor = (ra * rb - pa * pb) * w * t;
            let sub = (c_f - floor) / (pa * pb * w * t);
            est.sigma = if g > 0.0 { sigma * sub.abs() / g } else { sigma };
            est.g2 = sub.max(0.0);
            est.dark_subtracted = true;
        }
        Ok(est)
    }

    /// `key = value` report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "g2 = {}", self.g2);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "window_s = {}", self.window);
        let _ = writeln!(s, "offset_s = {}", self.offset);
        let _ = writeln!(s, "coincidences = {}", self.coincidences);
        let _ = writeln!(s, "accidental_estimate = {}", self.accidental_estimate);
        if let Some(sb) = self.sideband_accidentals {
            let _ = writeln!(s, "sideband_accidentals = {sb}");
        }
        let _ = writeln!(s, "dark_subtracted = {}", self.dark_subtracted);
        let _ = writeln!(s, "singles_a = {}", self.singles_a);
        let _ = writeln!(s, "singles_b = {}", self.singles_b);
        let _ = writeln!(s, "acquisition_time_s = {}", self.acquisition_time);
        s
    }
}

fn window_ps(opts: &G2Options) -> Result<(i64, i64)> {
    positive("window", opts.window)?;
    let w = to_ps("window", opts.window)?;
    if w < 1 {
        return Err(Error::param("window", "must be at least 1 ps"));
    }
    let o = to_ps("offset", opts.offset)?;
    Ok((o - w / 2, o - w / 2 + w))
}

/// Windowed signal-idler g² over delays `t_b − t_a` in
/// `[offset − window/2, offset + window/2)`.
pub fn g2_cross(a: &[TimeTag], b: &[TimeTag], opts: &G2Options) -> Result<CorrelationEstimate> {
    ensure_sorted(a, "a")?;
    ensure_sorted(b, "b")?;
    let (lo, hi) = window_ps(opts)?;
    let acquisition_ps = match opts.acquisition_time {
        Some(t) => to_ps("acquisition_time", positive("acquisition_time", t)?)? as u64,
        None => observed_span(a, b),
    };
    let mut est = match opts.uncertainty {
        Uncertainty::Poisson => {
            let mut c = 0u64;
            for_each_pair(a, b, lo, hi, false, |_, _, _| c += 1);
            CorrelationEstimate::from_counts(c, a.len() as u64, b.len() as u64, acquisition_ps, lo, hi, opts.dark_rates)?
        }
        Uncertainty::Bootstrap { blocks, resamples, seed } => {
            bootstrap(a, b, lo, hi, acquisition_ps, blocks, resamples, seed, opts.dark_rates)?
        }
    };
    if let Some(side) = opts.sideband_offset {
        let s = to_ps("sideband_offset", side)?.abs();
        if s < hi - lo {
            return Err(Error::param("sideband_offset", "sidebands overlap the signal window"));
        }
        let mut n = 0u64;
        for_each_pair(a, b, lo - s, hi - s, false, |_, _, _| n += 1);
        for_each_pair(a, b, lo + s, hi + s, false, |_, _, _| n += 1);
        est.sideband_accidentals = Some(n as f64 / 2.0);
    }
    Ok(est)
}

#[allow(clippy::too_many_arguments)]
fn bootstrap(
    a: &[TimeTag],
    b: &[TimeTag],
    lo: i64,
    hi: i64,
    acquisition_ps: u64,
    blocks: usize,
    resamples: usize,
    seed: u64,
    dark_rates: Option<(f64, f64)>,
) -> Result<CorrelationEstimate> {
    if blocks < 2 || resamples < 2 {
        return Err(Error::param("bootstrap", "need at least 2 blocks and 2 resamples"));
    }
    let t0 = a.first().into_iter().chain(b.first()).map(|t| t.time).min().unwrap_or(0);
    let span = acquisition_ps.max(1) as f64;
    let block_of = |t: u64| (((t.saturating_sub(t0)) as f64 / span * blocks as f64) as usize).min(blocks - 1);
    let mut c = vec![0u64; blocks];
    let mut na = vec![0u64; blocks];
    let mut nb = vec![0u64; blocks];
    for t in a {
        na[block_of(t.time)] += 1;
    }
    for t in b {
        nb[block_of(t.time)] += 1;
    }
    for_each_pair(a, b, lo, hi, false, |i, _, _| c[block_of(a[i].time)] += 1);
    let total = |v: &[u64]| v.iter().sum::<u64>();
    let mut est = CorrelationEstimate::from_counts(total(&c), total(&na), total(&nb), acquisition_ps, lo, hi, dark_rates)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut sc, mut sa, mut sb) = (0u64, 0u64, 0u64);
        for _ in 0..blocks {
            let k = rng.random_range(0..blocks);
            sc += c[k];
            sa += na[k];
            sb += nb[k];
        }
        if let Ok(e) = CorrelationEstimate::from_counts(sc, sa, sb, acquisition_ps, lo, hi, dark_rates) {
            samples.push(e.g2);
        }
    }
    if samples.len() < 2 {
        return Err(Error::NoSingles("bootstrap resamples"));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    est.sigma = var.sqrt();
    Ok(est)
}

/// Routes each tag to one of two outputs with probability `ratio` for the
/// first, as a beam splitter would.
pub fn split_stream(tags: &[TimeTag], ratio: f64, seed: u64) -> Result<(Vec<TimeTag>, Vec<TimeTag>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param("splitter_ratio", "must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity((tags.len() as f64 * ratio) as usize + 16);
    let mut b = Vec::with_capacity((tags.len() as f64 * (1.0 - ratio)) as usize + 16);
    for &t in tags {
        if rng.random::<f64>() < ratio {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    Ok((a, b))
}

/// HBT auto-correlation: the stream is split at random, then cross
/// correlated. A dark rate in `opts.dark_rates.0` refers to the unsplit stream.
pub fn g2_auto_hbt(tags: &[TimeTag], splitter_ratio: f64, opts: &G2Options, seed: u64) -> Result<CorrelationEstimate> {
    ensure_sorted(tags, "tags")?;
    let (a, b) = split_stream(tags, splitter_ratio, seed)?;
    let mut o = *opts;
    if o.acquisition_time.is_none() {
        o.acquisition_time = Some(observed_span(tags, &[]) as f64 * 1e-12);
    }
    o.dark_rates = opts.dark_rates.map(|(d, _)| (d * splitter_ratio, d * (1.0 - splitter_ratio)));
    g2_cross(&a, &b, &o)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchySchwarz {
    pub r: f64,
    pub sigma: f64,
}

/// `R = g_si² / (g_ss · g_ii)` with first-order error propagation.
pub fn cauchy_schwarz_r(
    g_si: (f64, f64),
    g_ss: (f64, f64),
    g_ii: (f64, f64),
) -> Result<CauchySchwarz> {
    for (name, g) in [("g_si", g_si.0), ("g_ss", g_ss.0), ("g_ii", g_ii.0)] {
        positive(name, g)?;
    }
    let r = g_si.0 * g_si.0 / (g_ss.0 * g_ii.0);
    let rel = (4.0 * (g_si.1 / g_si.0).powi(2) + (g_ss.1 / g_ss.0).powi(2) + (g_ii.1 / g_ii.0).powi(2)).sqrt();
    Ok(CauchySchwarz { r, sigma: r * rel })
}
