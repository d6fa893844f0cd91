use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use freqmux::correlator::{
    cauchy_schwarz_r, g2_auto_hbt, g2_cross, histogram, G2Options, Uncertainty, DEFAULT_IDLER_AUTO_WINDOW,
    DEFAULT_SIGNAL_AUTO_WINDOW,
};
use freqmux::source::{
    filter_leakage, CollectionPath, DetectorModel, OracleContext, RunConfig, SourceConfig, TagGenerator,
    DEFAULT_CORRELATION_DECAY, DEFAULT_MODE_FWHM,
};
use freqmux::tags::{read_tags_csv, read_ttag, TimeTag, TtagWriter};

use super::{open, Context, GHZ, MHZ, NS, PS};
use crate::config::{Manifest, Params};
use crate::error::CliError;

const DETECTORS: [&str; 3] = ["apd", "snspd", "ideal"];

fn detector(p: &Params, arm: &str, default: &str, channel: u8) -> Result<DetectorModel, CliError> {
    let mut d = match p.choice(&format!("{arm}_detector"), default, &DETECTORS)?.as_str() {
        "apd" => DetectorModel::apd(channel),
        "snspd" => DetectorModel::snspd(channel),
        _ => DetectorModel::ideal(channel),
    };
    if let Some(v) = p.get_opt(&format!("{arm}_efficiency"))? {
        d.efficiency = v;
    }
    if let Some(v) = p.get_opt(&format!("{arm}_dark_hz"))? {
        d.dark_rate = v;
    }
    if let Some(v) = p.get_opt::<f64>(&format!("{arm}_jitter_ps"))? {
        d.jitter_sigma = v * PS;
    }
    d.validate()?;
    Ok(d)
}

/// Shared by `simulate` and `grid`: source and collection keys.
pub struct Scenario {
    pub source: SourceConfig,
    pub signal_leakage: Vec<f64>,
    pub excess_idler_loss: f64,
    pub signal_detector: DetectorModel,
    pub idler_detector: DetectorModel,
    pub correlation_decay: f64,
    pub window: f64,
}

pub fn scenario(p: &Params, default_leak_modes: usize, default_excess_loss: f64) -> Result<Scenario, CliError> {
    let mut source = SourceConfig::reference();
    source.mode_count = p.get("modes", source.mode_count)?;
    source.mode_spacing = p.get("spacing_ghz", source.mode_spacing / GHZ)? * GHZ;
    source.mode_half_width = p.get("mode_fwhm_mhz", DEFAULT_MODE_FWHM / MHZ)? * MHZ / 2.0;
    let leak_modes: usize = p.get("signal_leak_modes", default_leak_modes)?;
    let filter_fwhm = p.get("signal_filter_fwhm_ghz", 6.1)? * GHZ;
    let signal_leakage = if leak_modes == 0 {
        vec![1.0]
    } else {
        filter_leakage(filter_fwhm, source.mode_spacing, leak_modes)
    };
    Ok(Scenario {
        source,
        signal_leakage,
        excess_idler_loss: p.get("idler_excess_loss", default_excess_loss)?,
        signal_detector: detector(p, "signal", "apd", 1)?,
        idler_detector: detector(p, "idler", "snspd", 2)?,
        correlation_decay: p.get("correlation_decay_ns", DEFAULT_CORRELATION_DECAY / NS)? * NS,
        window: p.get("window_ns", 2.5)? * NS,
    })
}

enum Sink {
    Ttag(TtagWriter<BufWriter<File>>),
    Csv(BufWriter<File>, u64),
}

impl Sink {
    fn new(ctx: &Context, name: &str, csv: bool) -> Result<Self, CliError> {
        let mut w = ctx.create(name)?;
        if csv {
            writeln!(w, "channel,time_ps")?;
            Ok(Sink::Csv(w, 0))
        } else {
            Ok(Sink::Ttag(TtagWriter::new(w)?))
        }
    }

    fn write(&mut self, tags: &[TimeTag]) -> freqmux::Result<()> {
        match self {
            Sink::Ttag(w) => w.write(tags),
            Sink::Csv(w, n) => {
                for t in tags {
                    writeln!(w, "{},{}", t.channel, t.time)?;
                }
                *n += tags.len() as u64;
                Ok(())
            }
        }
    }

    fn finish(self) -> Result<u64, CliError> {
        match self {
            Sink::Ttag(w) => {
                let n = w.count();
                w.finish_seekable()?;
                Ok(n)
            }
            Sink::Csv(mut w, n) => {
                w.flush()?;
                Ok(n)
            }
        }
    }
}

/// Streams signal and idler tags of one mode pair to disk and records the
/// expected rates and g² in the manifest.
pub fn simulate(ctx: Context) -> Result<(), CliError> {
    let p = &ctx.params;
    let duration: f64 = p.get("duration_s", 0.01)?;
    let mut sc = scenario(p, 0, 1.0)?;
    sc.source.mean_pairs_per_slot = p.get("mu", 0.125)?;
    let path = CollectionPath {
        signal_mode: p.get("signal_mode", 10)?,
        idler_mode: p.get("idler_mode", 10)?,
        signal_leakage: sc.signal_leakage.clone(),
        idler_leakage: vec![1.0],
        excess_idler_loss: sc.excess_idler_loss,
    };
    let mut run = RunConfig::for_source(&sc.source, duration, ctx.seed);
    run.correlation_decay = sc.correlation_decay;
    run.shard_slots = p.get("shard_slots", run.shard_slots)?;
    let csv = p.choice("format", "ttag", &["ttag", "csv"])? == "csv";
    p.finish()?;

    let gen = TagGenerator::new(&sc.source, &path, &sc.signal_detector, &sc.idler_detector, &run)?;
    let ext = if csv { "csv" } else { "ttag" };
    let (signal_name, idler_name) = (format!("signal.{ext}"), format!("idler.{ext}"));
    let mut sig = Sink::new(&ctx, &signal_name, csv)?;
    let mut idl = Sink::new(&ctx, &idler_name, csv)?;
    gen.stream(|batch| {
        sig.write(&batch.signal)?;
        idl.write(&batch.idler)
    })?;
    let (n_s, n_i) = (sig.finish()?, idl.finish()?);

    let rates = gen.expected_rates();
    let mu = sc.source.mean_pairs_per_slot;
    let mut m = Manifest::default();
    m.put("signal_file", &signal_name);
    m.put("idler_file", &idler_name);
    m.put("signal_tags", n_s);
    m.put("idler_tags", n_i);
    m.put("expected_signal_rate_hz", rates.signal());
    m.put("expected_idler_rate_hz", rates.idler());
    m.put("expected_idler_to_signal_ratio", rates.idler() / rates.signal());
    m.put("measured_idler_to_signal_ratio", n_i as f64 / n_s.max(1) as f64);
    m.put("expected_g2_ideal", 2.0 + 1.0 / mu);
    let oracle = OracleContext::new(&sc.source, &path, &sc.signal_detector, &sc.idler_detector, &run)?;
    match oracle.cross(sc.window, 0.0) {
        Ok(a) => {
            m.put("expected_g2", a.g2);
            m.put("expected_coincidence_rate_hz", a.coincidence_rate);
        }
        Err(_) => m.put("expected_g2", f64::NAN),
    }
    ctx.finish(&m)
}

fn read_tags(path: &Path) -> Result<Vec<TimeTag>, CliError> {
    let f = open(path)?;
    let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let tags = if csv {
        read_tags_csv(BufReader::new(f))
    } else {
        read_ttag(BufReader::new(f))
    };
    tags.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Coincidence histogram and windowed g² of two tag files, optionally with
/// both HBT autocorrelations and the Cauchy-Schwarz ratio.
pub fn analyze(ctx: Context, signal: &Path, idler: &Path) -> Result<(), CliError> {
    let p = &ctx.params;
    let window = p.get("window_ns", 2.5)? * NS;
    let offset = p.get("offset_ns", 0.0)? * NS;
    let bin = p.get("bin_ps", 50.0)? * PS;
    let range = p.get("range_ns", 20.0)? * NS;
    let sideband = p.get("sideband_ns", 10.0)? * NS;
    let duration: Option<f64> = p.get_opt("duration_s")?;
    let dark_subtract: bool = p.get("dark_subtract", false)?;
    let darks = (p.get("signal_dark_hz", 60.0)?, p.get("idler_dark_hz", 70.0)?);
    let cs: bool = p.get("cauchy_schwarz", false)?;
    let auto_windows = (
        p.get("signal_auto_window_ns", DEFAULT_SIGNAL_AUTO_WINDOW / NS)? * NS,
        p.get("idler_auto_window_ns", DEFAULT_IDLER_AUTO_WINDOW / NS)? * NS,
    );
    let split: f64 = p.get("splitter_ratio", 0.5)?;
    let uncertainty = match p.choice("uncertainty", "poisson", &["poisson", "bootstrap"])?.as_str() {
        "poisson" => Uncertainty::Poisson,
        _ => Uncertainty::Bootstrap {
            blocks: p.get("bootstrap_blocks", 100)?,
            resamples: p.get("bootstrap_resamples", 200)?,
            seed: ctx.seed,
        },
    };
    p.finish()?;

    let a = read_tags(signal)?;
    let b = read_tags(idler)?;
    let opts = G2Options {
        window,
        offset,
        acquisition_time: duration,
        dark_rates: dark_subtract.then_some(darks),
        uncertainty,
        sideband_offset: (sideband > 0.0).then_some(sideband),
    };
    let est = g2_cross(&a, &b, &opts)?;
    let h = histogram(&a, &b, bin, range, Some(est.acquisition_time))?;
    let mut w = ctx.create("histogram.csv")?;
    h.write_csv(&mut w)?;
    w.flush()?;

    let mut report = est.report();
    let mut m = Manifest::default();
    m.put("g2", est.g2);
    m.put("sigma", est.sigma);
    m.put("coincidences", est.coincidences);
    if let Some(sb) = est.sideband_accidentals {
        m.put("sideband_accidentals", sb);
    }
    m.put("peak_delay_s", h.peak().0);
    m.put("peak_fwhm_s", h.peak_fwhm().unwrap_or(f64::NAN));
    if cs {
        let auto = |tags: &[TimeTag], window: f64, seed: u64| {
            let o = G2Options {
                window,
                offset: 0.0,
                dark_rates: None,
                ..opts
            };
            g2_auto_hbt(tags, split, &o, seed)
        };
        let gs = auto(&a, auto_windows.0, ctx.seed)?;
        let gi = auto(&b, auto_windows.1, ctx.seed.wrapping_add(1))?;
        let r = cauchy_schwarz_r((est.g2, est.sigma), (gs.g2, gs.sigma), (gi.g2, gi.sigma))?;
        for (k, v) in [
            ("g2_signal_auto", gs.g2),
            ("g2_signal_auto_sigma", gs.sigma),
            ("g2_idler_auto", gi.g2),
            ("g2_idler_auto_sigma", gi.sigma),
            ("cauchy_schwarz_r", r.r),
            ("cauchy_schwarz_sigma", r.sigma),
        ] {
            m.put(k, v);
            report.push_str(&format!("{k} = {v}\n"));
        }
    }
    let mut w = ctx.create("estimate.txt")?;
    w.write_all(report.as_bytes())?;
    w.flush()?;
    ctx.finish(&m)
}
