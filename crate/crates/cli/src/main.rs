//! `freqmux` command-line experiments. Each subcommand reads a flat
//! `key = value` configuration, writes CSV artifacts plus a `manifest.txt`
//! into the output directory, and prints the manifest outputs.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Params;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "freqmux", version, about = "Frequency-multiplexed photon-pair experiments")]
struct Cli {
    /// Master RNG seed (config key `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving CSV artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Flat `key = value` config file; a previous manifest also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fiber-coupled VIPA channel response, cross-talk and efficiency envelope.
    VipaResponse {
        /// Round-trip reflectance `rR`; 0 removes the resonance.
        #[arg(long)]
        rr: Option<f64>,
        /// Number of adjacent channels to trace.
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        step_ghz: Option<f64>,
    },
    /// Synthesizes a demultiplexed comb spectrum as CSV.
    DemuxSpectrum {
        #[arg(long)]
        half_width_mhz: Option<f64>,
        #[arg(long)]
        lines: Option<usize>,
        /// Gaussian noise standard deviation relative to the peak.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fits the common Lorentzian half-width of a measured spectrum.
    FitSpectrum {
        /// Spectrum CSV (`detuning_hz,intensity` or `position_m,intensity`).
        measured: PathBuf,
        #[arg(long)]
        lines: Option<usize>,
    },
    /// Generates signal and idler time-tag files.
    Simulate {
        /// Acquisition time (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Mean pairs per mode per coherence slot.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        idler_excess_loss: Option<f64>,
        #[arg(long, value_enum)]
        format: Option<TagFormat>,
    },
    /// Coincidence histogram and g² estimate of two tag files.
    Analyze {
        signal: PathBuf,
        idler: PathBuf,
        /// Coincidence window (ns).
        #[arg(long)]
        window_ns: Option<f64>,
        #[arg(long)]
        offset_ns: Option<f64>,
        /// Acquisition time (s); defaults to the span of the tags.
        #[arg(long)]
        duration: Option<f64>,
        /// Also estimate both autocorrelations and the Cauchy-Schwarz ratio.
        #[arg(long)]
        cauchy_schwarz: bool,
        /// Subtract dark-count accidentals using `signal_dark_hz`/`idler_dark_hz`.
        #[arg(long)]
        dark_subtract: bool,
    },
    /// Signal-idler correlation grid over mode pairs.
    Grid {
        /// Simulated time per entry (s).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        pump_mw: Option<f64>,
        /// `block`, `table` or `band`.
        #[arg(long)]
        pairs: Option<String>,
        /// Leaked neighbours per side of the signal filter; 0 disables leakage.
        #[arg(long)]
        signal_leak_modes: Option<usize>,
    },
    /// Prints a matplotlib script that plots one of the CSV artifacts.
    PlotScript {
        #[arg(value_enum)]
        kind: commands::plot::PlotKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TagFormat {
    Ttag,
    Csv,
}

impl std::fmt::Display for TagFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TagFormat::Ttag => "ttag",
            TagFormat::Csv => "csv",
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::PlotScript { kind } = cli.command {
        print!("{}", commands::plot::script(kind));
        return Ok(());
    }
    let mut params = match &cli.config {
        Some(path) => Params::load(path)?,
        None => Params::default(),
    };
    params.set_opt("seed", cli.seed, "--seed");
    let name = match &cli.command {
        Command::VipaResponse { rr, channels, step_ghz } => {
            params.set_opt("rr", *rr, "--rr");
            params.set_opt("channels", *channels, "--channels");
            params.set_opt("step_ghz", *step_ghz, "--step-ghz");
            "vipa-response"
        }
        Command::DemuxSpectrum {
            half_width_mhz,
            lines,
            noise,
        } => {
            params.set_opt("half_width_mhz", *half_width_mhz, "--half-width-mhz");
            params.set_opt("lines", *lines, "--lines");
            params.set_opt("noise_fraction", *noise, "--noise");
            "demux-spectrum"
        }
        Command::FitSpectrum { lines, .. } => {
            params.set_opt("lines", *lines, "--lines");
            "fit-spectrum"
        }
        Command::Simulate {
            duration,
            mu,
            idler_excess_loss,
            format,
        } => {
            params.set_opt("duration_s", *duration, "--duration");
            params.set_opt("mu", *mu, "--mu");
            params.set_opt("idler_excess_loss", *idler_excess_loss, "--idler-excess-loss");
            params.set_opt("format", *format, "--format");
            "simulate"
        }
        Command::Analyze {
            window_ns,
            offset_ns,
            duration,
            cauchy_schwarz,
            dark_subtract,
            ..
        } => {
            params.set_opt("window_ns", *window_ns, "--window-ns");
            params.set_opt("offset_ns", *offset_ns, "--offset-ns");
            params.set_opt("duration_s", *duration, "--duration");
            if *cauchy_schwarz {
                params.set("cauchy_schwarz", true, "--cauchy-schwarz");
            }
            if *dark_subtract {
                params.set("dark_subtract", true, "--dark-subtract");
            }
            "analyze"
        }
        Command::Grid {
            duration,
            pump_mw,
            pairs,
            signal_leak_modes,
        } => {
            params.set_opt("duration_s", *duration, "--duration");
            params.set_opt("pump_mw", *pump_mw, "--pump-mw");
            params.set_opt("pairs", pairs.clone(), "--pairs");
            params.set_opt("signal_leak_modes", *signal_leak_modes, "--signal-leak-modes");
            "grid"
        }
        Command::PlotScript { .. } => unreachable!("handled above"),
    };
    params.set_pairs(&cli.set)?;
    params.choice("experiment", name, &[name])?;
    let seed: u64 = params.get("seed", 0)?;
    let ctx = commands::Context {
        params,
        out_dir: cli.out_dir,
        seed,
    };
    match cli.command {
        Command::VipaResponse { .. } => commands::optics::vipa_response(ctx),
        Command::DemuxSpectrum { .. } => commands::spectrum::demux_spectrum(ctx),
        Command::FitSpectrum { measured, .. } => commands::spectrum::fit_spectrum(ctx, &measured),
        Command::Simulate { .. } => commands::tags::simulate(ctx),
        Command::Analyze { signal, idler, .. } => commands::tags::analyze(ctx, &signal, &idler),
        Command::Grid { .. } => commands::grid::grid(ctx),
        Command::PlotScript { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqmux: {e}");
            e.exit_code()
        }
    }
}
