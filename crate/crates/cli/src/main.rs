use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ubr_core::experiments::{
    self, find_preset, gnuplot_script, load_summary, preset_config, CsvContent, ExperimentConfig,
    ExperimentError, WavAnalysisOptions, PRESETS,
};
use ubr_core::spectral::Window;

/// Synthesize beating ensembles and measure the low-frequency power law of
/// their squared amplitude.
#[derive(Parser)]
#[command(name = "ubr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in preset (see list-presets).
    Preset {
        id: String,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Analyze one channel of a WAV file.
    Analyze {
        wav: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Clip start, seconds.
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// Clip length, seconds (default: to the end of the file).
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        analysis: AnalysisFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets and their parameters.
    ListPresets,
    /// Print the TOML config of a preset.
    PresetConfig {
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a gnuplot script for a finished run directory and print its path.
    PlotScript { run_dir: PathBuf },
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Output directory; nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each repetition's signal as 16-bit WAV.
    #[arg(long)]
    emit_wav: bool,
    /// Write every periodogram bin instead of the log-binned spectrum.
    #[arg(long)]
    raw_spectrum: bool,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Args)]
struct AnalysisFlags {
    /// Fit band in Hz, as lo:hi.
    #[arg(long, value_parser = parse_band)]
    band: Option<(f64, f64)>,
    /// Window applied before the FFT: none or hann.
    #[arg(long)]
    window: Option<Window>,
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("band low edge: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("band high edge: {e}"))?;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(format!("band {lo}:{hi} must satisfy 0 < lo < hi"));
    }
    Ok((lo, hi))
}

fn apply(cfg: &mut ExperimentConfig, run: &RunFlags) {
    if let Some(seed) = run.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(reps) = run.reps {
        cfg.experiment.repetitions = reps;
    }
    if let Some(out) = &run.out {
        cfg.experiment.out_dir = Some(out.clone());
    }
    cfg.experiment.emit_wav |= run.emit_wav;
    if run.raw_spectrum {
        cfg.analysis.spectrum_csv = CsvContent::Raw;
    }
    if let Some((lo, hi)) = run.analysis.band {
        cfg.analysis.band = Some([lo, hi]);
    }
    if let Some(w) = run.analysis.window {
        cfg.analysis.window = w;
    }
}

fn run_and_print(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let summary = experiments::run_config(cfg)?;
    print!("{summary}");
    if let Some(out) = &cfg.experiment.out_dir {
        println!("  outputs in {}", out.join(&cfg.experiment.name).display());
    }
    Ok(())
}

fn write_plot_script(dir: &Path) -> Result<PathBuf, ExperimentError> {
    let summary = load_summary(dir)?;
    let path = dir.join("plot.gp");
    std::fs::write(&path, gnuplot_script(&summary)).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Preset { id, run } => {
            let mut cfg = preset_config(&id, 0)?;
            apply(&mut cfg, &run);
            run_and_print(&cfg)
        }
        Command::Run { config, run } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply(&mut cfg, &run);
            run_and_print(&cfg)
        }
        Command::Analyze {
            wav,
            channel,
            start,
            duration,
            analysis,
            out,
        } => {
            let opts = WavAnalysisOptions {
                channel,
                start,
                duration,
                band: analysis.band,
                window: analysis.window.unwrap_or_default(),
                out_dir: out,
            };
            run_and_print(&experiments::wav_config(&wav, &opts))
        }
        Command::ListPresets => {
            for p in &PRESETS {
                println!("{:<6} {}", p.id, p.title);
                println!("       {}", p.parameters);
                if !p.notes.is_empty() {
                    println!("       note: {}", p.notes);
                }
            }
            Ok(())
        }
        Command::PresetConfig { id, seed } => {
            find_preset(&id)?;
            print!("{}", preset_config(&id, seed)?.to_toml()?);
            Ok(())
        }
        Command::PlotScript { run_dir } => {
            println!("{}", write_plot_script(&run_dir)?.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
