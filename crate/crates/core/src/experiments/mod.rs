//! Configured runs: generate (or read) a signal per repetition, square it,
//! measure the low-frequency power law and the UBR ratio, and write the
//! spectrum CSV and a metadata record.
//!
//! An output directory holds, per run:
//!
//! ```text
//! <out>/<name>/config.toml           the exact config, re-runnable with `ubr run`
//! <out>/<name>/metadata.json         config, generator name, code version, summary
//! <out>/<name>/spectrum_rep<r>.csv   frequency_hz,power
//! <out>/<name>/signal_rep<r>.wav     with --emit-wav; peak normalized to 0.9
//! ```

mod config;
mod presets;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioError};
use crate::signal::TimeSeries;
use crate::spectral::{self, PowerLawFit, PowerSpectrum, SpectralError, UbrRatio, Window};
use crate::stochastics::GENERATOR_NAME;
use crate::synth::{self, SynthError};

pub use config::{
    AnalysisSection, CsvContent, ExperimentConfig, Generator, GeneratorKind, GeneratorSection,
    MelodySection, RunSection, SegmentSection, WavSection, DEFAULT_REPETITIONS,
    DEFAULT_SAMPLE_RATE,
};
pub use presets::{find_preset, preset_config, Preset, MELODY, PRESETS};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Peak level of emitted WAV files.
pub const WAV_PEAK: f64 = 0.9;
pub const WAV_BITS: u16 = 16;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset `{0}` (see `ubr list-presets`)")]
    UnknownPreset(String),
    #[error("invalid parameters: {0}")]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("audio: {0}")]
    Audio(#[from] AudioError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] SpectralError),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 validation, 2 I/O, 3 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::UnknownPreset(_)
            | ExperimentError::Synth(_) => 1,
            ExperimentError::Io { .. } => 2,
            ExperimentError::Audio(e) => match e {
                AudioError::ChannelOutOfRange { .. }
                | AudioError::ClipOutOfRange { .. }
                | AudioError::BitDepth(_)
                | AudioError::SampleRate(_) => 1,
                _ => 2,
            },
            ExperimentError::Analysis(_) => 3,
        }
    }
}

/// Spectra and measurements of one squared signal.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub spectrum: PowerSpectrum,
    pub binned: PowerSpectrum,
    pub fit: Result<PowerLawFit, SpectralError>,
    pub ubr: Result<UbrRatio, SpectralError>,
}

/// Squares `signal` and runs the periodogram, log-binning, fit and ratio.
pub fn analyze_signal(signal: &TimeSeries, a: &AnalysisSection) -> Result<Analysis, SpectralError> {
    let spectrum = spectral::periodogram_windowed(&spectral::square_signal(signal), a.window)?;
    let binned = spectral::log_bin(&spectrum, a.bins_per_decade)?;
    let (lo, hi) = match a.band {
        Some([lo, hi]) => (lo, hi),
        None => spectral::default_fit_band(signal.duration()),
    };
    let fit = spectral::fit_power_law(&binned, lo, hi);
    let ubr = spectral::ubr_ratio_at(&spectrum, a.ubr_low_freq, a.ubr_high_threshold);
    Ok(Analysis {
        spectrum,
        binned,
        fit,
        ubr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub rep: u32,
    pub seed_path: Vec<(String, u64)>,
    pub sample_count: usize,
    pub duration: f64,
    pub fit: Option<PowerLawFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub ubr: Option<UbrRatio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ubr_error: Option<String>,
    pub ubr_detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav: Option<String>,
    /// Factor applied to the signal before WAV export.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_scale: Option<f64>,
}

impl RepSummary {
    pub fn index(&self) -> Option<f64> {
        self.fit.map(|f| f.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std_dev: f64,
    pub std_err: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats {
            count: n,
            mean,
            std_dev,
            std_err: std_dev / (n as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub index: Option<Stats>,
    pub r_squared: Option<Stats>,
    /// Statistics of `log10 R`.
    pub log10_ubr: Option<Stats>,
    /// `10^mean(log10 R)`.
    pub ubr_geometric_mean: Option<f64>,
    pub ubr_detected_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub kind: GeneratorKind,
    pub seed: u64,
    pub band: Option<(f64, f64)>,
    pub reps: Vec<RepSummary>,
    pub aggregate: Aggregate,
}

impl Summary {
    fn new(cfg: &ExperimentConfig, reps: Vec<RepSummary>) -> Summary {
        let collect = |f: &dyn Fn(&RepSummary) -> Option<f64>| -> Vec<f64> {
            reps.iter().filter_map(f).collect()
        };
        let log_r = collect(&|r| r.ubr.map(|u| u.value).filter(|v| *v > 0.0).map(f64::log10));
        let log10_ubr = Stats::of(&log_r);
        Summary {
            name: cfg.experiment.name.clone(),
            kind: cfg.generator.kind,
            seed: cfg.experiment.seed,
            band: reps.iter().find_map(|r| r.fit.map(|f| f.band)),
            aggregate: Aggregate {
                index: Stats::of(&collect(&|r| r.index())),
                r_squared: Stats::of(&collect(&|r| r.fit.map(|f| f.r_squared))),
                ubr_geometric_mean: log10_ubr.map(|s| 10f64.powf(s.mean)),
                log10_ubr,
                ubr_detected_count: reps.iter().filter(|r| r.ubr_detected).count(),
            },
            reps,
        }
    }

    pub fn mean_index(&self) -> Option<f64> {
        self.aggregate.index.map(|s| s.mean)
    }

    /// True when no repetition shows the low-frequency excess.
    pub fn ubr_absent(&self) -> bool {
        self.aggregate.ubr_detected_count == 0
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} ({}), seed {}, {} repetition(s)",
            self.name,
            self.kind.name(),
            self.seed,
            self.reps.len()
        )?;
        for r in &self.reps {
            write!(f, "  rep {}:", r.rep)?;
            match &r.ubr {
                Some(u) => write!(f, " R = {:.3e}", u.value)?,
                None => write!(f, " R n/a")?,
            }
            match &r.fit {
                Some(fit) => write!(
                    f,
                    ", gamma = {:.3}, r2 = {:.3}, {} bins",
                    fit.index, fit.r_squared, fit.bin_count
                )?,
                None => write!(f, ", no fit ({})", r.fit_error.as_deref().unwrap_or("?"))?,
            }
            if !r.ubr_detected {
                write!(f, " [no UBR]")?;
            }
            writeln!(f)?;
        }
        let a = &self.aggregate;
        if let Some(g) = a.ubr_geometric_mean {
            writeln!(f, "  R geometric mean = {g:.3e}")?;
        }
        if self.ubr_absent() {
            writeln!(f, "  UBR absent in every repetition; no power law reported")
        } else {
            match (a.index, self.band) {
                (Some(s), Some((lo, hi))) => writeln!(
                    f,
                    "  gamma = {:.3} +- {:.3} (std {:.3}, n = {}) over [{lo}, {hi}] Hz",
                    s.mean, s.std_err, s.std_dev, s.count
                ),
                _ => writeln!(f, "  no power-law fit succeeded"),
            }
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    generator_name: &'a str,
    code_version: &'a str,
    config: &'a ExperimentConfig,
    summary: &'a Summary,
}

/// Produces the signal of one repetition.
pub fn render(generator: &Generator) -> Result<TimeSeries, ExperimentError> {
    Ok(match generator {
        Generator::Ensemble(kind, spec) => match kind {
            GeneratorKind::TimbreUnison => synth::synth_unison_timbre(spec)?,
            GeneratorKind::VibratoUnison => synth::synth_unison_vibrato(spec)?,
            _ => synth::synth_unison_timbre_vibrato(spec)?,
        },
        Generator::Resonance(spec, res) => synth::synth_resonance(spec, res)?,
        Generator::IrEnsemble(spec, ir) => synth::synth_ir_ensemble(spec, ir)?,
        Generator::Segments(spec, ir, seg) => {
            synth::synth_ir_segments(spec, ir, seg.count, seg.overlap_fraction)?
        }
        Generator::Melody(m) => synth::build_melody(m)?,
        Generator::Wav(w) => {
            let full = audio_io::read_wav(&w.path, w.channel)?;
            let duration = w.duration.unwrap_or(full.duration() - w.start);
            audio_io::clip(&full, w.start, duration)?
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

/// Runs every repetition of `cfg`, writing outputs when `out_dir` is set.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Summary, ExperimentError> {
    cfg.validate()?;
    let dir = match &cfg.experiment.out_dir {
        Some(out) => {
            let dir = out.join(&cfg.experiment.name);
            fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
            Some(dir)
        }
        None => None,
    };
    let reps = if cfg.is_stochastic() {
        cfg.experiment.repetitions
    } else {
        1
    };

    let mut summaries = Vec::with_capacity(reps as usize);
    let mut first_error = None;
    for rep in 0..reps {
        let seed = cfg.rep_seed(rep);
        let generator = cfg.generator(seed.clone())?;
        let signal = render(&generator)?;
        let analysis = analyze_signal(&signal, &cfg.analysis)?;

        let mut summary = RepSummary {
            rep,
            seed_path: seed.path().to_vec(),
            sample_count: signal.len(),
            duration: signal.duration(),
            fit: analysis.fit.as_ref().ok().copied(),
            fit_error: analysis.fit.as_ref().err().map(|e| e.to_string()),
            ubr: analysis.ubr.as_ref().ok().copied(),
            ubr_error: analysis.ubr.as_ref().err().map(|e| e.to_string()),
            ubr_detected: analysis
                .ubr
                .as_ref()
                .is_ok_and(|u| u.value >= cfg.analysis.ubr_present_threshold),
            spectrum_csv: None,
            wav: None,
            wav_scale: None,
        };
        if summary.fit.is_none() && summary.ubr.is_none() && first_error.is_none() {
            first_error = analysis.fit.clone().err();
        }

        if let Some(dir) = &dir {
            let name = format!("spectrum_rep{rep}.csv");
            let spectrum = match cfg.analysis.spectrum_csv {
                CsvContent::Binned => &analysis.binned,
                CsvContent::Raw => &analysis.spectrum,
            };
            audio_io::save_spectrum_csv(spectrum, dir.join(&name))?;
            summary.spectrum_csv = Some(name);
            if cfg.experiment.emit_wav {
                let (scaled, scale) = audio_io::normalize_peak(&signal, WAV_PEAK);
                let name = format!("signal_rep{rep}.wav");
                audio_io::write_wav(&scaled, dir.join(&name), WAV_BITS)?;
                summary.wav = Some(name);
                summary.wav_scale = Some(scale);
            }
        }
        summaries.push(summary);
    }

    if summaries.iter().all(|r| r.fit.is_none() && r.ubr.is_none()) {
        if let Some(e) = first_error {
            return Err(e.into());
        }
    }

    let summary = Summary::new(cfg, summaries);
    if let Some(dir) = &dir {
        write_file(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;
        let meta = Metadata {
            generator_name: GENERATOR_NAME,
            code_version: CODE_VERSION,
            config: cfg,
            summary: &summary,
        };
        let json = serde_json::to_string_pretty(&meta)
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        write_file(&dir.join("metadata.json"), json.as_bytes())?;
    }
    Ok(summary)
}

pub fn run_config_file(path: impl AsRef<Path>) -> Result<Summary, ExperimentError> {
    run_config(&ExperimentConfig::load(path)?)
}

/// Runs a built-in preset with `seed`, writing into `out` when given.
pub fn run_preset(id: &str, seed: u64, out: Option<&Path>) -> Result<Summary, ExperimentError> {
    let mut cfg = preset_config(id, seed)?;
    cfg.experiment.out_dir = out.map(Path::to_path_buf);
    run_config(&cfg)
}

/// Options of a single-file analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAnalysisOptions {
    pub channel: usize,
    pub start: f64,
    pub duration: Option<f64>,
    pub band: Option<(f64, f64)>,
    pub window: Window,
    pub out_dir: Option<PathBuf>,
}

impl Default for WavAnalysisOptions {
    fn default() -> Self {
        WavAnalysisOptions {
            channel: 0,
            start: 0.0,
            duration: None,
            band: None,
            window: Window::None,
            out_dir: None,
        }
    }
}

/// Config equivalent of [`analyze_wav`].
pub fn wav_config(path: impl AsRef<Path>, opts: &WavAnalysisOptions) -> ExperimentConfig {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "wav".to_owned());
    ExperimentConfig {
        experiment: RunSection {
            name,
            seed: 0,
            repetitions: 1,
            out_dir: opts.out_dir.clone(),
            emit_wav: false,
        },
        generator: GeneratorSection {
            kind: GeneratorKind::WavAnalysis,
            sample_rate: DEFAULT_SAMPLE_RATE,
            fiducial_freq: None,
            source_count: None,
            detune_halfwidth: None,
            duration: None,
        },
        timbre: None,
        vibrato: None,
        resonance: None,
        ir: None,
        segments: None,
        melody: None,
        wav: Some(WavSection {
            path: path.to_path_buf(),
            channel: opts.channel,
            start: opts.start,
            duration: opts.duration,
        }),
        analysis: AnalysisSection {
            band: opts.band.map(|(lo, hi)| [lo, hi]),
            window: opts.window,
            ..AnalysisSection::default()
        },
    }
}

/// Clips one channel of a WAV file and measures it like a synthetic run.
pub fn analyze_wav(
    path: impl AsRef<Path>,
    opts: &WavAnalysisOptions,
) -> Result<Summary, ExperimentError> {
    run_config(&wav_config(path, opts))
}

/// Gnuplot script drawing every spectrum CSV of a run directory on log-log
/// axes, with the fitted line of each repetition.
pub fn gnuplot_script(summary: &Summary) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset logscale xy\nset format y '10^{%L}'\n");
    s.push_str("set xlabel 'frequency (Hz)'\nset ylabel 'power of squared signal'\n");
    s.push_str(&format!(
        "set title '{}'\nset key top right\n",
        summary.name
    ));
    let mut plots = Vec::new();
    for r in &summary.reps {
        if let Some(csv) = &r.spectrum_csv {
            plots.push(format!(
                "'{csv}' skip 1 using 1:2 with linespoints pt 7 ps 0.4 title 'rep {}'",
                r.rep
            ));
        }
        if let Some(fit) = &r.fit {
            let (lo, hi) = fit.band;
            plots.push(format!(
                "[{lo}:{hi}] 10**({a}) * x**({g}) with lines lw 2 dt 2 title 'fit {rep}: {g:.2}'",
                a = fit.log10_amplitude,
                g = fit.index,
                rep = r.rep
            ));
        }
    }
    if plots.is_empty() {
        s.push_str("# no spectra recorded in this run\n");
    } else {
        s.push_str("plot ");
        s.push_str(&plots.join(", \\\n     "));
        s.push('\n');
    }
    s
}

/// Reads the summary back from a run directory.
pub fn load_summary(dir: impl AsRef<Path>) -> Result<Summary, ExperimentError> {
    #[derive(Deserialize)]
    struct Meta {
        summary: Summary,
    }
    let path = dir.as_ref().join("metadata.json");
    let text = fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
    let meta: Meta = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    Ok(meta.summary)
}
