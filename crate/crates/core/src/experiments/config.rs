use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::spectral::{
    Window, DEFAULT_BINS_PER_DECADE, DEFAULT_UBR_HIGH, DEFAULT_UBR_LOW, UBR_PRESENT_THRESHOLD,
};
use crate::stochastics::{IrDivergentSpec, SeedTree};
use crate::synth::{
    validate_ir_ensemble, validate_overlap, EnsembleSpec, MelodySpec, ResonanceSpec, SolfegeTable,
    SynthError, TimbreSpec, VibratoSpec, NOTE_LA,
};

pub const DEFAULT_SAMPLE_RATE: f64 = 44100.0;
pub const DEFAULT_REPETITIONS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    TimbreUnison,
    VibratoUnison,
    Combined,
    Melody,
    Resonance,
    IrEnsemble,
    Segments,
    WavAnalysis,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::TimbreUnison => "timbre-unison",
            GeneratorKind::VibratoUnison => "vibrato-unison",
            GeneratorKind::Combined => "combined",
            GeneratorKind::Melody => "melody",
            GeneratorKind::Resonance => "resonance",
            GeneratorKind::IrEnsemble => "ir-ensemble",
            GeneratorKind::Segments => "segments",
            GeneratorKind::WavAnalysis => "wav-analysis",
        }
    }
}

/// A complete experiment: what to synthesize (or read), how to analyze it,
/// and how often to repeat. Serialized as TOML with one table per concern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: RunSection,
    pub generator: GeneratorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timbre: Option<TimbreSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vibrato: Option<VibratoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance: Option<ResonanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir: Option<IrDivergentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub melody: Option<MelodySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav: Option<WavSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_wav: bool,
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

/// Ensemble parameters shared by the synthetic kinds. Melody and
/// wav-analysis runs only read `kind` and `sample_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiducial_freq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detune_halfwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub count: usize,
    #[serde(default)]
    pub overlap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MelodySection {
    pub notes: Vec<String>,
    pub note_duration: f64,
    #[serde(default)]
    pub overlap_fraction: f64,
    #[serde(default = "default_reference")]
    pub reference_pitch: f64,
    #[serde(default)]
    pub detune_halfwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solfege: Option<SolfegeTable>,
}

fn default_reference() -> f64 {
    NOTE_LA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavSection {
    pub path: PathBuf,
    #[serde(default)]
    pub channel: usize,
    #[serde(default)]
    pub start: f64,
    /// Seconds; the rest of the file when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvContent {
    /// Log-binned spectrum (one row per occupied bin).
    #[default]
    Binned,
    /// Every periodogram bin.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Fit band `[lo, hi]` in Hz; `[max(2/tau, 0.05), 100]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    #[serde(default = "default_bpd")]
    pub bins_per_decade: u32,
    #[serde(default = "default_ubr_low")]
    pub ubr_low_freq: f64,
    #[serde(default = "default_ubr_high")]
    pub ubr_high_threshold: f64,
    #[serde(default = "default_ubr_present")]
    pub ubr_present_threshold: f64,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub spectrum_csv: CsvContent,
}

fn default_bpd() -> u32 {
    DEFAULT_BINS_PER_DECADE
}
fn default_ubr_low() -> f64 {
    DEFAULT_UBR_LOW
}
fn default_ubr_high() -> f64 {
    DEFAULT_UBR_HIGH
}
fn default_ubr_present() -> f64 {
    UBR_PRESENT_THRESHOLD
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            band: None,
            bins_per_decade: DEFAULT_BINS_PER_DECADE,
            ubr_low_freq: DEFAULT_UBR_LOW,
            ubr_high_threshold: DEFAULT_UBR_HIGH,
            ubr_present_threshold: UBR_PRESENT_THRESHOLD,
            window: Window::None,
            spectrum_csv: CsvContent::Binned,
        }
    }
}

/// A config resolved into concrete generator inputs for one repetition.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Ensemble(GeneratorKind, EnsembleSpec),
    Resonance(EnsembleSpec, ResonanceSpec),
    IrEnsemble(EnsembleSpec, IrDivergentSpec),
    Segments(EnsembleSpec, IrDivergentSpec, SegmentSection),
    Melody(MelodySpec),
    Wav(WavSection),
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn need<T: Copy>(value: Option<T>, field: &str) -> Result<T, ExperimentError> {
    value.ok_or_else(|| config_err(format!("missing field `generator.{field}`")))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ExperimentError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Seed sub-tree of repetition `rep`.
    pub fn rep_seed(&self, rep: u32) -> SeedTree {
        SeedTree::new(self.experiment.seed).child("rep", rep as u64)
    }

    fn section<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T, ExperimentError> {
        value.as_ref().ok_or_else(|| {
            config_err(format!(
                "section [{name}] is required for kind `{}`",
                self.generator.kind.name()
            ))
        })
    }

    fn present_sections(&self) -> impl Iterator<Item = &'static str> + '_ {
        [
            ("timbre", self.timbre.is_some()),
            ("vibrato", self.vibrato.is_some()),
            ("resonance", self.resonance.is_some()),
            ("ir", self.ir.is_some()),
            ("segments", self.segments.is_some()),
            ("melody", self.melody.is_some()),
            ("wav", self.wav.is_some()),
        ]
        .into_iter()
        .filter(|(_, present)| *present)
        .map(|(name, _)| name)
    }

    /// Rejects any present section outside `allowed`.
    fn only(&self, allowed: &[&str]) -> Result<(), ExperimentError> {
        match self.present_sections().find(|s| !allowed.contains(s)) {
            Some(name) => Err(config_err(format!(
                "section [{name}] does not apply to kind `{}`",
                self.generator.kind.name()
            ))),
            None => Ok(()),
        }
    }

    fn ensemble(&self, seed: SeedTree) -> Result<EnsembleSpec, ExperimentError> {
        let g = &self.generator;
        Ok(EnsembleSpec {
            fiducial_freq: need(g.fiducial_freq, "fiducial_freq")?,
            source_count: need(g.source_count, "source_count")?,
            detune_halfwidth: g.detune_halfwidth.unwrap_or(0.0),
            duration: need(g.duration, "duration")?,
            sample_rate: g.sample_rate,
            timbre: self.timbre,
            vibrato: self.vibrato,
            seed,
        })
    }

    /// Resolves the generator for a seed, checking that exactly the sections
    /// the kind uses are present.
    pub fn generator(&self, seed: SeedTree) -> Result<Generator, ExperimentError> {
        use GeneratorKind::*;
        let kind = self.generator.kind;
        match kind {
            TimbreUnison => {
                self.only(&["timbre"])?;
                self.section(&self.timbre, "timbre")?;
                Ok(Generator::Ensemble(kind, self.ensemble(seed)?))
            }
            VibratoUnison => {
                self.only(&["vibrato"])?;
                self.section(&self.vibrato, "vibrato")?;
                Ok(Generator::Ensemble(kind, self.ensemble(seed)?))
            }
            Combined => {
                self.only(&["timbre", "vibrato"])?;
                self.section(&self.timbre, "timbre")?;
                self.section(&self.vibrato, "vibrato")?;
                Ok(Generator::Ensemble(kind, self.ensemble(seed)?))
            }
            Resonance => {
                self.only(&["resonance", "timbre"])?;
                let res = *self.section(&self.resonance, "resonance")?;
                Ok(Generator::Resonance(self.ensemble(seed)?, res))
            }
            IrEnsemble => {
                self.only(&["ir"])?;
                let ir = *self.section(&self.ir, "ir")?;
                Ok(Generator::IrEnsemble(self.ensemble(seed)?, ir))
            }
            Segments => {
                self.only(&["ir", "segments"])?;
                let ir = *self.section(&self.ir, "ir")?;
                let seg = *self.section(&self.segments, "segments")?;
                Ok(Generator::Segments(self.ensemble(seed)?, ir, seg))
            }
            Melody => {
                self.only(&["melody", "timbre"])?;
                let m = self.section(&self.melody, "melody")?;
                let timbre = *self.section(&self.timbre, "timbre")?;
                Ok(Generator::Melody(MelodySpec {
                    notes: m.notes.clone(),
                    note_duration: m.note_duration,
                    overlap_fraction: m.overlap_fraction,
                    reference_pitch: m.reference_pitch,
                    detune_halfwidth: m.detune_halfwidth,
                    timbre,
                    sample_rate: self.generator.sample_rate,
                    solfege: m.solfege.clone().unwrap_or_default(),
                    seed,
                }))
            }
            WavAnalysis => {
                self.only(&["wav"])?;
                Ok(Generator::Wav(self.section(&self.wav, "wav")?.clone()))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.experiment.repetitions == 0 {
            return Err(config_err("`experiment.repetitions` must be at least 1"));
        }
        if self.experiment.name.trim().is_empty() {
            return Err(config_err("`experiment.name` must not be empty"));
        }
        let a = &self.analysis;
        if let Some([lo, hi]) = a.band {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(config_err(format!(
                    "`analysis.band` [{lo}, {hi}] is not a valid band"
                )));
            }
        }
        if a.bins_per_decade < crate::spectral::MIN_BINS_PER_DECADE {
            return Err(config_err("`analysis.bins_per_decade` must be at least 4"));
        }
        if !(a.ubr_low_freq > 0.0 && a.ubr_low_freq < a.ubr_high_threshold) {
            return Err(config_err(
                "`analysis.ubr_low_freq` must be positive and below `analysis.ubr_high_threshold`",
            ));
        }
        self.generator(self.rep_seed(0))?.validate()
    }

    pub fn is_stochastic(&self) -> bool {
        self.generator.kind != GeneratorKind::WavAnalysis
    }
}

impl Generator {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let r: Result<(), SynthError> = match self {
            Generator::Ensemble(_, spec) => spec.validate(),
            Generator::Resonance(spec, res) => spec.validate().and_then(|_| res.validate()),
            Generator::IrEnsemble(spec, ir) => validate_ir_ensemble(spec, ir),
            Generator::Segments(spec, ir, seg) => validate_ir_ensemble(spec, ir).and_then(|_| {
                if seg.count == 0 {
                    Err(SynthError::InvalidParameter {
                        field: "segments.count",
                        reason: "must be at least 1".into(),
                    })
                } else {
                    validate_overlap(seg.overlap_fraction)
                }
            }),
            Generator::Melody(m) => m.validate(),
            Generator::Wav(w) => {
                if !(w.start.is_finite() && w.start >= 0.0) {
                    return Err(config_err("`wav.start` must be >= 0"));
                }
                if let Some(d) = w.duration {
                    if !(d.is_finite() && d > 0.0) {
                        return Err(config_err("`wav.duration` must be positive"));
                    }
                }
                Ok(())
            }
        };
        r.map_err(ExperimentError::from)
    }
}
