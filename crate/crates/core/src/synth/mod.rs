//! Generators for every synthetic signal: timbre and vibrato unisons, their
//! combination, melodies with overlapping notes, resonating strings and
//! infrared-divergent ensembles.
//!
//! All generators are pure functions of their spec and seed. Source `s` of
//! an ensemble draws from `seed.child("source", s)`, always in the order
//! detune, phase, per-overtone phases (only when enabled), then vibrato
//! rate, depth jitter and vibrato phase (only when vibrato is configured).

pub mod bank;
mod ensemble;
mod irdiv;
mod melody;
mod placement;
mod resonance;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{sample_count, SignalError};
use crate::stochastics::{SeedTree, StochasticsError};

pub use ensemble::{
    draw_source, render_source, synth_timbre_note, synth_timbre_note_with_phases,
    synth_unison_timbre, synth_unison_timbre_vibrato, synth_unison_vibrato, vibrato_phase,
    SourceDraw, VibratoDraw,
};
pub use irdiv::{synth_ir_ensemble, synth_ir_segments, validate_ir_ensemble};
pub use melody::{build_melody, note_pitch, MelodySpec, SolfegeTable, NOTE_LA};
pub use placement::{concat_segments, segment_starts, validate_overlap};
pub use resonance::{default_singularity_tolerance, synth_resonance, ResonanceSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(
        "overtone {overtone} reaches {frequency:.3} Hz, at or above the Nyquist limit {nyquist:.3} Hz"
    )]
    Nyquist {
        overtone: u32,
        frequency: f64,
        nyquist: f64,
    },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("unknown note token `{0}`")]
    UnknownNote(String),
    #[error("segments have mixed sample rates ({0} Hz vs {1} Hz)")]
    MixedSampleRates(f64, f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Stochastics(#[from] StochasticsError),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Overtone stack: `M` harmonics weighted `m^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimbreSpec {
    pub overtone_count: u32,
    pub spectral_slope: f64,
    /// Draw an independent phase for every overtone instead of one per source.
    #[serde(default)]
    pub per_overtone_phase: bool,
}

impl TimbreSpec {
    pub fn new(overtone_count: u32, spectral_slope: f64) -> Self {
        TimbreSpec {
            overtone_count,
            spectral_slope,
            per_overtone_phase: false,
        }
    }

    pub fn weight(&self, m: u32) -> f64 {
        (m as f64).powf(self.spectral_slope)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.overtone_count == 0 {
            return Err(invalid("overtone_count", "must be at least 1"));
        }
        if !self.spectral_slope.is_finite() {
            return Err(invalid("spectral_slope", "must be finite"));
        }
        Ok(())
    }
}

/// Sinusoidal pitch modulation. Depth `b` per source is
/// `base_depth + U(-depth_jitter, depth_jitter)`, rate `U(rate_lo, rate_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibratoSpec {
    pub base_depth: f64,
    pub depth_jitter: f64,
    pub rate_lo: f64,
    pub rate_hi: f64,
}

impl VibratoSpec {
    pub fn max_depth(&self) -> f64 {
        self.base_depth.abs() + self.depth_jitter.abs()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.base_depth.is_finite() && self.base_depth >= 0.0) {
            return Err(invalid("base_depth", "must be finite and >= 0"));
        }
        if !(self.depth_jitter.is_finite() && self.depth_jitter >= 0.0) {
            return Err(invalid("depth_jitter", "must be finite and >= 0"));
        }
        if !(self.rate_lo.is_finite() && self.rate_hi.is_finite()) {
            return Err(invalid("rate_lo", "rates must be finite"));
        }
        if self.rate_lo > self.rate_hi {
            return Err(invalid(
                "rate_lo",
                format!("rate_lo {} exceeds rate_hi {}", self.rate_lo, self.rate_hi),
            ));
        }
        Ok(())
    }
}

/// Full description of a synthetic unison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Nominal pitch, Hz.
    pub fiducial_freq: f64,
    pub source_count: u32,
    /// Detunes are drawn uniformly from `[-detune_halfwidth, detune_halfwidth]`.
    pub detune_halfwidth: f64,
    /// Seconds.
    pub duration: f64,
    pub sample_rate: f64,
    pub timbre: Option<TimbreSpec>,
    pub vibrato: Option<VibratoSpec>,
    pub seed: SeedTree,
}

impl EnsembleSpec {
    pub fn len(&self) -> usize {
        sample_count(self.duration, self.sample_rate)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn overtone_count(&self) -> u32 {
        self.timbre.map_or(1, |t| t.overtone_count)
    }

    /// Highest instantaneous frequency of the fundamental of any source.
    pub fn max_fundamental(&self) -> f64 {
        self.fiducial_freq + self.detune_halfwidth + self.vibrato.map_or(0.0, |v| v.max_depth())
    }

    /// Checks the basic ranges shared by every generator, without the
    /// Nyquist guard.
    pub fn validate_basic(&self) -> Result<(), SynthError> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive and finite"));
        }
        if !(self.fiducial_freq.is_finite() && self.fiducial_freq > 0.0) {
            return Err(invalid("fiducial_freq", "must be positive and finite"));
        }
        if self.source_count == 0 {
            return Err(invalid("source_count", "must be at least 1"));
        }
        if !(self.detune_halfwidth.is_finite() && self.detune_halfwidth >= 0.0) {
            return Err(invalid("detune_halfwidth", "must be finite and >= 0"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid("duration", "must be positive and finite"));
        }
        if self.is_empty() {
            return Err(invalid("duration", "shorter than one sample"));
        }
        if let Some(t) = &self.timbre {
            t.validate()?;
        }
        if let Some(v) = &self.vibrato {
            v.validate()?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.validate_basic()?;
        check_nyquist(
            self.max_fundamental(),
            self.overtone_count(),
            self.sample_rate,
        )
    }
}

/// Fails with the lowest overtone of `fundamental` that reaches Nyquist.
pub fn check_nyquist(fundamental: f64, overtones: u32, sample_rate: f64) -> Result<(), SynthError> {
    let nyquist = sample_rate / 2.0;
    for m in 1..=overtones {
        let frequency = m as f64 * fundamental;
        if frequency >= nyquist {
            return Err(SynthError::Nyquist {
                overtone: m,
                frequency,
                nyquist,
            });
        }
    }
    Ok(())
}
