use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::placement::{place, validate_overlap};
use super::{invalid, synth_unison_timbre, EnsembleSpec, SynthError, TimbreSpec};
use crate::signal::TimeSeries;
use crate::stochastics::SeedTree;

/// Reference pitch of `la`, Hz.
pub const NOTE_LA: f64 = 440.0;

/// Fixed-do semitone offsets relative to `la`. Keys are canonical tokens:
/// a base name optionally prefixed by `♯` or `♭`. Tokens missing from the
/// table fall back to their base name shifted by the accidental.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SolfegeTable(pub BTreeMap<String, i32>);

impl Default for SolfegeTable {
    fn default() -> Self {
        let entries = [
            ("do", 3),
            ("re", 5),
            ("mi", 7),
            ("fa", 8),
            ("so", -2),
            ("la", 0),
            ("si", 2),
            ("♯so", -1),
            ("♯fa", -3),
        ];
        SolfegeTable(entries.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

const BASES: [&str; 7] = ["do", "re", "mi", "fa", "so", "la", "si"];

/// Splits a token into (accidental shift, base name).
fn parse_token(token: &str) -> Option<(i32, &'static str)> {
    let t = token.trim();
    let (shift, rest) = if let Some(r) = t.strip_prefix('♯').or_else(|| t.strip_prefix('#')) {
        (1, r)
    } else if let Some(r) = t.strip_prefix('♭') {
        (-1, r)
    } else if let Some(r) = t.strip_prefix('♮') {
        (0, r)
    } else if let Some(r) = t.strip_suffix('♯').or_else(|| t.strip_suffix('#')) {
        (1, r)
    } else if let Some(r) = t.strip_suffix('♭').or_else(|| t.strip_suffix('b')) {
        (-1, r)
    } else if let Some(r) = t.strip_suffix('♮') {
        (0, r)
    } else {
        (0, t)
    };
    let lower = rest.to_ascii_lowercase();
    let base = match lower.as_str() {
        "sol" => "so",
        "ti" => "si",
        other => BASES.iter().copied().find(|b| *b == other)?,
    };
    Some((shift, base))
}

impl SolfegeTable {
    pub fn semitones(&self, token: &str) -> Result<i32, SynthError> {
        let (shift, base) =
            parse_token(token).ok_or_else(|| SynthError::UnknownNote(token.to_owned()))?;
        let key = match shift {
            1 => format!("♯{base}"),
            -1 => format!("♭{base}"),
            _ => base.to_owned(),
        };
        if let Some(k) = self.0.get(&key) {
            return Ok(*k);
        }
        self.0
            .get(base)
            .map(|k| k + shift)
            .ok_or_else(|| SynthError::UnknownNote(token.to_owned()))
    }

    pub fn pitch(&self, token: &str, reference: f64) -> Result<f64, SynthError> {
        let k = self.semitones(token)?;
        Ok(reference * 2f64.powf(k as f64 / 12.0))
    }
}

/// Equal-tempered pitch of a solfège token under the default table.
pub fn note_pitch(token: &str, reference: f64) -> Result<f64, SynthError> {
    SolfegeTable::default().pitch(token, reference)
}

/// A monophonic melody of single-source timbre notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelodySpec {
    pub notes: Vec<String>,
    /// Seconds per note.
    pub note_duration: f64,
    /// Fraction of a note by which the next note starts early, in `[0, 0.9]`.
    pub overlap_fraction: f64,
    /// Pitch of `la`, Hz.
    pub reference_pitch: f64,
    /// Per-note detune half-width, Hz.
    pub detune_halfwidth: f64,
    pub timbre: TimbreSpec,
    pub sample_rate: f64,
    #[serde(default)]
    pub solfege: SolfegeTable,
    pub seed: SeedTree,
}

impl MelodySpec {
    /// Ensemble template for note `k` (a single source).
    pub fn note_spec(&self, k: usize) -> Result<EnsembleSpec, SynthError> {
        let token = self
            .notes
            .get(k)
            .ok_or_else(|| invalid("notes", format!("no note at index {k}")))?;
        Ok(EnsembleSpec {
            fiducial_freq: self.solfege.pitch(token, self.reference_pitch)?,
            source_count: 1,
            detune_halfwidth: self.detune_halfwidth,
            duration: self.note_duration,
            sample_rate: self.sample_rate,
            timbre: Some(self.timbre),
            vibrato: None,
            seed: self.seed.child("note", k as u64),
        })
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.notes.is_empty() {
            return Err(invalid("notes", "melody needs at least one note"));
        }
        validate_overlap(self.overlap_fraction)?;
        if !(self.reference_pitch.is_finite() && self.reference_pitch > 0.0) {
            return Err(invalid("reference_pitch", "must be positive and finite"));
        }
        for k in 0..self.notes.len() {
            self.note_spec(k)?.validate()?;
        }
        Ok(())
    }
}

/// Renders each note and places them with the configured overlap.
pub fn build_melody(spec: &MelodySpec) -> Result<TimeSeries, SynthError> {
    spec.validate()?;
    let notes = (0..spec.notes.len())
        .map(|k| synth_unison_timbre(&spec.note_spec(k)?))
        .collect::<Result<Vec<_>, _>>()?;
    let pieces: Vec<&[f64]> = notes.iter().map(|n| n.samples()).collect();
    Ok(TimeSeries::new(
        place(&pieces, spec.overlap_fraction),
        spec.sample_rate,
    )?)
}
