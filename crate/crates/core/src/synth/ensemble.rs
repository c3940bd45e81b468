use std::f64::consts::{PI, TAU};

use super::bank::{phase_at, render_partials, Partial};
use super::{check_nyquist, invalid, EnsembleSpec, SynthError, TimbreSpec};
use crate::signal::TimeSeries;
use crate::stochastics::{self, uniform};

/// Random parameters of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDraw {
    /// Hz offset from the fiducial pitch.
    pub detune: f64,
    /// Phase of overtone 1; shared by all overtones unless per-overtone phases are on.
    pub phase: f64,
    /// Phases for overtones `2..=M` when per-overtone phases are enabled.
    pub extra_phases: Vec<f64>,
    pub vibrato: Option<VibratoDraw>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibratoDraw {
    pub rate: f64,
    pub depth: f64,
    pub phase: f64,
}

impl SourceDraw {
    /// Phase applied to overtone `m` (1-based).
    pub fn overtone_phase(&self, m: u32) -> f64 {
        if m >= 2 {
            if let Some(p) = self.extra_phases.get(m as usize - 2) {
                return *p;
            }
        }
        self.phase
    }
}

/// Draws source `index` from `spec.seed.child("source", index)`.
pub fn draw_source(spec: &EnsembleSpec, index: u32) -> SourceDraw {
    let mut stream = spec.seed.child("source", index as u64).stream();
    let h = spec.detune_halfwidth;
    let detune = uniform(-h, h, &mut stream);
    let phase = stochastics::phase(&mut stream);
    let extra_phases = match spec.timbre {
        Some(t) if t.per_overtone_phase => (2..=t.overtone_count)
            .map(|_| stochastics::phase(&mut stream))
            .collect(),
        _ => Vec::new(),
    };
    let vibrato = spec.vibrato.map(|v| {
        let rate = uniform(v.rate_lo, v.rate_hi, &mut stream);
        let depth = v.base_depth + uniform(-v.depth_jitter, v.depth_jitter, &mut stream);
        let phase = stochastics::phase(&mut stream);
        VibratoDraw { rate, depth, phase }
    });
    SourceDraw {
        detune,
        phase,
        extra_phases,
        vibrato,
    }
}

/// Integrated vibrato phase (radians) at time `t`:
/// `2 b sin(pi theta t) sin(pi theta t + eta) / theta + 2 pi omega t`.
pub fn vibrato_phase(fiducial_freq: f64, rate: f64, depth: f64, phase_offset: f64, t: f64) -> f64 {
    vibrato_excursion(rate, depth, phase_offset, t) + TAU * fiducial_freq * t
}

/// The modulation part of [`vibrato_phase`], evaluated as
/// `2 pi b t sinc(pi theta t) sin(pi theta t + eta)` so that `theta = 0`
/// gives its limit `2 pi b t sin(eta)` with no special case.
fn vibrato_excursion(rate: f64, depth: f64, phase_offset: f64, t: f64) -> f64 {
    if depth == 0.0 {
        return 0.0;
    }
    let a = PI * rate * t;
    TAU * depth * t * sinc(a) * (a + phase_offset).sin()
}

/// `sin(a) / a`, with the series used where the quotient loses precision.
fn sinc(a: f64) -> f64 {
    if a.abs() < 1e-4 {
        let a2 = a * a;
        1.0 - a2 / 6.0 * (1.0 - a2 / 20.0)
    } else {
        a.sin() / a
    }
}

/// One source with timbre: `sum_m m^beta sin(2 pi m omega t + eta)`.
pub fn synth_timbre_note(
    fiducial_freq: f64,
    timbre: &TimbreSpec,
    phase: f64,
    len: usize,
    sample_rate: f64,
) -> Result<TimeSeries, SynthError> {
    let phases = vec![phase; timbre.overtone_count as usize];
    synth_timbre_note_with_phases(fiducial_freq, timbre, &phases, len, sample_rate)
}

/// As [`synth_timbre_note`] with an explicit phase per overtone.
pub fn synth_timbre_note_with_phases(
    fiducial_freq: f64,
    timbre: &TimbreSpec,
    phases: &[f64],
    len: usize,
    sample_rate: f64,
) -> Result<TimeSeries, SynthError> {
    timbre.validate()?;
    if phases.len() != timbre.overtone_count as usize {
        return Err(invalid("phases", "need one phase per overtone"));
    }
    check_nyquist(fiducial_freq, timbre.overtone_count, sample_rate)?;
    let partials: Vec<Partial> = (1..=timbre.overtone_count)
        .map(|m| Partial {
            freq: m as f64 * fiducial_freq,
            phase: phases[m as usize - 1],
            amp: timbre.weight(m),
        })
        .collect();
    let mut out = TimeSeries::zeros(len, sample_rate)?;
    render_partials(&partials, sample_rate, out.samples_mut());
    Ok(out)
}

fn stationary_partials(spec: &EnsembleSpec, draw: &SourceDraw, partials: &mut Vec<Partial>) {
    let f0 = spec.fiducial_freq + draw.detune;
    match &spec.timbre {
        Some(t) => partials.extend((1..=t.overtone_count).map(|m| Partial {
            freq: m as f64 * f0,
            phase: draw.overtone_phase(m),
            amp: t.weight(m),
        })),
        None => partials.push(Partial {
            freq: f0,
            phase: draw.phase,
            amp: 1.0,
        }),
    }
}

/// Adds one vibrato source. Without timbre the source is
/// `sin(phi_vib)` with the vibrato phase carrying the only offset; with
/// timbre it is `sum_m m^beta sin(m phi_vib + eta_m)`.
fn add_vibrato_source(spec: &EnsembleSpec, draw: &SourceDraw, out: &mut [f64]) {
    let vib = draw.vibrato.expect("vibrato draw present");
    let sr = spec.sample_rate;
    let f0 = spec.fiducial_freq + draw.detune;
    let (weights, offsets): (Vec<f64>, Vec<(f64, f64)>) = match &spec.timbre {
        Some(t) => (1..=t.overtone_count)
            .map(|m| {
                let (s, c) = draw.overtone_phase(m).sin_cos();
                (t.weight(m), (c, s))
            })
            .unzip(),
        None => (vec![1.0], vec![(1.0, 0.0)]),
    };
    for (i, y) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let phi = phase_at(f0, 0.0, i, sr) + vibrato_excursion(vib.rate, vib.depth, vib.phase, t);
        let (s1, c1) = phi.sin_cos();
        // z = e^{i m phi}, built up by repeated multiplication
        let (mut zr, mut zi) = (c1, s1);
        let mut acc = 0.0;
        for (w, &(oc, os)) in weights.iter().zip(&offsets) {
            // Im(e^{i eta} z)
            acc += w * (os * zr + oc * zi);
            let r = zr * c1 - zi * s1;
            let im = zr * s1 + zi * c1;
            zr = r;
            zi = im;
        }
        *y += acc;
    }
}

/// Adds source `draw` of `spec` into `out` (length `spec.len()`).
pub fn render_source(spec: &EnsembleSpec, draw: &SourceDraw, out: &mut [f64]) {
    if draw.vibrato.is_some() {
        add_vibrato_source(spec, draw, out);
    } else {
        let mut partials = Vec::new();
        stationary_partials(spec, draw, &mut partials);
        render_partials(&partials, spec.sample_rate, out);
    }
}

fn render_ensemble(spec: &EnsembleSpec) -> Result<TimeSeries, SynthError> {
    spec.validate()?;
    let mut out = TimeSeries::zeros(spec.len(), spec.sample_rate)?;
    let draws: Vec<SourceDraw> = (0..spec.source_count)
        .map(|s| draw_source(spec, s))
        .collect();
    if spec.vibrato.is_some() {
        for d in &draws {
            add_vibrato_source(spec, d, out.samples_mut());
        }
    } else {
        let mut partials = Vec::new();
        for d in &draws {
            stationary_partials(spec, d, &mut partials);
        }
        render_partials(&partials, spec.sample_rate, out.samples_mut());
    }
    Ok(out)
}

/// Unison of `N` detuned sources sharing one overtone stack.
pub fn synth_unison_timbre(spec: &EnsembleSpec) -> Result<TimeSeries, SynthError> {
    if spec.timbre.is_none() {
        return Err(invalid("timbre", "timbre unison needs a timbre"));
    }
    if spec.vibrato.is_some() {
        return Err(invalid(
            "vibrato",
            "use synth_unison_timbre_vibrato for vibrato",
        ));
    }
    render_ensemble(spec)
}

/// Unison of `N` pure tones, each with its own vibrato.
pub fn synth_unison_vibrato(spec: &EnsembleSpec) -> Result<TimeSeries, SynthError> {
    if spec.vibrato.is_none() {
        return Err(invalid("vibrato", "vibrato unison needs a vibrato"));
    }
    if spec.timbre.is_some() {
        return Err(invalid(
            "timbre",
            "use synth_unison_timbre_vibrato for timbre",
        ));
    }
    render_ensemble(spec)
}

/// Unison where each source's overtone stack follows its vibrato phase.
pub fn synth_unison_timbre_vibrato(spec: &EnsembleSpec) -> Result<TimeSeries, SynthError> {
    if spec.timbre.is_none() || spec.vibrato.is_none() {
        return Err(invalid(
            "timbre",
            "combined unison needs both timbre and vibrato",
        ));
    }
    render_ensemble(spec)
}
