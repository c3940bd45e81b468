use super::bank::{render_partials, Partial};
use super::placement::validate_overlap;
use super::{concat_segments, invalid, EnsembleSpec, SynthError};
use crate::signal::TimeSeries;
use crate::stochastics::{self, sample_ir_divergent, IrDivergentSpec};

/// `sum_N sin(2 pi t (omega + kappa) + eta)` with `kappa` drawn from the
/// infrared-divergent distribution. The detune half-width of `spec` is
/// unused; `kappa_max` bounds the spread.
pub fn synth_ir_ensemble(
    spec: &EnsembleSpec,
    ir: &IrDivergentSpec,
) -> Result<TimeSeries, SynthError> {
    validate_ir_ensemble(spec, ir)?;

    let partials = (0..spec.source_count)
        .map(|s| {
            let mut stream = spec.seed.child("source", s as u64).stream();
            let kappa = sample_ir_divergent(ir, &mut stream)?;
            let eta = stochastics::phase(&mut stream);
            Ok(Partial {
                freq: spec.fiducial_freq + kappa,
                phase: eta,
                amp: 1.0,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let mut out = TimeSeries::zeros(spec.len(), spec.sample_rate)?;
    render_partials(&partials, spec.sample_rate, out.samples_mut());
    Ok(out)
}

pub fn validate_ir_ensemble(spec: &EnsembleSpec, ir: &IrDivergentSpec) -> Result<(), SynthError> {
    spec.validate_basic()?;
    ir.validate()?;
    if spec.timbre.is_some() || spec.vibrato.is_some() {
        return Err(invalid(
            "timbre",
            "IR-divergent ensemble takes pure tones only",
        ));
    }
    super::check_nyquist(spec.fiducial_freq + ir.kappa_max, 1, spec.sample_rate)
}

/// `count` independent IR ensembles of `spec.duration` each, segment `k`
/// seeded from `spec.seed.child("segment", k)`, joined with overlap.
pub fn synth_ir_segments(
    spec: &EnsembleSpec,
    ir: &IrDivergentSpec,
    count: usize,
    overlap_fraction: f64,
) -> Result<TimeSeries, SynthError> {
    if count == 0 {
        return Err(invalid("segment_count", "must be at least 1"));
    }
    validate_overlap(overlap_fraction)?;
    let segments = (0..count)
        .map(|k| {
            let mut seg = spec.clone();
            seg.seed = spec.seed.child("segment", k as u64);
            synth_ir_ensemble(&seg, ir)
        })
        .collect::<Result<Vec<_>, _>>()?;
    concat_segments(&segments, overlap_fraction)
}
