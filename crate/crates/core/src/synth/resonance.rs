//! A string driving a resonating body.
//!
//! Each source contributes a forced response at the string frequency and a
//! free oscillation at its own detuned frequency:
//!
//! ```text
//! sum_m m^beta sum_xi [ lambda sin(2 pi m omega t) / D_m(xi) + sin(2 pi m (omega + xi) t + eta) ]
//! D_m(xi) = (m (omega + xi))^2 - (m omega)^2                       (mu = 0)
//! D_m(xi) = sqrt(((m (omega + xi))^2 - (m omega)^2)^2 + 4 mu^2 (m omega)^2)
//! ```
//!
//! Without a timbre only `m = 1` is present with unit weight. The free term
//! carries the source phase `eta`; the forced term is phase-locked to the
//! string.

use serde::{Deserialize, Serialize};

use super::bank::{render_partials, Partial};
use super::{invalid, EnsembleSpec, SynthError};
use crate::signal::TimeSeries;
use crate::stochastics::{self, uniform};

const MAX_RESAMPLES: usize = 100;
/// Minimum accepted `|(omega + xi)^2 - omega^2| / omega^2` without dissipation.
const RELATIVE_DENOMINATOR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSpec {
    /// Coupling `lambda`.
    pub coupling: f64,
    /// Dissipation `mu` (>= 0).
    #[serde(default)]
    pub dissipation: f64,
    /// Minimum accepted `|xi|` (Hz) when `mu = 0`; defaults from the fiducial pitch.
    #[serde(default)]
    pub singularity_tolerance: Option<f64>,
}

/// Smallest `|xi|` keeping `|(omega + xi)^2 - omega^2| >= 1e-3 omega^2` for
/// either sign of `xi`.
pub fn default_singularity_tolerance(fiducial_freq: f64) -> f64 {
    fiducial_freq * (1.0 - (1.0 - RELATIVE_DENOMINATOR_FLOOR).sqrt())
}

impl ResonanceSpec {
    pub fn tolerance(&self, fiducial_freq: f64) -> f64 {
        self.singularity_tolerance
            .unwrap_or_else(|| default_singularity_tolerance(fiducial_freq))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !self.coupling.is_finite() {
            return Err(invalid("coupling", "must be finite"));
        }
        if !(self.dissipation.is_finite() && self.dissipation >= 0.0) {
            return Err(invalid("dissipation", "must be finite and >= 0"));
        }
        if let Some(tol) = self.singularity_tolerance {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(invalid("singularity_tolerance", "must be positive"));
            }
        }
        Ok(())
    }

    fn needs_guard(&self) -> bool {
        self.dissipation == 0.0 && self.coupling != 0.0
    }
}

fn denominator(res: &ResonanceSpec, m: f64, omega: f64, xi: f64) -> f64 {
    let driven = m * omega;
    let d = (m * (omega + xi)).powi(2) - driven.powi(2);
    if res.dissipation == 0.0 {
        d
    } else {
        (d * d + 4.0 * res.dissipation.powi(2) * driven.powi(2)).sqrt()
    }
}

/// Draws `(xi, eta)` for one source, redrawing `xi` near the resonance pole.
fn draw(spec: &EnsembleSpec, res: &ResonanceSpec, index: u32) -> Result<(f64, f64), SynthError> {
    let mut stream = spec.seed.child("source", index as u64).stream();
    let h = spec.detune_halfwidth;
    let tol = res.tolerance(spec.fiducial_freq);
    let mut xi = uniform(-h, h, &mut stream);
    if res.needs_guard() {
        let mut tries = 1;
        while xi.abs() < tol {
            if tries > MAX_RESAMPLES {
                return Err(SynthError::Degenerate(format!(
                    "source {index}: no detune with |xi| >= {tol} Hz after {MAX_RESAMPLES} redraws \
                     (half-width {h} Hz)"
                )));
            }
            xi = uniform(-h, h, &mut stream);
            tries += 1;
        }
    }
    let eta = stochastics::phase(&mut stream);
    Ok((xi, eta))
}

pub fn synth_resonance(spec: &EnsembleSpec, res: &ResonanceSpec) -> Result<TimeSeries, SynthError> {
    spec.validate()?;
    res.validate()?;
    if spec.vibrato.is_some() {
        return Err(invalid("vibrato", "resonance generator takes no vibrato"));
    }
    let overtones = spec.overtone_count();
    let weight = |m: u32| spec.timbre.map_or(1.0, |t| t.weight(m));
    let omega = spec.fiducial_freq;

    let mut forced = vec![0.0; overtones as usize];
    let mut partials = Vec::with_capacity((spec.source_count * (overtones + 1)) as usize);
    for s in 0..spec.source_count {
        let (xi, eta) = draw(spec, res, s)?;
        for m in 1..=overtones {
            let mf = m as f64;
            partials.push(Partial {
                freq: mf * (omega + xi),
                phase: eta,
                amp: weight(m),
            });
            if res.coupling != 0.0 {
                forced[m as usize - 1] += res.coupling / denominator(res, mf, omega, xi);
            }
        }
    }
    partials.extend((1..=overtones).map(|m| Partial {
        freq: m as f64 * omega,
        phase: 0.0,
        amp: weight(m) * forced[m as usize - 1],
    }));

    let mut out = TimeSeries::zeros(spec.len(), spec.sample_rate)?;
    render_partials(&partials, spec.sample_rate, out.samples_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::SeedTree;
    use crate::synth::{synth_unison_timbre, TimbreSpec};

    fn spec(h: f64, timbre: Option<TimbreSpec>) -> EnsembleSpec {
        EnsembleSpec {
            fiducial_freq: 440.0,
            source_count: 10,
            detune_halfwidth: h,
            duration: 0.25,
            sample_rate: 44100.0,
            timbre,
            vibrato: None,
            seed: SeedTree::new(8),
        }
    }

    #[test]
    fn zero_coupling_is_plain_unison() {
        let res = ResonanceSpec {
            coupling: 0.0,
            dissipation: 0.0,
            singularity_tolerance: None,
        };
        let timbre = TimbreSpec::new(1, -0.7);
        let a = synth_resonance(&spec(10.0, None), &res).unwrap();
        let b = synth_unison_timbre(&spec(10.0, Some(timbre))).unwrap();
        assert_eq!(a.samples(), b.samples());

        let timbre5 = TimbreSpec::new(5, -0.7);
        let a = synth_resonance(&spec(3.0, Some(timbre5)), &res).unwrap();
        let b = synth_unison_timbre(&spec(3.0, Some(timbre5))).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn default_tolerance_bounds_denominator() {
        let w = 440.0;
        let tol = default_singularity_tolerance(w);
        for xi in [tol, -tol] {
            let d = ((w + xi) * (w + xi) - w * w).abs();
            assert!(d >= 1e-3 * w * w * (1.0 - 1e-12), "{xi}: {d}");
        }
    }

    #[test]
    fn dissipative_denominator_is_finite_at_zero_detune() {
        let res = ResonanceSpec {
            coupling: 10.0,
            dissipation: 10.0,
            singularity_tolerance: None,
        };
        for m in 1..=5 {
            let mw = m as f64 * 440.0;
            let d = denominator(&res, m as f64, 440.0, 0.0);
            assert_eq!(d, 2.0 * 10.0 * mw);
            assert!((10.0 / d).is_finite());
        }
        let mut s = spec(0.0, Some(TimbreSpec::new(5, -0.7)));
        s.detune_halfwidth = 0.0;
        let out = synth_resonance(&s, &res).unwrap();
        assert!(out.samples().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn undamped_draws_avoid_pole() {
        let res = ResonanceSpec {
            coupling: 10.0,
            dissipation: 0.0,
            singularity_tolerance: Some(2.0),
        };
        let s = spec(3.0, None);
        for k in 0..s.source_count {
            let (xi, _) = draw(&s, &res, k).unwrap();
            assert!(xi.abs() >= 2.0);
        }
    }

    #[test]
    fn exhausted_resampling_is_degenerate() {
        let res = ResonanceSpec {
            coupling: 10.0,
            dissipation: 0.0,
            singularity_tolerance: None,
        };
        let err = synth_resonance(&spec(0.01, None), &res);
        assert!(matches!(err, Err(SynthError::Degenerate(_))));
    }

    #[test]
    fn forced_amplitude_matches_formula() {
        // one source, no timbre: the omega line carries lambda / ((w+xi)^2 - w^2)
        let res = ResonanceSpec {
            coupling: 10.0,
            dissipation: 0.0,
            singularity_tolerance: None,
        };
        let mut s = spec(10.0, None);
        s.source_count = 1;
        let out = synth_resonance(&s, &res).unwrap();
        let (xi, eta) = draw(&s, &res, 0).unwrap();
        let lam = 10.0 / ((440.0 + xi).powi(2) - 440.0f64.powi(2));
        for (i, y) in out.samples().iter().enumerate().step_by(131) {
            let t = i as f64 / 44100.0;
            let want = lam * (std::f64::consts::TAU * 440.0 * t).sin()
                + (std::f64::consts::TAU * (440.0 + xi) * t + eta).sin();
            assert!((y - want).abs() < 1e-11);
        }
    }
}
