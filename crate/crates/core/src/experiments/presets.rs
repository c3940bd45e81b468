//! Built-in experiments `fig1a` .. `fig6c`.

use super::config::{
    AnalysisSection, ExperimentConfig, GeneratorKind, GeneratorSection, MelodySection, RunSection,
    SegmentSection, DEFAULT_REPETITIONS, DEFAULT_SAMPLE_RATE,
};
use super::ExperimentError;
use crate::stochastics::IrDivergentSpec;
use crate::synth::{ResonanceSpec, TimbreSpec, VibratoSpec, NOTE_LA};

pub struct Preset {
    pub id: &'static str,
    pub title: &'static str,
    /// Parameter list in its original notation.
    pub parameters: &'static str,
    /// Choices made where the parameter list is silent or ambiguous.
    pub notes: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

/// Solfège tokens of the sixteen-note melody.
pub const MELODY: [&str; 16] = [
    "re", "mi", "fa", "re", "re", "do", "♮si", "la", "♯so", "la", "♮si", "la", "so", "♯fa", "mi",
    "re",
];

fn base(name: &str, kind: GeneratorKind) -> ExperimentConfig {
    ExperimentConfig {
        experiment: RunSection {
            name: name.to_owned(),
            seed: 0,
            repetitions: DEFAULT_REPETITIONS,
            out_dir: None,
            emit_wav: false,
        },
        generator: GeneratorSection {
            kind,
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
        wav: None,
        analysis: AnalysisSection::default(),
    }
}

fn unison(name: &str, kind: GeneratorKind, n: u32, xi: f64, tau: f64) -> ExperimentConfig {
    let mut c = base(name, kind);
    c.generator.fiducial_freq = Some(440.0);
    c.generator.source_count = Some(n);
    c.generator.detune_halfwidth = Some(xi);
    c.generator.duration = Some(tau);
    c
}

fn timbre(n: u32) -> ExperimentConfig {
    let mut c = unison(
        &format!("timbre-n{n}"),
        GeneratorKind::TimbreUnison,
        n,
        3.0,
        10.0,
    );
    c.timbre = Some(TimbreSpec::new(30, -0.7));
    c
}

const VIBRATO: VibratoSpec = VibratoSpec {
    base_depth: 2.0,
    depth_jitter: 1.0,
    rate_lo: -1.0,
    rate_hi: 10.0,
};

fn vibrato(n: u32) -> ExperimentConfig {
    let mut c = unison(
        &format!("vibrato-n{n}"),
        GeneratorKind::VibratoUnison,
        n,
        6.0,
        10.0,
    );
    c.vibrato = Some(VIBRATO);
    c
}

fn combined(n: u32, m: u32, xi: f64, tau: f64) -> ExperimentConfig {
    let mut c = unison("combined", GeneratorKind::Combined, n, xi, tau);
    c.timbre = Some(TimbreSpec::new(m, -0.7));
    c.vibrato = Some(VIBRATO);
    c
}

fn melody(overlap: f64) -> ExperimentConfig {
    let mut c = base("melody", GeneratorKind::Melody);
    c.timbre = Some(TimbreSpec::new(10, -0.7));
    c.melody = Some(MelodySection {
        notes: MELODY.iter().map(|s| s.to_string()).collect(),
        note_duration: 1.0,
        overlap_fraction: overlap,
        reference_pitch: NOTE_LA,
        detune_halfwidth: 3.0,
        solfege: None,
    });
    c
}

fn resonance(xi: f64, overtones: Option<u32>, mu: f64) -> ExperimentConfig {
    let mut c = unison("resonance", GeneratorKind::Resonance, 10, xi, 10.0);
    c.timbre = overtones.map(|m| TimbreSpec::new(m, -0.7));
    c.resonance = Some(ResonanceSpec {
        coupling: 10.0,
        dissipation: mu,
        singularity_tolerance: None,
    });
    c
}

fn ir_ensemble() -> ExperimentConfig {
    let mut c = base("ir", GeneratorKind::IrEnsemble);
    c.generator.fiducial_freq = Some(4400.0);
    c.generator.source_count = Some(300);
    c.generator.duration = Some(10.0);
    c.ir = Some(IrDivergentSpec::new(1e-5, 3000.0).expect("valid constants"));
    c
}

fn ir_segments(overlap: f64) -> ExperimentConfig {
    let mut c = base("ir-segments", GeneratorKind::Segments);
    c.generator.fiducial_freq = Some(4400.0);
    c.generator.source_count = Some(4096);
    c.generator.duration = Some(1.0);
    c.ir = Some(IrDivergentSpec::new(1e-5, 12400.0).expect("valid constants"));
    c.segments = Some(SegmentSection {
        count: 100,
        overlap_fraction: overlap,
    });
    c
}

const VIBRATO_NOTE: &str = "Vibrato depth b = 2 + U(-1, 1) Hz and rate theta ~ U(-1, 10) Hz \
     per source, the same range for the solo and ensemble presets.";

const COMBINED_NOTE: &str = "The parameter list gives no vibrato values; the vibrato of the \
     vibrato-unison presets is reused (b = 2 + U(-1, 1) Hz, theta ~ U(-1, 10) Hz).";

const MELODY_NOTE: &str = "Each note: single source, pitch 440 * 2^(k/12) from the fixed-do \
     table plus its own detune in [-3, 3] Hz.";

pub static PRESETS: [Preset; 18] = [
    Preset {
        id: "fig1a",
        title: "timbre, solo",
        parameters: "ω=440, −3<ξ(random)<3, β=−0.7, τ=10, M=30, N=1",
        notes: "",
        build: || named("fig1a", timbre(1)),
    },
    Preset {
        id: "fig1b",
        title: "timbre, quintet",
        parameters: "ω=440, −3<ξ(random)<3, β=−0.7, τ=10, M=30, N=5",
        notes: "",
        build: || named("fig1b", timbre(5)),
    },
    Preset {
        id: "fig1c",
        title: "timbre, 10 sources",
        parameters: "ω=440, −3<ξ(random)<3, β=−0.7, τ=10, M=30, N=10",
        notes: "",
        build: || named("fig1c", timbre(10)),
    },
    Preset {
        id: "fig2a",
        title: "vibrato, solo",
        parameters: "ω=440, b=2+(−1<random<1), −1<θ(random)<10, −6<ξ(random)<6, τ=10, N=1",
        notes: VIBRATO_NOTE,
        build: || named("fig2a", vibrato(1)),
    },
    Preset {
        id: "fig2b",
        title: "vibrato, quintet",
        parameters: "ω=440, b=2+(−1<random<1), −1<θ(random)<10, −6<ξ(random)<6, τ=10, N=5",
        notes: VIBRATO_NOTE,
        build: || named("fig2b", vibrato(5)),
    },
    Preset {
        id: "fig2c",
        title: "vibrato, 10 sources",
        parameters: "ω=440, b=2+(−1<random<1), −1<θ(random)<10, −6<ξ(random)<6, τ=10, N=10",
        notes: VIBRATO_NOTE,
        build: || named("fig2c", vibrato(10)),
    },
    Preset {
        id: "fig3a",
        title: "timbre and vibrato, 5 sources",
        parameters: "ω=440, −1<ξ(random)<1, β=−0.7, τ=10, M=5, N=5",
        notes: COMBINED_NOTE,
        build: || named("fig3a", combined(5, 5, 1.0, 10.0)),
    },
    Preset {
        id: "fig3b",
        title: "timbre and vibrato, 10 sources",
        parameters: "ω=440, −1<ξ(random)<1, β=−0.7, τ=10, M=10, N=10",
        notes: "M=10 here against M=5 in fig3a, followed as listed. Vibrato as in fig3a.",
        build: || named("fig3b", combined(10, 10, 1.0, 10.0)),
    },
    Preset {
        id: "fig3c",
        title: "timbre and vibrato, 10 sources, 100 s",
        parameters: "ω=440, −0.1<ξ(random)<0.1, β=−0.7, τ=100, M=10, N=10",
        notes: "Fit band widened to [0.01, 100] Hz to follow the power law to the lowest \
                decade. Vibrato as in fig3a.",
        build: || {
            let mut c = named("fig3c", combined(10, 10, 0.1, 100.0));
            c.analysis.band = Some([0.01, 100.0]);
            c
        },
    },
    Preset {
        id: "fig4a",
        title: "melody, no overlap",
        parameters: "re-mi-fa-re-re-do-♮si-la-♯so-la-♮si-la-so-♯fa-mi-re; \
                     ω=440, −3<ξ(random)<3, β=−0.7, τ=1, M=10, N=1",
        notes: MELODY_NOTE,
        build: || named("fig4a", melody(0.0)),
    },
    Preset {
        id: "fig4b",
        title: "melody, 1% overlap",
        parameters: "as fig4a, each note overlapping its neighbour by 1%",
        notes: MELODY_NOTE,
        build: || named("fig4b", melody(0.01)),
    },
    Preset {
        id: "fig4c",
        title: "melody, 10% overlap",
        parameters: "as fig4a, each note overlapping its neighbour by 10%",
        notes: MELODY_NOTE,
        build: || named("fig4c", melody(0.1)),
    },
    Preset {
        id: "fig5a",
        title: "resonance",
        parameters: "ω=440, λ=10, ξ∈[−10,10], N=10, τ=10",
        notes: "Detunes closer than the singularity tolerance to the pole are redrawn.",
        build: || named("fig5a", resonance(10.0, None, 0.0)),
    },
    Preset {
        id: "fig5b",
        title: "resonance with timbre",
        parameters: "ω=440, λ=10, ξ∈[−3,3], N=10, M=5, τ=10, β=−0.7",
        notes: "Detunes closer than the singularity tolerance to the pole are redrawn.",
        build: || named("fig5b", resonance(3.0, Some(5), 0.0)),
    },
    Preset {
        id: "fig5c",
        title: "resonance with timbre and dissipation",
        parameters: "ω=440, λ=10, ξ∈[−3,3], N=10, M=5, τ=10, β=−0.7, μ=10",
        notes: "Dissipation keeps the denominator finite, so no detune is redrawn.",
        build: || named("fig5c", resonance(3.0, Some(5), 10.0)),
    },
    Preset {
        id: "fig6a",
        title: "infrared-divergent ensemble",
        parameters: "ω=4400, −3000<ξ(random)<3000, τ=10, N=300, ε=10⁻⁵",
        notes: "kappa magnitude from the 1/(kappa+eps) law up to 3000 Hz, random sign.",
        build: || named("fig6a", ir_ensemble()),
    },
    Preset {
        id: "fig6b",
        title: "100 independent 1 s infrared-divergent segments",
        parameters: "ω=4400, −12400<κ(IR-div)<12400, τ=1, N=4096, ε=10⁻⁵; 100 segments",
        notes: "Segment k seeded independently; joined end to end.",
        build: || named("fig6b", ir_segments(0.0)),
    },
    Preset {
        id: "fig6c",
        title: "as fig6b with 50% segment overlap",
        parameters: "as fig6b, adjacent segments 50% superposed",
        notes: "Segment k seeded independently; overlapping regions summed.",
        build: || named("fig6c", ir_segments(0.5)),
    },
];

fn named(id: &str, mut c: ExperimentConfig) -> ExperimentConfig {
    c.experiment.name = id.to_owned();
    c
}

pub fn find_preset(id: &str) -> Result<&'static Preset, ExperimentError> {
    PRESETS
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| ExperimentError::UnknownPreset(id.to_owned()))
}

/// Configuration of preset `id` with the given master seed.
pub fn preset_config(id: &str, seed: u64) -> Result<ExperimentConfig, ExperimentError> {
    let mut c = find_preset(id)?.config();
    c.experiment.seed = seed;
    Ok(c)
}
