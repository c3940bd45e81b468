//! Synthesis and squared-signal spectral analysis of beating ensembles.
//!
//! Generators in [`synth`] produce unisons, melodies, resonating strings and
//! infrared-divergent ensembles; [`spectral`] measures the low-frequency
//! power law in the periodogram of the squared signal; [`audio_io`] reads
//! and writes WAV files; [`experiments`] holds the preset registry and run
//! harness used by the `ubr` command-line tool.

pub mod audio_io;
pub mod experiments;
pub mod signal;
pub mod spectral;
pub mod stochastics;
pub mod synth;

pub use signal::TimeSeries;
