//! Uniformly sampled real signals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("a time series needs at least one sample")]
    Empty,
}

/// Amplitude samples taken at a fixed rate. Duration is `len / sample_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::BadSampleRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        Ok(TimeSeries {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self, SignalError> {
        Self::new(vec![0.0; len], sample_rate)
    }

    /// Samples `f(t)` at `t = i / sample_rate` for `i in 0..len`.
    pub fn from_fn(
        len: usize,
        sample_rate: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, SignalError> {
        let samples = (0..len).map(|i| f(i as f64 / sample_rate)).collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false for a constructed series; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            samples: self.samples.iter().map(|&x| f(x)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Number of samples covering `seconds` at `sample_rate`, rounded to nearest.
pub fn sample_count(seconds: f64, sample_rate: f64) -> usize {
    (seconds * sample_rate).round().max(0.0) as usize
}
