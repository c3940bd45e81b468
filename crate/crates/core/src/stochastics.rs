//! Seedable randomness for every generator.
//!
//! A [`SeedTree`] names a stream by its master seed plus a derivation path
//! of `(tag, index)` pairs. The path is hashed with SHA-256 into a 256-bit
//! ChaCha20 key, so sibling paths get unrelated keys and the same path
//! always replays the same draws on any machine.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Recorded in output metadata so a run can be replayed elsewhere.
pub const GENERATOR_NAME: &str = "ChaCha20 (rand_chacha 0.3), key = SHA-256(master_seed, path)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticsError {
    #[error("invalid IR-divergent spec: {0}")]
    InvalidIrSpec(String),
}

/// Position in the tree of derived random streams.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTree {
    master_seed: u64,
    path: Vec<(String, u64)>,
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        SeedTree {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    /// Derives a child node; the parent is left untouched.
    pub fn child(&self, tag: &str, index: u64) -> SeedTree {
        let mut path = self.path.clone();
        path.push((tag.to_owned(), index));
        SeedTree {
            master_seed: self.master_seed,
            path,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"ubr-seed-tree/v1");
        hasher.update(self.master_seed.to_le_bytes());
        for (tag, index) in &self.path {
            // length prefix keeps ("ab", 1) distinct from ("a", ..) + "b"...
            hasher.update((tag.len() as u64).to_le_bytes());
            hasher.update(tag.as_bytes());
            hasher.update(index.to_le_bytes());
        }
        hasher.finalize().into()
    }

    /// Opens a fresh stream positioned at the first draw of this node.
    pub fn stream(&self) -> Stream {
        Stream {
            rng: ChaCha20Rng::from_seed(self.key()),
        }
    }
}

/// A live random stream owned by exactly one consumer.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha20Rng,
}

impl Stream {
    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn coin(&mut self) -> bool {
        self.rng.gen::<bool>()
    }
}

/// Uniform draw on `[range_lo, range_hi]`. Equal bounds return the bound
/// without consuming a draw.
pub fn uniform(range_lo: f64, range_hi: f64, stream: &mut Stream) -> f64 {
    debug_assert!(range_lo <= range_hi, "uniform: lo > hi");
    if range_lo == range_hi {
        return range_lo;
    }
    let u = stream.unit();
    (range_lo + (range_hi - range_lo) * u).clamp(range_lo, range_hi)
}

/// Uniform random phase on `[-pi, pi]`.
pub fn phase(stream: &mut Stream) -> f64 {
    uniform(-PI, PI, stream)
}

/// Detune distribution with density proportional to `1/(|kappa| + epsilon)`
/// on `(0, kappa_max]`, optionally mirrored to negative values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrDivergentSpec {
    /// Infrared cutoff, Hz.
    pub epsilon: f64,
    /// Truncation bound on `|kappa|`, Hz.
    pub kappa_max: f64,
    #[serde(default = "default_symmetric")]
    pub symmetric: bool,
}

fn default_symmetric() -> bool {
    true
}

impl IrDivergentSpec {
    pub fn new(epsilon: f64, kappa_max: f64) -> Result<Self, StochasticsError> {
        let spec = IrDivergentSpec {
            epsilon,
            kappa_max,
            symmetric: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), StochasticsError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(StochasticsError::InvalidIrSpec(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.kappa_max.is_finite() && self.kappa_max > self.epsilon) {
            return Err(StochasticsError::InvalidIrSpec(format!(
                "kappa_max ({}) must be finite and exceed epsilon ({})",
                self.kappa_max, self.epsilon
            )));
        }
        Ok(())
    }

    /// Upper end of the uniform variable fed to the inverse CDF:
    /// `ln(1 + kappa_max/epsilon)`.
    pub fn uniform_upper(&self) -> f64 {
        (self.kappa_max / self.epsilon).ln_1p()
    }

    /// Inverse CDF `epsilon * (e^x - 1)`.
    pub fn inverse_cdf(&self, x: f64) -> f64 {
        self.epsilon * x.exp_m1()
    }

    /// `P(|kappa| <= k)` for the truncated magnitude distribution.
    pub fn magnitude_cdf(&self, k: f64) -> f64 {
        if k <= 0.0 {
            return 0.0;
        }
        if k >= self.kappa_max {
            return 1.0;
        }
        (k / self.epsilon).ln_1p() / self.uniform_upper()
    }
}

/// Draws one detune `kappa` (Hz).
pub fn sample_ir_divergent(
    spec: &IrDivergentSpec,
    stream: &mut Stream,
) -> Result<f64, StochasticsError> {
    spec.validate()?;
    let x = uniform(0.0, spec.uniform_upper(), stream);
    let magnitude = spec.inverse_cdf(x).min(spec.kappa_max);
    if spec.symmetric && stream.coin() {
        Ok(-magnitude)
    } else {
        Ok(magnitude)
    }
}
