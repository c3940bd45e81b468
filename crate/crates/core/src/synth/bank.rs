//! Fixed-frequency sinusoid bank.
//!
//! Sums `amp * sin(2 pi f t + phase)` over many partials. Each partial runs
//! 32 consecutive samples at once: lane `l` holds `e^{i(phi + l w)}` and
//! every lane advances by `e^{32iw}`. Lanes are re-anchored from an exactly
//! reduced phase at every block start, so drift never exceeds one block's
//! worth of rounding. Partials are added to the output in order and the
//! arithmetic is fixed, so the result is bit-identical whichever instruction
//! set the kernel is compiled for.

use std::f64::consts::TAU;

const LANES: usize = 32;
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partial {
    pub freq: f64,
    pub phase: f64,
    pub amp: f64,
}

/// `2 pi (freq * index / sample_rate) + phase`, with the cycle count reduced
/// modulo one before scaling so long signals keep full phase precision.
pub fn phase_at(freq: f64, phase: f64, index: usize, sample_rate: f64) -> f64 {
    let i = index as f64;
    let product = freq * i;
    let rounding = freq.mul_add(i, -product);
    let cycles = ((product % sample_rate) + rounding) / sample_rate;
    TAU * (cycles - cycles.floor()) + phase
}

/// Adds the bank's output to `out`, whose index 0 sits at `t = 0`.
pub fn render_partials(partials: &[Partial], sample_rate: f64, out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            unsafe { render_avx512(partials, sample_rate, out) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            unsafe { render_avx2(partials, sample_rate, out) };
            return;
        }
    }
    render_generic(partials, sample_rate, out);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn render_avx2(partials: &[Partial], sample_rate: f64, out: &mut [f64]) {
    render_generic(partials, sample_rate, out);
}

/// `e^{i 2 pi freq k / sample_rate}` for an integer `k`, reduced exactly.
fn rotation(freq: f64, k: usize, sample_rate: f64) -> (f64, f64) {
    let (s, c) = phase_at(freq, 0.0, k, sample_rate).sin_cos();
    (c, s)
}

struct Oscillator {
    amp: f64,
    /// `e^{i l w}` for each lane.
    lane_re: [f64; LANES],
    lane_im: [f64; LANES],
    /// `e^{i LANES w}`.
    step_re: f64,
    step_im: f64,
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn render_avx512(partials: &[Partial], sample_rate: f64, out: &mut [f64]) {
    render_generic(partials, sample_rate, out);
}

#[inline(always)]
fn render_generic(partials: &[Partial], sample_rate: f64, out: &mut [f64]) {
    let oscillators: Vec<Oscillator> = partials
        .iter()
        .map(|p| {
            let mut lane_re = [0.0; LANES];
            let mut lane_im = [0.0; LANES];
            for l in 0..LANES {
                (lane_re[l], lane_im[l]) = rotation(p.freq, l, sample_rate);
            }
            let (step_re, step_im) = rotation(p.freq, LANES, sample_rate);
            Oscillator {
                amp: p.amp,
                lane_re,
                lane_im,
                step_re,
                step_im,
            }
        })
        .collect();

    let mut start = 0;
    while start < out.len() {
        let end = (start + BLOCK).min(out.len());
        let block = &mut out[start..end];
        for (p, osc) in partials.iter().zip(&oscillators) {
            let (s0, c0) = phase_at(p.freq, p.phase, start, sample_rate).sin_cos();
            let mut re = [0.0f64; LANES];
            let mut im = [0.0f64; LANES];
            for l in 0..LANES {
                re[l] = c0 * osc.lane_re[l] - s0 * osc.lane_im[l];
                im[l] = c0 * osc.lane_im[l] + s0 * osc.lane_re[l];
            }
            let (cr, ci, amp) = (osc.step_re, osc.step_im, osc.amp);
            let mut chunks = block.chunks_exact_mut(LANES);
            for y in &mut chunks {
                for l in 0..LANES {
                    y[l] += amp * im[l];
                }
                for l in 0..LANES {
                    let r = re[l] * cr - im[l] * ci;
                    let i = re[l] * ci + im[l] * cr;
                    re[l] = r;
                    im[l] = i;
                }
            }
            for (y, v) in chunks.into_remainder().iter_mut().zip(im) {
                *y += amp * v;
            }
        }
        start = end;
    }
}
