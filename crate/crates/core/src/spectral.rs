//! Squared-amplitude periodogram and the low-frequency power-law measurements
//! built on it.
//!
//! The pipeline is `square_signal -> periodogram -> log_bin -> fit_power_law`,
//! plus [`ubr_ratio`] on the raw periodogram. Power is `|X_k|^2 / sum(w^2)`
//! (`|X_k|^2 / n` without a window); only slopes and ratios carry meaning.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::TimeSeries;

pub const MIN_PERIODOGRAM_LEN: usize = 16;
pub const DEFAULT_BINS_PER_DECADE: u32 = 20;
pub const MIN_BINS_PER_DECADE: u32 = 4;
pub const MIN_FIT_POINTS: usize = 8;
/// Upper edge of the default fit band, Hz.
pub const DEFAULT_FIT_HIGH: f64 = 100.0;
pub const DEFAULT_UBR_LOW: f64 = 0.1;
pub const DEFAULT_UBR_HIGH: f64 = 100.0;
/// Below this ratio the spectrum is reported as having no low-frequency excess.
pub const UBR_PRESENT_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("signal has {0} samples; the periodogram needs at least {MIN_PERIODOGRAM_LEN}")]
    TooShort(usize),
    #[error("bins_per_decade must be at least {MIN_BINS_PER_DECADE}, got {0}")]
    BinsPerDecade(u32),
    #[error("invalid fit band [{0}, {1}] Hz")]
    InvalidBand(f64, f64),
    #[error(
        "band [{f_lo}, {f_hi}] Hz holds {found} usable log-binned points; at least {MIN_FIT_POINTS} needed"
    )]
    InsufficientPoints { f_lo: f64, f_hi: f64, found: usize },
    #[error("no spectral power above {0} Hz")]
    NoPowerAbove(f64),
    #[error("ratio needs the raw periodogram, not a log-binned spectrum")]
    NotRaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    #[serde(alias = "rectangular")]
    None,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Option<Vec<f64>> {
        match self {
            Window::None => None,
            Window::Hann => Some(
                (0..n)
                    .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
                    .collect(),
            ),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "rect" | "rectangular" => Ok(Window::None),
            "hann" => Ok(Window::Hann),
            other => Err(format!("unknown window `{other}` (expected hann or none)")),
        }
    }
}

/// One-sided spectrum. Raw periodograms are uniformly spaced at
/// `bin_width = 1/tau` starting at the first nonzero bin; log-binned spectra
/// carry `bins_per_decade`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub normalization: String,
    pub dc_dropped: bool,
    pub window: Window,
    /// Spacing of the underlying DFT grid, Hz.
    pub bin_width: f64,
    pub bins_per_decade: Option<u32>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn is_binned(&self) -> bool {
        self.bins_per_decade.is_some()
    }

    /// Power of the bin whose frequency is closest to `f`.
    pub fn nearest(&self, f: f64) -> Option<(f64, f64)> {
        self.frequencies
            .iter()
            .zip(&self.power)
            .min_by(|a, b| (a.0 - f).abs().total_cmp(&(b.0 - f).abs()))
            .map(|(f, p)| (*f, *p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Slope of `log10 S` against `log10 f`.
    pub index: f64,
    pub log10_amplitude: f64,
    pub band: (f64, f64),
    pub r_squared: f64,
    pub bin_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UbrRatio {
    pub value: f64,
    pub low_power: f64,
    pub high_power: f64,
    /// Frequency of the bin actually used for the numerator, Hz.
    pub low_freq: f64,
    pub requested_low_freq: f64,
    pub high_threshold: f64,
    /// True when the spectrum could not resolve the requested low frequency
    /// and its lowest bin was used instead.
    pub low_bin_fallback: bool,
}

impl UbrRatio {
    pub fn indicates_ubr(&self) -> bool {
        self.value >= UBR_PRESENT_THRESHOLD
    }
}

/// `[max(2/tau, 0.05), 100]` Hz.
pub fn default_fit_band(duration: f64) -> (f64, f64) {
    ((2.0 / duration).max(0.05), DEFAULT_FIT_HIGH)
}

pub fn square_signal(signal: &TimeSeries) -> TimeSeries {
    signal.map(|x| x * x)
}

fn spectrum_of(signal: &TimeSeries, window: Window) -> Result<(Vec<f64>, f64), SpectralError> {
    let n = signal.len();
    if n < MIN_PERIODOGRAM_LEN {
        return Err(SpectralError::TooShort(n));
    }
    let coeffs = window.coefficients(n);
    let mut buf: Vec<Complex<f64>> = match &coeffs {
        None => signal
            .samples()
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .collect(),
        Some(w) => signal
            .samples()
            .iter()
            .zip(w)
            .map(|(&x, &w)| Complex::new(x * w, 0.0))
            .collect(),
    };
    let norm = coeffs.map_or(n as f64, |w| w.iter().map(|x| x * x).sum());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok((buf.iter().map(|c| c.norm_sqr()).collect(), norm))
}

/// `|X_k|^2 / n` for every `k in 0..n` (DC and negative frequencies kept).
pub fn two_sided_power(signal: &TimeSeries) -> Result<Vec<f64>, SpectralError> {
    let (sq, norm) = spectrum_of(signal, Window::None)?;
    Ok(sq.into_iter().map(|p| p / norm).collect())
}

pub fn periodogram(signal: &TimeSeries) -> Result<PowerSpectrum, SpectralError> {
    periodogram_windowed(signal, Window::None)
}

/// One-sided periodogram for `k = 1..=n/2`; the DC bin is dropped.
pub fn periodogram_windowed(
    signal: &TimeSeries,
    window: Window,
) -> Result<PowerSpectrum, SpectralError> {
    let n = signal.len();
    let (sq, norm) = spectrum_of(signal, window)?;
    let df = signal.sample_rate() / n as f64;
    let half = n / 2;
    Ok(PowerSpectrum {
        frequencies: (1..=half).map(|k| k as f64 * df).collect(),
        power: sq[1..=half].iter().map(|p| p / norm).collect(),
        normalization: match window {
            Window::None => "|X_k|^2/n".to_owned(),
            Window::Hann => "|X_k|^2/sum(w^2), Hann".to_owned(),
        },
        dc_dropped: true,
        window,
        bin_width: df,
        bins_per_decade: None,
    })
}

/// Groups points into `bins_per_decade` equal log-width bins. A bin's
/// frequency is the geometric mean of its members, its power their
/// arithmetic mean; empty bins do not appear.
pub fn log_bin(
    spectrum: &PowerSpectrum,
    bins_per_decade: u32,
) -> Result<PowerSpectrum, SpectralError> {
    if bins_per_decade < MIN_BINS_PER_DECADE {
        return Err(SpectralError::BinsPerDecade(bins_per_decade));
    }
    let bpd = bins_per_decade as f64;
    let mut frequencies = Vec::new();
    let mut power = Vec::new();
    let mut current: Option<i64> = None;
    let (mut log_sum, mut p_sum, mut count) = (0.0, 0.0, 0usize);
    let mut flush = |log_sum: f64, p_sum: f64, count: usize| {
        if count > 0 {
            frequencies.push(10f64.powf(log_sum / count as f64));
            power.push(p_sum / count as f64);
        }
    };
    for (&f, &p) in spectrum.frequencies.iter().zip(&spectrum.power) {
        if f <= 0.0 {
            continue;
        }
        let lf = f.log10();
        let idx = (lf * bpd).floor() as i64;
        if current != Some(idx) {
            flush(log_sum, p_sum, count);
            current = Some(idx);
            log_sum = 0.0;
            p_sum = 0.0;
            count = 0;
        }
        log_sum += lf;
        p_sum += p;
        count += 1;
    }
    flush(log_sum, p_sum, count);
    Ok(PowerSpectrum {
        frequencies,
        power,
        normalization: spectrum.normalization.clone(),
        dc_dropped: spectrum.dc_dropped,
        window: spectrum.window,
        bin_width: spectrum.bin_width,
        bins_per_decade: Some(bins_per_decade),
    })
}

/// Least-squares line through `(log10 f, log10 S)` over the log-binned
/// points inside `[f_lo, f_hi]`. Raw spectra are binned at the default
/// density first. Points with nonpositive power are skipped.
pub fn fit_power_law(
    spectrum: &PowerSpectrum,
    f_lo: f64,
    f_hi: f64,
) -> Result<PowerLawFit, SpectralError> {
    if !(f_lo.is_finite() && f_hi.is_finite() && f_lo > 0.0 && f_lo < f_hi) {
        return Err(SpectralError::InvalidBand(f_lo, f_hi));
    }
    let binned;
    let spectrum = if spectrum.is_binned() {
        spectrum
    } else {
        binned = log_bin(spectrum, DEFAULT_BINS_PER_DECADE)?;
        &binned
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.power)
        .filter(|(f, p)| **f >= f_lo && **f <= f_hi && **p > 0.0 && p.is_finite())
        .map(|(f, p)| (f.log10(), p.log10()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(SpectralError::InsufficientPoints {
            f_lo,
            f_hi,
            found: xs.len(),
        });
    }
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(PowerLawFit {
        index: slope,
        log10_amplitude: intercept,
        band: (f_lo, f_hi),
        r_squared,
        bin_count: xs.len(),
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r_squared)
}

/// Power at 0.1 Hz over the largest power above 100 Hz.
pub fn ubr_ratio(spectrum: &PowerSpectrum) -> Result<UbrRatio, SpectralError> {
    ubr_ratio_at(spectrum, DEFAULT_UBR_LOW, DEFAULT_UBR_HIGH)
}

pub fn ubr_ratio_at(
    spectrum: &PowerSpectrum,
    low_freq: f64,
    high_threshold: f64,
) -> Result<UbrRatio, SpectralError> {
    if spectrum.is_binned() {
        return Err(SpectralError::NotRaw);
    }
    let first = *spectrum
        .frequencies
        .first()
        .ok_or(SpectralError::NoPowerAbove(high_threshold))?;
    let low_bin_fallback = spectrum.bin_width > low_freq * (1.0 + 1e-9);
    let (used_freq, low_power) = if low_bin_fallback {
        (first, spectrum.power[0])
    } else {
        spectrum.nearest(low_freq).expect("nonempty spectrum")
    };
    let high = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.power)
        .filter(|(f, _)| **f > high_threshold)
        .map(|(_, p)| *p)
        .fold(f64::NAN, f64::max);
    if high.is_nan() || high <= 0.0 {
        return Err(SpectralError::NoPowerAbove(high_threshold));
    }
    Ok(UbrRatio {
        value: low_power / high,
        low_power,
        high_power: high,
        low_freq: used_freq,
        requested_low_freq: low_freq,
        high_threshold,
        low_bin_fallback,
    })
}

/// Event series with 1 at every sample whose sign differs from the previous
/// sample's (zero counts as positive) and 0 elsewhere.
pub fn zero_crossings(signal: &TimeSeries) -> TimeSeries {
    let x = signal.samples();
    let mut out = vec![0.0; x.len()];
    for i in 1..x.len() {
        if (x[i - 1] < 0.0) != (x[i] < 0.0) {
            out[i] = 1.0;
        }
    }
    TimeSeries::new(out, signal.sample_rate()).expect("same shape as a valid series")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, sr: f64, n: usize) -> TimeSeries {
        TimeSeries::from_fn(n, sr, |t| (TAU * f * t).sin()).unwrap()
    }

    fn synthetic(freqs: impl Iterator<Item = f64>, s: impl Fn(f64) -> f64) -> PowerSpectrum {
        let frequencies: Vec<f64> = freqs.collect();
        PowerSpectrum {
            power: frequencies.iter().map(|&f| s(f)).collect(),
            frequencies,
            normalization: "synthetic".into(),
            dc_dropped: true,
            window: Window::None,
            bin_width: 0.1,
            bins_per_decade: None,
        }
    }

    #[test]
    fn squaring() {
        let zeros = TimeSeries::zeros(32, 10.0).unwrap();
        assert_eq!(square_signal(&zeros), zeros);
        let twos = TimeSeries::new(vec![2.0; 32], 10.0).unwrap();
        assert!(square_signal(&twos).samples().iter().all(|x| *x == 4.0));
    }

    #[test]
    fn squared_sine_has_dc_and_double_frequency_only() {
        let sq = square_signal(&sine(440.0, 44100.0, 44100));
        let two = two_sided_power(&sq).unwrap();
        let total: f64 = two.iter().sum();
        let dc = two[0];
        let line = two[880] + two[44100 - 880];
        assert!((dc + line) / total > 1.0 - 1e-9);
    }

    #[test]
    fn bin_centred_sine_concentrates_power() {
        let ps = periodogram(&sine(440.0, 44100.0, 44100)).unwrap();
        let total: f64 = ps.power.iter().sum();
        let (f, p) = ps
            .frequencies
            .iter()
            .zip(&ps.power)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(*f, 440.0);
        assert!(p / total >= 0.999);
        assert!(ps.dc_dropped);
        assert_eq!(ps.len(), 22050);
    }

    #[test]
    fn parseval() {
        let x =
            TimeSeries::from_fn(1000, 100.0, |t| (3.1 * t).sin() + 0.3 * (t * t).cos()).unwrap();
        let energy: f64 = x.samples().iter().map(|v| v * v).sum();
        let spec: f64 = two_sided_power(&x).unwrap().iter().sum();
        assert!((energy - spec).abs() / energy < 1e-9);
    }

    #[test]
    fn too_short_rejected() {
        let x = TimeSeries::zeros(15, 100.0).unwrap();
        assert_eq!(periodogram(&x), Err(SpectralError::TooShort(15)));
    }

    #[test]
    fn flat_spectrum_bins_flat() {
        let s = synthetic((1..=5000).map(|k| k as f64 * 0.1), |_| 3.5);
        let b = log_bin(&s, 20).unwrap();
        assert!(b.power.iter().all(|p| (p - 3.5).abs() < 1e-12));
    }

    #[test]
    fn binned_inverse_law_tracks_centres() {
        let s = synthetic((1..=100_000).map(|k| k as f64 * 0.01), |f| 1.0 / f);
        let b = log_bin(&s, 20).unwrap();
        for (f, p) in b.frequencies.iter().zip(&b.power) {
            assert!((p * f - 1.0).abs() < 0.02, "f={f}: {p}");
        }
    }

    #[test]
    fn one_decade_yields_at_most_bpd_points() {
        let s = synthetic((10..=100).map(|k| k as f64 * 0.1), |_| 1.0);
        let decade = synthetic(s.frequencies.iter().copied().filter(|f| *f < 10.0), |_| 1.0);
        assert!(log_bin(&decade, 20).unwrap().len() <= 20);
        assert!(log_bin(&s, 3).is_err());
    }

    #[test]
    fn fit_recovers_exact_laws() {
        let s = synthetic((1..=441_000).map(|k| k as f64 * 0.1), |f| 1e3 / f);
        let fit = fit_power_law(&s, 0.2, 100.0).unwrap();
        assert!((fit.index + 1.0).abs() < 1e-3, "{}", fit.index);
        assert!(fit.r_squared > 0.9999);
        assert!(fit.bin_count >= 8);

        let flat = synthetic((1..=10_000).map(|k| k as f64 * 0.1), |_| 7.0);
        let fit = fit_power_law(&flat, 0.2, 100.0).unwrap();
        assert!(fit.index.abs() < 1e-3);
    }

    #[test]
    fn fit_band_errors() {
        let s = synthetic((1..=1000).map(|k| k as f64 * 0.1), |f| 1.0 / f);
        assert!(matches!(
            fit_power_law(&s, 5.0, 1.0),
            Err(SpectralError::InvalidBand(..))
        ));
        assert!(matches!(
            fit_power_law(&s, 1.0, 1.2),
            Err(SpectralError::InsufficientPoints { .. })
        ));
        let zeros = synthetic((1..=1000).map(|k| k as f64 * 0.1), |_| 0.0);
        assert!(matches!(
            fit_power_law(&zeros, 0.2, 100.0),
            Err(SpectralError::InsufficientPoints { found: 0, .. })
        ));
    }

    #[test]
    fn ratio_of_pure_squared_sine_is_tiny() {
        let sq = square_signal(&sine(440.0, 44100.0, 441_000));
        let r = ubr_ratio(&periodogram(&sq).unwrap()).unwrap();
        assert_eq!(r.low_freq, 0.1);
        assert!(!r.low_bin_fallback);
        assert!(r.value < 1e-6, "{}", r.value);
        assert!(!r.indicates_ubr());
    }

    #[test]
    fn ratio_falls_back_on_short_spectra() {
        let sq = square_signal(&sine(440.0, 44100.0, 44100));
        let r = ubr_ratio(&periodogram(&sq).unwrap()).unwrap();
        assert!(r.low_bin_fallback);
        assert_eq!(r.low_freq, 1.0);
        let b = log_bin(&periodogram(&sq).unwrap(), 20).unwrap();
        assert_eq!(ubr_ratio(&b), Err(SpectralError::NotRaw));
    }

    #[test]
    fn zero_crossing_counts() {
        let pos = TimeSeries::new(vec![0.5; 100], 10.0).unwrap();
        assert!(zero_crossings(&pos).samples().iter().all(|x| *x == 0.0));
        let zc = zero_crossings(&sine(100.0, 44100.0, 44100));
        let count: f64 = zc.samples().iter().sum();
        assert!((count - 200.0).abs() <= 1.0, "{count}");
        assert_eq!(zc.sample_rate(), 44100.0);
    }

    #[test]
    fn window_parse() {
        assert_eq!("hann".parse::<Window>().unwrap(), Window::Hann);
        assert_eq!("none".parse::<Window>().unwrap(), Window::None);
        assert!("kaiser".parse::<Window>().is_err());
    }

    #[test]
    fn default_band() {
        assert_eq!(default_fit_band(10.0), (0.2, 100.0));
        assert_eq!(default_fit_band(100.0), (0.05, 100.0));
    }
}
