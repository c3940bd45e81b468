//! Uncompressed RIFF/WAVE reading and writing, clip extraction and spectrum
//! CSV export.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{SignalError, TimeSeries};
use crate::spectral::PowerSpectrum;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;
/// Bytes 2..16 of the KSDATAFORMAT_SUBTYPE GUIDs for PCM and IEEE float.
const SUBFORMAT_TAIL: [u8; 14] = [
    0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71,
];

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: format tag {tag:#06x} with {bits} bits per sample")]
    UnsupportedFormat { tag: u16, bits: u16 },
    #[error("channel {channel} requested but the file has {channels} channel(s)")]
    ChannelOutOfRange { channel: usize, channels: u16 },
    #[error("clip [{start} s, +{duration} s] outside signal of {total} s")]
    ClipOutOfRange {
        start: f64,
        duration: f64,
        total: f64,
    },
    #[error("bit depth {0} not writable (use 16, 24 or 32)")]
    BitDepth(u16),
    #[error("signal peak {0} exceeds full scale; normalize before writing")]
    PeakExceeded(f64),
    #[error("sample rate {0} Hz is not a positive integer")]
    SampleRate(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AudioError + '_ {
    move |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WavDescriptor {
    pub sample_rate: u32,
    pub channel_count: u16,
    pub bits_per_sample: u16,
    pub sample_format: SampleFormat,
    pub frame_count: usize,
}

impl WavDescriptor {
    pub fn block_align(&self) -> usize {
        self.channel_count as usize * (self.bits_per_sample as usize / 8)
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::MalformedHeader(msg.into())
}

fn parse_fmt(body: &[u8]) -> Result<(WavDescriptor, usize), AudioError> {
    if body.len() < 16 {
        return Err(malformed(format!(
            "fmt chunk is {} bytes, need 16",
            body.len()
        )));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 || u16_at(body, 16) < 22 {
            return Err(malformed("extensible fmt chunk too short"));
        }
        if body[26..40] != SUBFORMAT_TAIL {
            return Err(AudioError::UnsupportedFormat { tag, bits });
        }
        tag = u16_at(body, 24);
    }
    let sample_format = match (tag, bits) {
        (FORMAT_PCM, 16 | 24 | 32) => SampleFormat::Pcm,
        (FORMAT_FLOAT, 32 | 64) => SampleFormat::Float,
        _ => return Err(AudioError::UnsupportedFormat { tag, bits }),
    };
    if channels == 0 {
        return Err(malformed("zero channels"));
    }
    if sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    let desc = WavDescriptor {
        sample_rate,
        channel_count: channels,
        bits_per_sample: bits,
        sample_format,
        frame_count: 0,
    };
    if block_align as usize != desc.block_align() {
        return Err(malformed(format!(
            "block_align {block_align} inconsistent with {channels} x {bits}-bit samples"
        )));
    }
    Ok((desc, block_align as usize))
}

/// Parses a complete WAV image into its descriptor and data bytes.
pub fn parse_wav(bytes: &[u8]) -> Result<(WavDescriptor, &[u8]), AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let riff_size = u32_at(bytes, 4) as usize;
    if riff_size + 8 > bytes.len() {
        return Err(malformed(format!(
            "RIFF size {riff_size} exceeds file length {}",
            bytes.len()
        )));
    }
    let end = riff_size + 8;
    let mut fmt = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= end {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        if size > end - body_start {
            return Err(malformed(format!(
                "chunk `{}` declares {size} bytes but only {} remain",
                String::from_utf8_lossy(id),
                end - body_start
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        at = body_start + size + (size & 1);
    }
    let (mut desc, block_align) = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if data.len() % block_align != 0 {
        return Err(malformed(format!(
            "data chunk of {} bytes is not a whole number of {block_align}-byte frames",
            data.len()
        )));
    }
    desc.frame_count = data.len() / block_align;
    Ok((desc, data))
}

/// Decodes one channel of a WAV image, integer full scale mapping to +-1.
pub fn decode_wav(bytes: &[u8], channel: usize) -> Result<(WavDescriptor, TimeSeries), AudioError> {
    let (desc, data) = parse_wav(bytes)?;
    if channel >= desc.channel_count as usize {
        return Err(AudioError::ChannelOutOfRange {
            channel,
            channels: desc.channel_count,
        });
    }
    let width = desc.bits_per_sample as usize / 8;
    let samples = data
        .chunks_exact(desc.block_align())
        .map(|frame| {
            let s = &frame[channel * width..(channel + 1) * width];
            match (desc.sample_format, width) {
                (SampleFormat::Pcm, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
                (SampleFormat::Pcm, 3) => {
                    (i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) as f64 / 8_388_608.0
                }
                (SampleFormat::Pcm, _) => {
                    i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0
                }
                (SampleFormat::Float, 4) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
                (SampleFormat::Float, _) => {
                    f64::from_le_bytes([s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]])
                }
            }
        })
        .collect();
    Ok((desc, TimeSeries::new(samples, desc.sample_rate as f64)?))
}

pub fn read_wav(path: impl AsRef<Path>, channel: usize) -> Result<TimeSeries, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_wav(&bytes, channel).map(|(_, ts)| ts)
}

pub fn read_wav_descriptor(path: impl AsRef<Path>) -> Result<WavDescriptor, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_wav(&bytes).map(|(d, _)| d)
}

/// Mono integer-PCM WAV image of `signal`.
pub fn encode_wav(signal: &TimeSeries, bits: u16) -> Result<Vec<u8>, AudioError> {
    if !matches!(bits, 16 | 24 | 32) {
        return Err(AudioError::BitDepth(bits));
    }
    let sr = signal.sample_rate();
    if sr.fract() != 0.0 || sr > u32::MAX as f64 {
        return Err(AudioError::SampleRate(sr));
    }
    let peak = signal.peak();
    if peak > 1.0 || peak.is_nan() {
        return Err(AudioError::PeakExceeded(peak));
    }
    let width = bits as usize / 8;
    let data_len = signal.len() * width;
    if data_len + 36 > u32::MAX as usize {
        return Err(malformed("signal too long for a RIFF file"));
    }
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&(sr as u32).to_le_bytes());
    out.extend_from_slice(&((sr as usize * width) as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    let full = (1i64 << (bits - 1)) as f64;
    for &x in signal.samples() {
        let q = (x * full).round().clamp(-full, full - 1.0) as i64;
        out.extend_from_slice(&q.to_le_bytes()[..width]);
    }
    Ok(out)
}

pub fn write_wav(signal: &TimeSeries, path: impl AsRef<Path>, bits: u16) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes = encode_wav(signal, bits)?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Scales `signal` so its peak is `target`; returns the applied factor
/// (1 for silence).
pub fn normalize_peak(signal: &TimeSeries, target: f64) -> (TimeSeries, f64) {
    let peak = signal.peak();
    let scale = if peak > 0.0 { target / peak } else { 1.0 };
    (signal.map(|x| x * scale), scale)
}

/// Sub-series starting at the sample nearest `start`, `duration` seconds long.
pub fn clip(signal: &TimeSeries, start: f64, duration: f64) -> Result<TimeSeries, AudioError> {
    let total = signal.duration();
    let out_of_range = AudioError::ClipOutOfRange {
        start,
        duration,
        total,
    };
    if !(start.is_finite() && duration.is_finite() && start >= 0.0 && duration > 0.0) {
        return Err(out_of_range);
    }
    let sr = signal.sample_rate();
    let first = (start * sr).round() as usize;
    let len = (duration * sr).round() as usize;
    if len == 0 || first + len > signal.len() {
        return Err(out_of_range);
    }
    Ok(TimeSeries::new(
        signal.samples()[first..first + len].to_vec(),
        sr,
    )?)
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

/// `frequency_hz,power` header, then one shortest-round-trip pair per line.
pub fn write_spectrum_csv<W: Write>(spectrum: &PowerSpectrum, mut w: W) -> io::Result<()> {
    writeln!(w, "frequency_hz,power")?;
    for (f, p) in spectrum.frequencies.iter().zip(&spectrum.power) {
        writeln!(w, "{},{}", Num(*f), Num(*p))?;
    }
    w.flush()
}

pub fn save_spectrum_csv(
    spectrum: &PowerSpectrum,
    path: impl AsRef<Path>,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_spectrum_csv(spectrum, BufWriter::new(file)).map_err(io_err(path))
}
