use super::{invalid, SynthError};
use crate::signal::TimeSeries;

const MAX_OVERLAP: f64 = 0.9;

fn check_overlap(overlap_fraction: f64) -> Result<(), SynthError> {
    if !(0.0..=MAX_OVERLAP).contains(&overlap_fraction) {
        return Err(invalid(
            "overlap_fraction",
            format!("must lie in [0, {MAX_OVERLAP}], got {overlap_fraction}"),
        ));
    }
    Ok(())
}

/// Start index of each piece: piece `k` begins at
/// `round(sum_{j<k} len_j * (1 - overlap))`.
pub fn segment_starts(lengths: &[usize], overlap_fraction: f64) -> Vec<usize> {
    let mut acc = 0.0f64;
    lengths
        .iter()
        .map(|&len| {
            let start = acc.round() as usize;
            acc += len as f64 * (1.0 - overlap_fraction);
            start
        })
        .collect()
}

/// Lays pieces end to end, each pulled back by `overlap_fraction` of the
/// previous piece's length. Overlapping regions are summed.
pub(crate) fn place(pieces: &[&[f64]], overlap_fraction: f64) -> Vec<f64> {
    let lengths: Vec<usize> = pieces.iter().map(|p| p.len()).collect();
    let starts = segment_starts(&lengths, overlap_fraction);
    let total = starts
        .iter()
        .zip(&lengths)
        .map(|(s, l)| s + l)
        .max()
        .unwrap_or(0);
    let mut out = vec![0.0; total];
    for (piece, &start) in pieces.iter().zip(&starts) {
        for (y, x) in out[start..start + piece.len()].iter_mut().zip(piece.iter()) {
            *y += x;
        }
    }
    out
}

/// Concatenates segments with fractional overlap; all must share a sample rate.
pub fn concat_segments(
    segments: &[TimeSeries],
    overlap_fraction: f64,
) -> Result<TimeSeries, SynthError> {
    check_overlap(overlap_fraction)?;
    let first = segments
        .first()
        .ok_or_else(|| invalid("segments", "need at least one segment"))?;
    let rate = first.sample_rate();
    if let Some(bad) = segments.iter().find(|s| s.sample_rate() != rate) {
        return Err(SynthError::MixedSampleRates(rate, bad.sample_rate()));
    }
    let pieces: Vec<&[f64]> = segments.iter().map(|s| s.samples()).collect();
    Ok(TimeSeries::new(place(&pieces, overlap_fraction), rate)?)
}

pub fn validate_overlap(overlap_fraction: f64) -> Result<(), SynthError> {
    check_overlap(overlap_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(count: usize, len: usize) -> Vec<TimeSeries> {
        (0..count)
            .map(|k| TimeSeries::new(vec![k as f64 + 1.0; len], 44100.0).unwrap())
            .collect()
    }

    #[test]
    fn abutting_segments() {
        let out = concat_segments(&segs(100, 44100), 0.0).unwrap();
        assert_eq!(out.len(), 4_410_000);
        assert_eq!(out.duration(), 100.0);
    }

    #[test]
    fn half_overlap_duration() {
        let out = concat_segments(&segs(100, 44100), 0.5).unwrap();
        assert_eq!(out.len(), 2_227_050);
        assert!((out.duration() - 50.5).abs() < 1e-12);
    }

    #[test]
    fn overlap_regions_are_summed() {
        let out = concat_segments(&segs(3, 10), 0.2).unwrap();
        // starts 0, 8, 16; total 26
        assert_eq!(out.len(), 26);
        assert_eq!(out.samples()[7], 1.0);
        assert_eq!(out.samples()[8], 3.0);
        assert_eq!(out.samples()[10], 2.0);
        assert_eq!(out.samples()[17], 5.0);
        assert_eq!(out.samples()[25], 3.0);
    }

    #[test]
    fn rejects_mixed_rates_and_bad_overlap() {
        let mut s = segs(2, 10);
        s.push(TimeSeries::new(vec![0.0; 10], 48000.0).unwrap());
        assert!(matches!(
            concat_segments(&s, 0.0),
            Err(SynthError::MixedSampleRates(..))
        ));
        assert!(concat_segments(&segs(2, 10), 0.95).is_err());
        assert!(concat_segments(&segs(2, 10), -0.1).is_err());
        assert!(concat_segments(&[], 0.0).is_err());
    }
}
