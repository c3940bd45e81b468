//! Acceptance criteria 1-12. Each criterion prints one PASS/FAIL line with
//! the measured values; the process exits nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ubr_core::audio_io;
use ubr_core::experiments::{
    analyze_signal, analyze_wav, preset_config, render, run_config, run_preset, AnalysisSection,
    Summary, WavAnalysisOptions,
};
use ubr_core::signal::TimeSeries;
use ubr_core::spectral::{self, PowerSpectrum, Window};
use ubr_core::stochastics::{sample_ir_divergent, IrDivergentSpec, SeedTree};
use ubr_core::synth::{synth_timbre_note, vibrato_phase, TimbreSpec};

const SEED: u64 = 1;

type Criterion = (&'static str, fn() -> Vec<Check>);

struct Check {
    ok: bool,
    text: String,
}

fn check(ok: bool, text: impl Into<String>) -> Check {
    Check {
        ok,
        text: text.into(),
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn preset(id: &str) -> Summary {
    run_preset(id, SEED, None).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn mean_index(s: &Summary) -> f64 {
    s.mean_index().unwrap_or(f64::NAN)
}

fn mean_r2(s: &Summary) -> f64 {
    s.aggregate.r_squared.map_or(f64::NAN, |r| r.mean)
}

fn ratios(s: &Summary) -> Vec<f64> {
    s.reps
        .iter()
        .map(|r| r.ubr.map_or(f64::NAN, |u| u.value))
        .collect()
}

fn geo_ratio(s: &Summary) -> f64 {
    s.aggregate.ubr_geometric_mean.unwrap_or(f64::NAN)
}

fn index_check(s: &Summary, lo: f64, hi: f64) -> Check {
    let g = mean_index(s);
    check(
        within(g, lo, hi),
        format!("{} mean gamma {g:.3} in [{lo}, {hi}]", s.name),
    )
}

fn absent_check(s: &Summary) -> Check {
    let worst = ratios(s).into_iter().fold(f64::NAN, f64::max);
    check(
        worst < 1e-2,
        format!(
            "{} max R {worst:.2e} < 1e-2 over {} seeds",
            s.name,
            s.reps.len()
        ),
    )
}

fn factor_check(s: &Summary, target: f64) -> Check {
    let r = geo_ratio(s);
    check(
        r >= target / 30.0 && r <= target * 30.0,
        format!("{} R {r:.2e} within x/30 of {target:.0e}", s.name),
    )
}

// 1 --------------------------------------------------------------------------

fn beat_oracle() -> Vec<Check> {
    let sr = 44100.0;
    let n = 441_000;
    let pure = TimbreSpec::new(1, 0.0);
    let a = synth_timbre_note(441.0, &pure, 0.0, n, sr).unwrap();
    let b = synth_timbre_note(439.0, &pure, 0.0, n, sr).unwrap();
    let sum: Vec<f64> = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| x + y)
        .collect();
    let ps = spectral::periodogram(&spectral::square_signal(&TimeSeries::new(sum, sr).unwrap()))
        .unwrap();
    let (peak_f, _) = ps
        .frequencies
        .iter()
        .zip(&ps.power)
        .filter(|(f, _)| **f <= 100.0)
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(f, p)| (*f, *p))
        .unwrap();
    let lines = [2.0, 878.0, 880.0, 882.0];
    let total: f64 = ps.power.iter().sum();
    let leak: f64 = ps
        .frequencies
        .iter()
        .zip(&ps.power)
        .filter(|(f, _)| !lines.iter().any(|l| (*f - l).abs() < 1e-9))
        .map(|(_, p)| p)
        .sum();
    vec![
        check(peak_f == 2.0, format!("low-band maximum at {peak_f} Hz")),
        check(
            leak / total < 1e-6,
            format!(
                "power outside {{2, 878, 880, 882}} Hz: {:.1e} relative",
                leak / total
            ),
        ),
    ]
}

// 2-7 ------------------------------------------------------------------------

fn timbre_presets() -> Vec<Check> {
    let (a, b, c) = (preset("fig1a"), preset("fig1b"), preset("fig1c"));
    vec![
        absent_check(&a),
        index_check(&b, -2.1, -1.3),
        index_check(&c, -1.6, -0.8),
        check(
            mean_r2(&b) > 0.7,
            format!("fig1b mean r2 {:.3} > 0.7", mean_r2(&b)),
        ),
        check(
            mean_r2(&c) > 0.7,
            format!("fig1c mean r2 {:.3} > 0.7", mean_r2(&c)),
        ),
    ]
}

fn vibrato_presets() -> Vec<Check> {
    vec![
        absent_check(&preset("fig2a")),
        index_check(&preset("fig2b"), -1.5, -0.7),
        index_check(&preset("fig2c"), -1.5, -0.7),
    ]
}

fn combined_presets() -> Vec<Check> {
    let c = preset("fig3c");
    let low_edge = c
        .reps
        .iter()
        .all(|r| r.fit.is_some_and(|f| f.band.0 <= 0.01 + 1e-12));
    let mut cfg = preset_config("fig3c", SEED).unwrap();
    cfg.experiment.repetitions = 1;
    let signal = render(&cfg.generator(cfg.rep_seed(0)).unwrap()).unwrap();
    let analysis = analyze_signal(&signal, &cfg.analysis).unwrap();
    let first_bin = first_positive_bin(&analysis.binned, 0.01);
    vec![
        index_check(&preset("fig3a"), -2.1, -1.1),
        index_check(&preset("fig3b"), -2.1, -1.1),
        check(
            low_edge && first_bin < 0.0125,
            format!("fig3c fit band starts at 0.01 Hz, lowest populated bin {first_bin:.4} Hz"),
        ),
        check(
            mean_r2(&c) > 0.7,
            format!("fig3c mean in-band r2 {:.3} > 0.7", mean_r2(&c)),
        ),
    ]
}

fn first_positive_bin(binned: &PowerSpectrum, lo: f64) -> f64 {
    binned
        .frequencies
        .iter()
        .zip(&binned.power)
        .find(|(f, p)| **f >= lo && **p > 0.0)
        .map_or(f64::NAN, |(f, _)| *f)
}

fn melody_presets() -> Vec<Check> {
    let (a, b, c) = (preset("fig4a"), preset("fig4b"), preset("fig4c"));
    let (ra, rb, rc) = (ratios(&a), ratios(&b), ratios(&c));
    let monotone = (0..ra.len()).all(|k| ra[k] < rb[k] && rb[k] < rc[k]);
    vec![
        factor_check(&a, 5e-5),
        check(
            geo_ratio(&a) < 1e-2,
            format!("fig4a R {:.2e} < 1e-2", geo_ratio(&a)),
        ),
        factor_check(&b, 20.0),
        index_check(&b, -1.1, -0.3),
        factor_check(&c, 500.0),
        index_check(&c, -1.6, -0.8),
        check(
            monotone,
            format!(
                "R(a) < R(b) < R(c) per seed: a {:?} b {:?} c {:?}",
                fmt_all(&ra),
                fmt_all(&rb),
                fmt_all(&rc)
            ),
        ),
    ]
}

fn fmt_all(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.1e}")).collect()
}

fn resonance_presets() -> Vec<Check> {
    let mut checks: Vec<Check> = ["fig5a", "fig5b", "fig5c"]
        .iter()
        .map(|id| index_check(&preset(id), -1.6, -0.5))
        .collect();
    // every detune exactly on the pole
    let mut cfg = preset_config("fig5c", SEED).unwrap();
    cfg.generator.detune_halfwidth = Some(0.0);
    cfg.experiment.repetitions = 1;
    let finite = run_config(&cfg).is_ok_and(|s| s.reps[0].fit.is_some())
        && render(&cfg.generator(cfg.rep_seed(0)).unwrap())
            .is_ok_and(|x| x.samples().iter().all(|v| v.is_finite()));
    checks.push(check(
        finite,
        "dissipative resonance with xi = 0 renders finite output",
    ));
    checks
}

fn ir_presets() -> Vec<Check> {
    let a = preset("fig6a");
    let b = preset("fig6b");
    let c = preset("fig6c");
    let low = |s: &Summary| -> Vec<f64> {
        s.reps
            .iter()
            .map(|r| r.ubr.map_or(f64::NAN, |u| u.low_power))
            .collect()
    };
    let (lb, lc) = (low(&b), low(&c));
    let wins = lb.iter().zip(&lc).filter(|(b, c)| c > b).count();
    vec![
        index_check(&a, -1.9, -1.1),
        check(
            wins >= 4,
            format!(
                "fig6c 0.1 Hz power above fig6b in {wins}/5 paired seeds (b {:?}, c {:?})",
                fmt_all(&lb),
                fmt_all(&lc)
            ),
        ),
    ]
}

// 8 --------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, 1e-12, 50)
}

fn vibrato_quadrature() -> Vec<Check> {
    let mut stream = SeedTree::new(SEED).child("vibrato-oracle", 0).stream();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let omega = 100.0 + 900.0 * stream.unit();
        let theta = -1.0 + 11.0 * stream.unit();
        let b = 1.0 + 2.0 * stream.unit();
        let eta = PI * (2.0 * stream.unit() - 1.0);
        let t = 10.0 * stream.unit();
        // phase = integral of the instantaneous angular frequency from 0 to t
        let inst = |s: f64| TAU * (omega + b * (TAU * theta * s + eta).sin());
        let oracle = integrate(&inst, 0.0, t);
        let got = vibrato_phase(omega, theta, b, eta, t);
        worst = worst.max((got - oracle).abs());
    }
    vec![check(
        worst < 1e-8,
        format!("max |closed form - quadrature| = {worst:.2e} rad over 100 draws"),
    )]
}

// 9 --------------------------------------------------------------------------

fn ir_sampler() -> Vec<Check> {
    let eps = 1e-5;
    let spec = IrDivergentSpec::new(eps, 3000.0).unwrap();
    let mut stream = SeedTree::new(SEED).child("ir-oracle", 0).stream();
    let per_decade = 5;
    let (lo_exp, hi_exp) = (-4i32, 3i32);
    let bins = ((hi_exp - lo_exp) * per_decade) as usize;
    let edge = |k: usize| 10f64.powf(lo_exp as f64 + k as f64 / per_decade as f64);
    let mut counts = vec![0usize; bins];
    let draws = 1_000_000;
    for _ in 0..draws {
        let k = sample_ir_divergent(&spec, &mut stream).unwrap().abs();
        if k >= edge(0) && k < edge(bins) {
            let idx = ((k.log10() - lo_exp as f64) * per_decade as f64).floor() as usize;
            counts[idx.min(bins - 1)] += 1;
        }
    }
    let norm = (1.0 + spec.kappa_max / eps).ln();
    let mut worst: f64 = 0.0;
    for (k, &count) in counts.iter().enumerate() {
        let expected = draws as f64 * ((edge(k + 1) + eps) / (edge(k) + eps)).ln() / norm;
        worst = worst.max((count as f64 / expected - 1.0).abs());
    }
    vec![check(
        worst < 0.05,
        format!(
            "worst log-bin deviation from 1/(kappa+eps): {:.2}%",
            100.0 * worst
        ),
    )]
}

// 10 -------------------------------------------------------------------------

fn spectral_identities() -> Vec<Check> {
    let x = TimeSeries::from_fn(44100, 44100.0, |t| {
        (TAU * 441.0 * t).sin() + 0.3 * (TAU * 1234.5 * t + 0.2).sin() + 0.01 * (t * 37.0).cos()
    })
    .unwrap();
    let energy: f64 = x.samples().iter().map(|v| v * v).sum();
    let parseval: f64 = spectral::two_sided_power(&x).unwrap().iter().sum();
    let rel = (energy - parseval).abs() / energy;

    let grid: Vec<f64> = (1..=220_500).map(|k| k as f64 * 0.1).collect();
    let exact = PowerSpectrum {
        power: grid.iter().map(|f| 1e3 / f).collect(),
        frequencies: grid,
        normalization: "analytic".into(),
        dc_dropped: true,
        window: Window::None,
        bin_width: 0.1,
        bins_per_decade: None,
    };
    let fit = spectral::fit_power_law(&exact, 0.2, 100.0).unwrap();
    let mut scaled = exact.clone();
    scaled.power.iter_mut().for_each(|p| *p *= 7.3e-4);
    let fit_scaled = spectral::fit_power_law(&scaled, 0.2, 100.0).unwrap();
    let shift = (fit.index - fit_scaled.index).abs();
    vec![
        check(rel < 1e-9, format!("Parseval relative error {rel:.1e}")),
        check(
            shift <= 1e-12,
            format!("gamma shift under power scaling {shift:.1e}"),
        ),
        check(
            (fit.index + 1.0).abs() <= 1e-3,
            format!("gamma on exact f^-1 = {:.6}", fit.index),
        ),
    ]
}

// 11 -------------------------------------------------------------------------

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Vec<Check> {
    ["fig1b", "fig4b", "fig6a"]
        .iter()
        .map(|id| {
            let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            run_preset(id, 7, Some(x.path())).unwrap();
            run_preset(id, 7, Some(y.path())).unwrap();
            let (a, b) = (csv_files(&x.path().join(id)), csv_files(&y.path().join(id)));
            check(
                !a.is_empty() && a == b,
                format!("{id}: {} CSV files byte-identical on rerun", a.len()),
            )
        })
        .collect()
}

// 12 -------------------------------------------------------------------------

fn wav_path() -> Vec<Check> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_config("fig1b", SEED).unwrap();
    let signal = render(&cfg.generator(cfg.rep_seed(0)).unwrap()).unwrap();
    let in_memory = analyze_signal(&signal, &AnalysisSection::default())
        .unwrap()
        .fit
        .unwrap()
        .index;
    let (scaled, _) = audio_io::normalize_peak(&signal, 0.9);
    let wav = dir.path().join("fig1b.wav");
    audio_io::write_wav(&scaled, &wav, 16).unwrap();
    let from_file = analyze_wav(&wav, &WavAnalysisOptions::default())
        .unwrap()
        .mean_index()
        .unwrap_or(f64::NAN);

    // an arbitrary stereo 24-bit file: noise on the left, a chord on the right
    let stereo = dir.path().join("stereo.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 44100,
        bits_per_sample: 24,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
    let mut stream = SeedTree::new(SEED).child("stereo", 0).stream();
    for i in 0..44100 * 3 {
        let t = i as f64 / 44100.0;
        let noise = (stream.unit() * 2.0 - 1.0) * 4_000_000.0;
        let chord = ((TAU * 261.6 * t).sin() + (TAU * 329.6 * t).sin()) * 3_000_000.0;
        w.write_sample(noise as i32).unwrap();
        w.write_sample(chord as i32).unwrap();
    }
    w.finalize().unwrap();
    let both = (0..2).all(|channel| {
        let opts = WavAnalysisOptions {
            channel,
            ..Default::default()
        };
        analyze_wav(&stereo, &opts).is_ok_and(|s| s.reps[0].fit.is_some())
    });
    let hann = analyze_wav(
        &stereo,
        &WavAnalysisOptions {
            window: Window::Hann,
            start: 0.5,
            duration: Some(2.0),
            ..Default::default()
        },
    )
    .is_ok();
    vec![
        check(
            (from_file - in_memory).abs() < 0.05,
            format!("gamma in memory {in_memory:.4}, from 16-bit WAV {from_file:.4}"),
        ),
        check(
            both && hann,
            "stereo 24-bit 44100 Hz file analyzed on both channels and clipped with Hann",
        ),
    ]
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("beat oracle", beat_oracle),
        ("timbre unison presets", timbre_presets),
        ("vibrato unison presets", vibrato_presets),
        ("timbre + vibrato presets", combined_presets),
        ("melody presets", melody_presets),
        ("resonance presets", resonance_presets),
        ("infrared-divergent presets", ir_presets),
        ("vibrato closed form", vibrato_quadrature),
        ("infrared-divergent sampler", ir_sampler),
        ("spectral identities", spectral_identities),
        ("determinism", determinism),
        ("WAV analysis path", wav_path),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let n = k + 1;
        let checks = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(c) => c,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                vec![check(false, format!("panicked: {msg}"))]
            }
        };
        let ok = checks.iter().all(|c| c.ok);
        println!(
            "criterion {n:>2} {}: {name}",
            if ok { "PASS" } else { "FAIL" }
        );
        for c in &checks {
            println!("    [{}] {}", if c.ok { "ok" } else { "FAIL" }, c.text);
        }
        if !ok {
            failed.push(n);
        }
    }
    println!(
        "\n{} of {} criteria passed{}",
        criteria.len() - failed.len(),
        criteria.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
