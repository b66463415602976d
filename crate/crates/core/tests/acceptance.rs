//! End-to-end acceptance checks. Runs with its own harness and prints one
//! PASS/FAIL line per criterion; exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;

use thermal_ghost::app;
use thermal_ghost::config::parse_config;
use thermal_ghost::correlation::{coherence_time_from_excess, mandel_q, tac_histogram, PairAccumulator};
use thermal_ghost::detection::{sample_photons, synthesize_intensity_trace, IntensityTrace};
use thermal_ghost::field::{generate_source_frame, make_grid, EnsembleSeed, SampledField, SourceSpec};
use thermal_ghost::optics::{angular_pupil, beamsplit, check_lens_equation, propagate, BenchGeometry, Spectrum};
use thermal_ghost::rng::derive_seed;
use thermal_ghost::scenarios::{run_ghost, run_hbt, suggested_temporal_modes, HbtResult};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

const SOURCE: &str = "\
[source]
diameter = 1 mm
wavelength = 780 nm
coherence_time = 0.2 ns
mean_rate = 600 kHz
[geometry]
z1 = 1.8 m
z2 = 147.5 cm
z3 = 12.4 cm
f = 20 cm
";

fn ghost_text(extra: &str) -> String {
    format!("{SOURCE}{extra}")
}

fn ghost(text: &str) -> thermal_ghost::Result<thermal_ghost::scenarios::GhostScan> {
    let cfg = parse_config(text)?;
    run_ghost(&app::ghost_config(&cfg)?)
}

/// Two beamsplitter outputs sampled at the same point of propagated speckle,
/// 5e4 frames.
fn siegert() -> Verdict {
    let grid = make_grid(1024, 5e-6, 0.0).unwrap();
    let spec = SourceSpec::new(0.5e-3, 780e-9, 0.2e-9, 1.0).unwrap();
    let mut acc = PairAccumulator::new(100);
    for k in 0..50_000u64 {
        let frame = generate_source_frame(&spec, &grid, EnsembleSeed::new(41, k)).unwrap();
        let relayed = angular_pupil(&frame, 2e-3, 0.5).unwrap();
        let (a, b) = beamsplit(&propagate(&relayed, 0.3).unwrap());
        acc.push(a.amplitude[512].norm_sqr(), b.amplitude[512].norm_sqr());
    }
    let g = acc.estimate().unwrap();
    verdict(
        (g.value - 2.0).abs() <= 0.05,
        format!(
            "g2 = {:.4} +- {:.4} over 5e4 frames (target 2.00 +- 0.05)",
            g.value, g.std_error
        ),
    )
}

fn hbt_bench(seconds: f64) -> HbtResult {
    let text = format!(
        "[run]\nseed = 2024\n[source]\ndiameter = 0.5 mm\nwavelength = 780 nm\ncoherence_time = 0.2 ns\n\
         mean_rate = 600 kHz\n[detector1]\njitter_fwhm = 0.92 ns\n[detector2]\njitter_fwhm = 0.92 ns\n\
         [tac]\nintegration_time = {seconds} s\n"
    );
    let cfg = parse_config(&text).unwrap();
    run_hbt(&app::hbt_config(&cfg).unwrap()).unwrap()
}

fn hbt_histogram_peak(r: &HbtResult, seconds: f64) -> Verdict {
    let a = &r.analysis;
    let coincidences = a.histogram.total();
    let singles = r.singles_rates(seconds);
    let Ok(fit) = &a.fit else {
        return verdict(false, format!("no Gaussian fit: {:?}", a.fit));
    };
    let fwhm_ns = fit.fwhm * 1e9;
    let g2 = a.g2_zero.value;
    verdict(
        coincidences >= 30_000 && (1.15..=1.45).contains(&fwhm_ns) && (1.05..=1.20).contains(&g2),
        format!(
            "FWHM = {fwhm_ns:.3} ns in [1.15, 1.45], g2(0) = {g2:.4} +- {:.4} in [1.05, 1.20], \
             {coincidences} coincidences, singles {:.0}/{:.0} per s",
            a.g2_zero.std_error, singles[0], singles[1]
        ),
    )
}

fn coherence_inversion(r: &HbtResult) -> Verdict {
    // Lorentzian line under Gaussian jitter of standard deviation s: the
    // window-averaged excess is tau0 / (s sqrt(2 pi)).
    let s = 1.3e-9 / (8.0 * 2f64.ln()).sqrt();
    let oracle = 0.11 * s * (2.0 * PI).sqrt();
    let tau = coherence_time_from_excess(0.11, 1.3e-9).unwrap();
    let exact = (tau - oracle).abs() < 1e-15 && (tau * 1e12).round() == 152.0;
    let est = r.analysis.tau0_estimate.unwrap_or(f64::NAN);
    let ratio = est / 0.2e-9;
    verdict(
        exact && (1.0 / 1.5..=1.5).contains(&ratio),
        format!(
            "inversion {:.4} ns (oracle {:.4} ns); round trip {:.4} ns from 0.2 ns, ratio {ratio:.3}",
            tau * 1e9,
            oracle * 1e9,
            est * 1e9
        ),
    )
}

fn lens_and_magnification() -> Verdict {
    let bench = BenchGeometry::new(1.8, 1.475, 0.124, 0.2).unwrap();
    let r = check_lens_equation(&bench, 5e-3).unwrap();
    let oracle_residual: f64 = (1.0 / (1.475 - 1.8) + 1.0 / 0.124 - 1.0 / 0.2) * 0.2;
    let scan = ghost(&ghost_text(
        "[run]\nseed = 7\n[mask]\ntype = double-pinhole\nseparation = 1.3 mm\nhole_diameter = 0.5 mm\n\
         [reference]\naperture = 1 um\n[scan]\nstart = -5 mm\nstop = 5 mm\nstep = 0.5 mm\nframes = 2000\n\
         temporal_modes = 1\n",
    ));
    let scan = match scan {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("ghost scan failed: {e}")),
    };
    let sep = if scan.peaks.len() == 2 {
        (scan.peaks[1] - scan.peaks[0]).abs()
    } else {
        f64::NAN
    };
    verdict(
        r.relative_residual <= 5e-3
            && (r.relative_residual - oracle_residual.abs()).abs() < 1e-12
            && (r.magnification - 2.62).abs() <= 0.01
            && (sep - 3.4e-3).abs() <= 0.5e-3,
        format!(
            "|r f| = {:.3e}, m = {:.4}, peaks {:?} mm, separation {:.3} mm (target 3.4 +- 0.5)",
            r.relative_residual,
            r.magnification,
            scan.peaks.iter().map(|p| (p * 1e6).round() / 1e3).collect::<Vec<_>>(),
            sep * 1e3
        ),
    )
}

fn n_scaling() -> Verdict {
    let mut v = Vec::new();
    for n in 1..=3 {
        let text = ghost_text(&format!(
            "[run]\nseed = 3\n[mask]\ntype = pinholes\ncount = {n}\nseparation = 1.3 mm\nhole_diameter = 0.05 mm\n\
             [reference]\naperture = 1 um\n[scan]\nstart = -5 mm\nstop = 5 mm\nstep = 0.1 mm\nframes = 20000\n\
             temporal_modes = 1\nsharing = shared\n"
        ));
        match ghost(&text) {
            Ok(s) => v.push(s.visibility),
            Err(e) => return verdict(false, format!("N = {n} scan failed: {e}")),
        }
    }
    let within = v
        .iter()
        .enumerate()
        .all(|(i, x)| (x - 1.0 / (2.0 * (i + 1) as f64 + 1.0)).abs() <= 0.03);
    let decreasing = v.windows(2).all(|w| w[1] < w[0]);
    verdict(
        within && decreasing,
        format!(
            "visibilities {:.4}, {:.4}, {:.4} vs 1/3, 1/5, 1/7 (+- 0.03), strictly decreasing: {decreasing}",
            v[0], v[1], v[2]
        ),
    )
}

fn degraded_visibility() -> Verdict {
    let m = suggested_temporal_modes(0.25e-9, 1.3e-9, 0.2e-9).unwrap();
    let text = ghost_text(&format!(
        "[run]\nseed = 11\n[mask]\ntype = double-pinhole\nseparation = 1.3 mm\nhole_diameter = 0.5 mm\n\
         [reference]\naperture = 2 mm\n[scan]\nstart = -5 mm\nstop = 5 mm\nstep = 0.5 mm\nframes = 2000\n\
         temporal_modes = {m}\n"
    ));
    match ghost(&text) {
        Ok(s) => verdict(
            (0.01..=0.05).contains(&s.visibility),
            format!("visibility {:.4} in [0.01, 0.05] with M = {m:.2}", s.visibility),
        ),
        Err(e) => verdict(false, format!("ghost scan failed: {e}")),
    }
}

fn propagation_oracles() -> Verdict {
    let (w0, lambda, z) = (0.2e-3, 780e-9, 0.5);
    let grid = make_grid(4096, 5e-6, 0.0).unwrap();
    let beam = SampledField::from_fn(grid, lambda, |x| Complex64::new((-(x * x) / (w0 * w0)).exp(), 0.0)).unwrap();
    let out = propagate(&beam, z).unwrap();
    let (mut s0, mut s2) = (0.0, 0.0);
    for (x, a) in grid.coordinates().zip(&out.amplitude) {
        s0 += a.norm_sqr();
        s2 += a.norm_sqr() * x * x;
    }
    let width = 2.0 * (s2 / s0).sqrt();
    let zr = PI * w0 * w0 / lambda;
    let rel = (width / (w0 * (1.0 + (z / zr).powi(2)).sqrt()) - 1.0).abs();

    let spec = SourceSpec::new(1e-3, lambda, 0.2e-9, 1.0).unwrap();
    let mut frame = generate_source_frame(&spec, &grid, EnsembleSeed::new(5, 0)).unwrap();
    for (x, a) in grid.coordinates().zip(frame.amplitude.iter_mut()) {
        *a *= (-(x * x) / (0.3e-3f64).powi(2)).exp();
    }
    let spectrum = Spectrum::of(&frame);
    let kernel: Vec<Complex64> = spectrum
        .frequencies()
        .iter()
        .map(|fx| Complex64::new((-(lambda * fx / 1e-3).powi(2)).exp(), 0.0))
        .collect();
    let mut field = spectrum.filtered_field(&kernel);
    let e0 = field.energy();
    let mut drift: f64 = 0.0;
    for d in [0.2, 0.05, 0.4, 0.1, 0.3] {
        field = propagate(&field, d).unwrap();
        drift = drift.max((field.energy() / e0 - 1.0).abs());
    }
    verdict(
        rel <= 1e-3 && drift < 1e-10,
        format!("beam width error {rel:.2e} (limit 1e-3), Parseval drift {drift:.2e} over 5 segments (limit 1e-10)"),
    )
}

fn photon_statistics() -> Verdict {
    let (rate, duration) = (2e5, 0.01);
    let flat = IntensityTrace::constant(rate, duration, 1e-7).unwrap();
    let counts: Vec<f64> = (0..100)
        .map(|k| sample_photons(&flat, 1.0, derive_seed(77, k)).unwrap().len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / 100.0;
    let z_poisson = (mean - rate * duration) / (rate * duration / 100.0).sqrt();

    let tau0 = 1e-5;
    let trace = synthesize_intensity_trace(tau0, 2e5, 0.1, tau0 / 500.0, 78).unwrap();
    let thermal = sample_photons(&trace, 1.0, 79).unwrap();
    let q = mandel_q(&thermal, tau0 / 5.0).unwrap();

    let (r, bw) = (1e5, 1e-9);
    let long = IntensityTrace::constant(r, 10.0, 1e-7).unwrap();
    let a = sample_photons(&long, 1.0, 80).unwrap();
    let b = sample_photons(&long, 1.0, 81).unwrap();
    let h = tac_histogram(&a, &b, (-20e-9, 20e-9), bw).unwrap();
    let expected = a.len() as f64 * r * bw;
    let worst = h
        .counts()
        .iter()
        .map(|&c| (c as f64 - expected).abs() / expected.sqrt())
        .fold(0.0, f64::max);

    verdict(
        z_poisson.abs() < 3.0 && q.q > 5.0 * q.std_error && worst < 5.0,
        format!(
            "Poisson mean {mean:.1} (z = {z_poisson:.2}), thermal Q = {:.4} +- {:.4}, \
             accidentals worst bin {worst:.2} sigma",
            q.q, q.std_error
        ),
    )
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_ghostsim");
    let dir = tempfile::tempdir().unwrap();
    let ghost_cfg = dir.path().join("ghost.conf");
    fs::write(
        &ghost_cfg,
        ghost_text(
            "[mask]\ntype = double-pinhole\nseparation = 1.3 mm\nhole_diameter = 0.5 mm\n[reference]\n\
             aperture = 2 mm\n[scan]\nstart = -4 mm\nstop = 4 mm\nstep = 1 mm\nframes = 400\n\
             temporal_modes = auto\n",
        ),
    )
    .unwrap();
    let hbt_cfg = dir.path().join("hbt.conf");
    fs::write(
        &hbt_cfg,
        "[source]\ndiameter = 0.5 mm\nwavelength = 780 nm\ncoherence_time = 0.2 ns\nmean_rate = 600 kHz\n\
         [tac]\nintegration_time = 2 s\n",
    )
    .unwrap();
    let cases = [
        ("ghost", &ghost_cfg, vec!["scan.csv", "scan_raw.csv"]),
        ("hbt", &hbt_cfg, vec!["histogram.csv"]),
    ];
    let mut mismatches = Vec::new();
    for (scenario, cfg, files) in &cases {
        let mut reference: Option<Vec<Vec<String>>> = None;
        for threads in ["1", "2", "4"] {
            let prefix = dir.path().join(format!("{scenario}_t{threads}"));
            let status = Command::new(bin)
                .args([
                    *scenario,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--seed",
                    "99",
                    "--threads",
                    threads,
                    "--out",
                    prefix.to_str().unwrap(),
                ])
                .output()
                .unwrap()
                .status;
            if !matches!(status.code(), Some(0) | Some(4)) {
                mismatches.push(format!("{scenario} --threads {threads} exited {status}"));
                continue;
            }
            let rows: Vec<Vec<String>> = files
                .iter()
                .map(|f| data_rows(&dir.path().join(format!("{scenario}_t{threads}_{f}"))))
                .collect();
            if rows.iter().any(|r| r.len() < 2) {
                mismatches.push(format!("{scenario} --threads {threads} wrote no data"));
            }
            match &reference {
                None => reference = Some(rows),
                Some(r) if *r != rows => mismatches.push(format!("{scenario} --threads {threads} differs")),
                _ => {}
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "ghost and hbt data rows identical at --threads 1, 2, 4".into()
        } else {
            mismatches.join("; ")
        },
    )
}

fn report(id: usize, name: &str, start: Instant, v: &Verdict) {
    let line = format!(
        "acceptance {id} {name}: {} {} [{:.1} s]\n",
        if v.passed { "PASS" } else { "FAIL" },
        v.detail,
        start.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn main() {
    let mut all = true;
    let mut check = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        report(id, name, t, &v);
        all &= v.passed;
    };
    check(1, "siegert-baseline", &mut siegert);
    let seconds = 300.0;
    let t = Instant::now();
    let hbt = hbt_bench(seconds);
    let hbt_time = t.elapsed().as_secs_f64();
    check(2, "hbt-histogram-peak", &mut || {
        let mut v = hbt_histogram_peak(&hbt, seconds);
        v.detail += &format!(", {seconds} s simulated in {hbt_time:.1} s");
        v
    });
    check(3, "coherence-time-inversion", &mut || coherence_inversion(&hbt));
    check(4, "lens-equation-and-magnification", &mut lens_and_magnification);
    check(5, "n-scaling", &mut n_scaling);
    check(6, "degraded-visibility", &mut degraded_visibility);
    check(7, "propagation-oracles", &mut propagation_oracles);
    check(8, "photon-statistics", &mut photon_statistics);
    check(9, "determinism", &mut determinism);
    if !all {
        std::process::exit(1);
    }
}
