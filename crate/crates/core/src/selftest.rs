//! Closed-form oracle checks runnable from the command line.

use num_complex::Complex64;
use rand::RngCore;

use crate::correlation::{
    coherence_time_from_excess, g2_from_pairs, mandel_q, tac_histogram, FieldPairMoments, PairAccumulator,
};
use crate::detection::{sample_photons, synthesize_intensity_trace, IntensityTrace};
use crate::error::Result;
use crate::field::{frame_ensemble, make_grid, SampledField, SourceSpec};
use crate::optics::{angular_pupil, beamsplit, check_lens_equation, propagate, BenchGeometry, Spectrum};
use crate::rng::{self, derive_seed, open_unit, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> Outcome {
    match r {
        Ok((passed, detail)) => Outcome { name, passed, detail },
        Err(e) => Outcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// RMS width `w` of an intensity profile `exp(-2 x^2 / w^2)`: `2 sqrt(<x^2>)`.
pub fn beam_width(field: &SampledField) -> f64 {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (x, a) in field.grid.coordinates().zip(&field.amplitude) {
        let i = a.norm_sqr();
        s0 += i;
        s1 += i * x;
        s2 += i * x * x;
    }
    let mean = s1 / s0;
    2.0 * (s2 / s0 - mean * mean).sqrt()
}

/// Gaussian beam, waist 0.2 mm, after 0.5 m: width against
/// `w0 sqrt(1 + (z/zR)^2)`.
pub fn gaussian_beam() -> Result<(bool, String)> {
    let (w0, lambda, z) = (0.2e-3, 780e-9, 0.5);
    let grid = make_grid(4096, 5e-6, 0.0)?;
    let field = SampledField::from_fn(grid, lambda, |x| Complex64::new((-(x * x) / (w0 * w0)).exp(), 0.0))?;
    let out = propagate(&field, z)?;
    // 1D beam: zR = pi w0^2 / lambda.
    let zr = std::f64::consts::PI * w0 * w0 / lambda;
    let expected = w0 * (1.0 + (z / zr).powi(2)).sqrt();
    let rel = (beam_width(&out) - expected).abs() / expected;
    Ok((rel < 1e-3, format!("relative width error {rel:.2e} (limit 1e-3)")))
}

/// Energy drift over five propagation segments of a speckle field under a
/// Gaussian envelope, low-passed by a Gaussian angular filter so that no
/// energy reaches the window edge.
pub fn parseval_chain(seed: u64) -> Result<(bool, String)> {
    let grid = make_grid(2048, 5e-6, 0.0)?;
    let spec = SourceSpec::new(1e-3, 780e-9, 0.2e-9, 1.0)?;
    let mut frame = frame_ensemble(&spec, &grid, seed, 1)?.remove(0);
    for (x, a) in grid.coordinates().zip(frame.amplitude.iter_mut()) {
        *a *= (-(x * x) / (0.3e-3f64).powi(2)).exp();
    }
    let spectrum = Spectrum::of(&frame);
    let kernel: Vec<Complex64> = spectrum
        .frequencies()
        .iter()
        .map(|fx| Complex64::new((-(780e-9 * fx / 1e-3).powi(2)).exp(), 0.0))
        .collect();
    let mut field = spectrum.filtered_field(&kernel);
    let e0 = field.energy();
    let mut worst: f64 = 0.0;
    for d in [0.1, 0.25, 0.05, 0.3, 0.2] {
        field = propagate(&field, d)?;
        worst = worst.max((field.energy() - e0).abs() / e0);
    }
    Ok((worst < 1e-10, format!("max relative drift {worst:.2e} (limit 1e-10)")))
}

/// `<I^2> / <I>^2 = 2` for unit-exponential intensities.
pub fn exponential_moments(seed: u64) -> Result<(bool, String)> {
    let mut r = rng::stream(seed, Domain::Selftest, 1);
    let pairs: Vec<(f64, f64)> = (0..100_000)
        .map(|_| {
            let i = -open_unit(r.next_u64()).ln();
            (i, i)
        })
        .collect();
    let g = g2_from_pairs(&pairs)?;
    let z = (g.value - 2.0) / g.std_error;
    Ok((
        z.abs() < 5.0,
        format!("g2 = {:.4} +- {:.4} (expected 2)", g.value, g.std_error),
    ))
}

/// Counts from a constant trace are Poisson: mean of 100 repetitions within
/// 3 standard errors of `r T`.
pub fn poisson_counts(seed: u64) -> Result<(bool, String)> {
    let (rate, duration) = (1e5, 0.01);
    let trace = IntensityTrace::constant(rate, duration, 1e-7)?;
    let counts: Vec<f64> = (0..100)
        .map(|k| sample_photons(&trace, 1.0, derive_seed(seed, k)).map(|s| s.len() as f64))
        .collect::<Result<_>>()?;
    let mean = counts.iter().sum::<f64>() / 100.0;
    let expected = rate * duration;
    let se = (expected / 100.0).sqrt();
    let z = (mean - expected) / se;
    Ok((
        z.abs() < 3.0,
        format!("mean count {mean:.1}, expected {expected} +- {se:.1}"),
    ))
}

/// Gaussian moment theorem on propagated speckle: intensity excess against
/// squared field coherence at a pair of points, and g2 = 2 between the two
/// beamsplitter outputs at one point.
pub fn siegert(seed: u64) -> Result<(bool, String)> {
    let grid = make_grid(1024, 5e-6, 0.0)?;
    let spec = SourceSpec::new(0.5e-3, 780e-9, 0.2e-9, 1.0)?;
    let frames = 10_000;
    let (i1, i2) = (512, 512 + 20);
    let mut fields = FieldPairMoments::default();
    let mut split = PairAccumulator::new(100);
    let mut pair = PairAccumulator::new(100);
    for chunk in 0..frames / 500 {
        let batch = frame_ensemble(&spec, &grid, derive_seed(seed, chunk as u64), 500)?;
        for f in batch {
            let f = propagate(&angular_pupil(&f, 2e-3, 0.5)?, 0.3)?;
            let (a, b) = beamsplit(&f);
            fields.push(f.amplitude[i1], f.amplitude[i2]);
            split.push(a.amplitude[i1].norm_sqr(), b.amplitude[i1].norm_sqr());
            pair.push(f.amplitude[i1].norm_sqr(), f.amplitude[i2].norm_sqr());
        }
    }
    let g_split = split.estimate()?;
    let g_pair = pair.estimate()?;
    let coherence = fields.coherence_squared();
    let z_split = (g_split.value - 2.0) / g_split.std_error;
    let z_pair = (g_pair.value - 1.0 - coherence) / g_pair.std_error;
    Ok((
        z_split.abs() < 5.0 && z_pair.abs() < 5.0,
        format!(
            "split g2 = {:.4} +- {:.4}; pair g2-1 = {:.4} +- {:.4} vs |g1|^2 = {coherence:.4}",
            g_split.value,
            g_split.std_error,
            g_pair.value - 1.0,
            g_pair.std_error
        ),
    ))
}

/// Photon bunching: Mandel Q of a thermal stream in windows of tau0/5 is
/// positive at 5 standard errors, a constant stream's is consistent with 0.
pub fn mandel_bunching(seed: u64) -> Result<(bool, String)> {
    let tau0 = 1e-5;
    let (rate, duration, dt) = (2e5, 0.1, tau0 / 500.0);
    let trace = synthesize_intensity_trace(tau0, rate, duration, dt, seed)?;
    let thermal = sample_photons(&trace, 1.0, derive_seed(seed, 1))?;
    let flat = sample_photons(
        &IntensityTrace::constant(rate, duration, dt)?,
        1.0,
        derive_seed(seed, 2),
    )?;
    let qt = mandel_q(&thermal, tau0 / 5.0)?;
    let qf = mandel_q(&flat, tau0 / 5.0)?;
    Ok((
        qt.q > 5.0 * qt.std_error && qf.q.abs() < 5.0 * qf.std_error,
        format!(
            "thermal Q = {:.4} +- {:.4}, constant Q = {:.4} +- {:.4}",
            qt.q, qt.std_error, qf.q, qf.std_error
        ),
    ))
}

/// Independent Poisson streams give a flat TAC histogram at
/// `n_starts * r * bin_width` per bin.
pub fn flat_accidentals(seed: u64) -> Result<(bool, String)> {
    // Occupancy r * range = 4e-3, so first-stop losses stay far below the
    // per-bin Poisson error.
    let (rate, duration, bw) = (1e5, 10.0, 1e-9);
    let trace = IntensityTrace::constant(rate, duration, 1e-7)?;
    let a = sample_photons(&trace, 1.0, derive_seed(seed, 3))?;
    let b = sample_photons(&trace, 1.0, derive_seed(seed, 4))?;
    let h = tac_histogram(&a, &b, (-20e-9, 20e-9), bw)?;
    let expected = a.len() as f64 * rate * bw;
    let worst = h
        .counts()
        .iter()
        .map(|&c| (c as f64 - expected).abs() / expected.sqrt())
        .fold(0.0f64, f64::max);
    Ok((
        worst < 5.0,
        format!(
            "largest per-bin deviation {worst:.2} sigma over {} bins, expected {expected:.1}",
            h.n_bins()
        ),
    ))
}

/// Lens equation and magnification on the reference bench.
pub fn lens_equation() -> Result<(bool, String)> {
    let r = check_lens_equation(&BenchGeometry::new(1.8, 1.475, 0.124, 0.2)?, 5e-3)?;
    Ok((
        r.satisfied && (r.magnification - 2.62).abs() < 0.01,
        format!(
            "|r f| = {:.3e}, magnification {:.4}",
            r.relative_residual, r.magnification
        ),
    ))
}

/// Coherence time from excess 0.11 and 1.3 ns jitter.
pub fn coherence_inversion() -> Result<(bool, String)> {
    let tau = coherence_time_from_excess(0.11, 1.3e-9)?;
    Ok((
        (tau - 0.152e-9).abs() < 0.5e-12,
        format!("tau0 = {:.4} ns (expected 0.152)", tau * 1e9),
    ))
}

pub fn run_all(seed: u64) -> Vec<Outcome> {
    vec![
        outcome("gaussian-beam", gaussian_beam()),
        outcome("parseval-chain", parseval_chain(seed)),
        outcome("exponential-moments", exponential_moments(seed)),
        outcome("poisson-counts", poisson_counts(seed)),
        outcome("siegert", siegert(seed)),
        outcome("mandel-bunching", mandel_bunching(seed)),
        outcome("flat-accidentals", flat_accidentals(seed)),
        outcome("lens-equation", lens_equation()),
        outcome("coherence-inversion", coherence_inversion()),
    ]
}
