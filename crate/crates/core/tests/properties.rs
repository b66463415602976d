use num_complex::Complex64;
use proptest::prelude::*;

use thermal_ghost::config::parse_config;
use thermal_ghost::correlation::{fit_gaussian, g2_from_pairs, PairAccumulator, Weighting};
use thermal_ghost::field::{generate_source_frame, make_grid, EnsembleSeed, SampledField, SourceSpec};
use thermal_ghost::optics::{
    apply_lens, apply_mask, check_lens_equation, double_pinhole, propagate, BenchGeometry, Spectrum,
};

/// Compact, band-limited test field: speckle under a Gaussian envelope with a
/// Gaussian angular filter, so nothing reaches the window edge.
fn compact_speckle(seed: u64, envelope: f64, angle: f64) -> SampledField {
    let grid = make_grid(1024, 10e-6, 0.0).unwrap();
    let spec = SourceSpec::new(2e-3, 780e-9, 0.2e-9, 1.0).unwrap();
    let mut frame = generate_source_frame(&spec, &grid, EnsembleSeed::new(seed, 0)).unwrap();
    for (x, a) in grid.coordinates().zip(frame.amplitude.iter_mut()) {
        *a *= (-(x * x) / (envelope * envelope)).exp();
    }
    let spectrum = Spectrum::of(&frame);
    let kernel: Vec<Complex64> = spectrum
        .frequencies()
        .iter()
        .map(|fx| Complex64::new((-(780e-9 * fx / angle).powi(2)).exp(), 0.0))
        .collect();
    spectrum.filtered_field(&kernel)
}

fn max_diff(a: &SampledField, b: &SampledField) -> f64 {
    a.amplitude
        .iter()
        .zip(&b.amplitude)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn peak_norm(a: &SampledField) -> f64 {
    a.amplitude.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagation_preserves_energy_and_composes(
        seed in any::<u64>(),
        d1 in 0.0f64..0.4,
        d2 in 0.0f64..0.4,
    ) {
        let field = compact_speckle(seed, 0.4e-3, 1e-3);
        let e0 = field.energy();
        let a = propagate(&field, d1).unwrap();
        let ab = propagate(&a, d2).unwrap();
        let direct = propagate(&field, d1 + d2).unwrap();
        prop_assert!((a.energy() - e0).abs() / e0 < 1e-10);
        prop_assert!((ab.energy() - e0).abs() / e0 < 1e-10);
        prop_assert!(max_diff(&ab, &direct) < 1e-9 * peak_norm(&field));
    }

    #[test]
    fn lens_and_mask_commute(seed in any::<u64>(), f in 0.05f64..1.0, sep in 0.2e-3f64..2e-3) {
        let field = compact_speckle(seed, 1e-3, 2e-3);
        let mask = double_pinhole(sep, 0.1e-3).unwrap();
        let lm = apply_mask(&apply_lens(&field, f).unwrap(), &mask).unwrap();
        let ml = apply_lens(&apply_mask(&field, &mask).unwrap(), f).unwrap();
        prop_assert!(max_diff(&lm, &ml) < 1e-14 * peak_norm(&field));
    }

    #[test]
    fn source_amplitudes_are_circular(seed in any::<u64>()) {
        let grid = make_grid(8192, 1e-6, 0.0).unwrap();
        let spec = SourceSpec::new(8e-3, 780e-9, 0.2e-9, 1.0).unwrap();
        let frame = generate_source_frame(&spec, &grid, EnsembleSeed::new(seed, 3)).unwrap();
        let inside: Vec<Complex64> = frame.amplitude.iter().copied().filter(|a| a.norm_sqr() > 0.0).collect();
        let n = inside.len() as f64;
        let m2: Complex64 = inside.iter().map(|a| a * a).sum::<Complex64>() / n;
        let p2 = inside.iter().map(|a| a.norm_sqr()).sum::<f64>() / n;
        let p4 = inside.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>() / n;
        // n is ~8000: pseudo-covariance ~ 1/sqrt(n), kurtosis spread ~ 0.05.
        prop_assert!(m2.norm() < 0.06, "pseudo-covariance {}", m2.norm());
        prop_assert!((p2 - 1.0).abs() < 0.06, "mean intensity {p2}");
        prop_assert!((p4 / (p2 * p2) - 2.0).abs() < 0.3, "kurtosis ratio {}", p4 / (p2 * p2));
    }

    #[test]
    fn g2_is_scale_invariant(
        values in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 200..400),
        a in 1e-6f64..1e6,
        b in 1e-6f64..1e6,
    ) {
        let g = g2_from_pairs(&values).unwrap();
        let scaled: Vec<(f64, f64)> = values.iter().map(|&(x, y)| (a * x, b * y)).collect();
        let gs = g2_from_pairs(&scaled).unwrap();
        prop_assert!((g.value - gs.value).abs() < 1e-9 * g.value);
        prop_assert!((g.std_error - gs.std_error).abs() < 1e-6 * g.std_error.max(1e-12));
    }

    #[test]
    fn accumulator_merge_matches_sequential(
        values in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 400..800),
        cut_blocks in 1usize..4,
    ) {
        let cut = cut_blocks * 100;
        let mut whole = PairAccumulator::new(100);
        for &(x, y) in &values {
            whole.push(x, y);
        }
        let mut left = PairAccumulator::new(100);
        let mut right = PairAccumulator::new(100);
        for &(x, y) in &values[..cut] {
            left.push(x, y);
        }
        for &(x, y) in &values[cut..] {
            right.push(x, y);
        }
        left.merge(right);
        prop_assert_eq!(left.len(), whole.len());
        let (a, b) = (left.estimate().unwrap(), whole.estimate().unwrap());
        prop_assert!((a.value - b.value).abs() < 1e-12 * b.value);
        prop_assert!((a.std_error - b.std_error).abs() < 1e-9 * b.std_error.max(1e-12));
    }

    #[test]
    fn gaussian_fit_is_translation_covariant(
        shift in -50e-9f64..50e-9,
        center in 2e-9f64..4e-9,
        sigma in 0.3e-9f64..0.8e-9,
        amplitude in 20.0f64..200.0,
    ) {
        let x: Vec<f64> = (0..120).map(|i| i as f64 * 0.05e-9).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| (10.0 + amplitude * (-0.5 * ((t - center) / sigma).powi(2)).exp()).round())
            .collect();
        let f0 = fit_gaussian(&x, &y, Weighting::Poisson).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let f1 = fit_gaussian(&xs, &y, Weighting::Poisson).unwrap();
        prop_assert!((f1.center - f0.center - shift).abs() < 1e-6 * f0.fwhm);
        prop_assert!((f1.fwhm - f0.fwhm).abs() < 1e-6 * f0.fwhm);
        prop_assert!((f1.amplitude - f0.amplitude).abs() < 1e-6 * f0.amplitude);
    }

    #[test]
    fn lens_verdict_is_scale_invariant(k in 0.1f64..10.0) {
        let bench = BenchGeometry::new(1.8, 1.475, 0.124, 0.2).unwrap();
        let base = check_lens_equation(&bench, 5e-3).unwrap();
        let scaled = check_lens_equation(&bench.scaled(k), 5e-3).unwrap();
        prop_assert_eq!(base.satisfied, scaled.satisfied);
        prop_assert!((base.relative_residual - scaled.relative_residual).abs() < 1e-9);
        prop_assert!((base.magnification - scaled.magnification).abs() < 1e-9 * base.magnification);
    }

    #[test]
    fn magnification_scales_with_image_distance(k in 0.2f64..5.0) {
        let bench = BenchGeometry::new(1.8, 1.475, 0.124, 0.2).unwrap();
        let base = check_lens_equation(&bench, 5e-3).unwrap();
        let stretched = BenchGeometry::new(bench.z2 + k * (bench.z1 - bench.z2), bench.z2, bench.z3, bench.f).unwrap();
        let r = check_lens_equation(&stretched, 5e-3).unwrap();
        prop_assert!((r.magnification - k * base.magnification).abs() < 1e-9 * k * base.magnification);
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        z1 in 0.5f64..5.0,
        z3 in 0.01f64..0.5,
        frames in 100u64..100_000,
        jitter in 0.1f64..5.0,
        shared in any::<bool>(),
    ) {
        let text = format!(
            "[run]\nseed = {seed}\n[geometry]\nz1 = {z1} m\nz2 = 1 m\nz3 = {z3} m\nf = 20 cm\n\
             [detector1]\njitter_fwhm = {jitter} ns\n[scan]\nstart = -5 mm\nstop = 5 mm\nstep = 0.5 mm\n\
             frames = {frames}\nsharing = {}\n",
            if shared { "shared" } else { "independent" }
        );
        let a = parse_config(&text).unwrap();
        let b = parse_config(&a.to_text()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.to_text(), b.to_text());
    }
}
