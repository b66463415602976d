use crate::detection::DetectorSpec;
use crate::error::{invalid, Result};
use crate::optics::{BenchGeometry, MaskSpec};

use super::predicted_magnification;

/// Quadrature points across the convolution kernel.
const KERNEL_POINTS: usize = 4001;

/// Reference-plane ghost image predicted for point detectors and full
/// coherence, `N + |T(x2 / m)|^2`, smoothed by the detector aperture
/// (top-hat of its diameter) and a Gaussian coherence profile whose FWHM is
/// `coherence_width`. Zero widths skip the corresponding convolution.
pub fn ideal_ghost_curve(
    geometry: &BenchGeometry,
    mask: &MaskSpec,
    n: usize,
    detector: &DetectorSpec,
    coherence_width: f64,
    positions: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(invalid("N must be at least 1"));
    }
    if let Some(k) = mask.feature_count() {
        if k > 0 && k != n {
            return Err(invalid(format!(
                "N = {n} does not match the mask's {k} transparent features"
            )));
        }
    }
    let aperture = detector.aperture_diameter;
    if !(aperture >= 0.0) || !aperture.is_finite() {
        return Err(invalid("detector aperture must be >= 0"));
    }
    if !(coherence_width >= 0.0) || !coherence_width.is_finite() {
        return Err(invalid("coherence width must be >= 0"));
    }
    let m = predicted_magnification(geometry)?;
    let background = n as f64;
    let image = |x2: f64| -> f64 {
        let t = mask.transmission(x2 / m);
        background + t * t
    };
    let sigma = coherence_width / crate::detection::FWHM_PER_SIGMA;
    if aperture == 0.0 && sigma == 0.0 {
        return Ok(positions.iter().map(|&x| (x, image(x))).collect());
    }
    // Kernel density of top-hat (width a) convolved with N(0, sigma^2).
    let kernel = |u: f64| -> f64 {
        match (aperture > 0.0, sigma > 0.0) {
            (true, true) => {
                let s = sigma * std::f64::consts::SQRT_2;
                0.5 * (libm::erf((u + aperture / 2.0) / s) - libm::erf((u - aperture / 2.0) / s)) / aperture
            }
            (true, false) => {
                if u.abs() <= aperture / 2.0 {
                    1.0 / aperture
                } else {
                    0.0
                }
            }
            _ => (-(u * u) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
        }
    };
    let reach = aperture / 2.0 + 8.0 * sigma;
    let h = 2.0 * reach / (KERNEL_POINTS - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..KERNEL_POINTS)
        .map(|i| {
            let u = -reach + i as f64 * h;
            // Trapezoid weights.
            let w = if i == 0 || i == KERNEL_POINTS - 1 { 0.5 } else { 1.0 };
            (u, w * h * kernel(u))
        })
        .collect();
    let norm: f64 = nodes.iter().map(|n| n.1).sum();
    Ok(positions
        .iter()
        .map(|&x| {
            let v: f64 = nodes.iter().map(|&(u, w)| w * image(x - u)).sum();
            (x, v / norm)
        })
        .collect())
}
