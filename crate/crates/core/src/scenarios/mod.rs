//! The bench experiments: HBT timing correlation, the lensed ghost-imaging
//! scan and the analytic ghost-image reference curve.

mod ghost;
mod hbt;
mod ideal;

pub use ghost::{find_peaks, run_ghost, BucketSpec, FrameSharing, GhostConfig, GhostScan, Relay};
pub use hbt::{analyze_histogram, run_hbt, HbtAnalysis, HbtConfig, HbtResult, Sampler, TacSettings};
pub use ideal::ideal_ghost_curve;

use crate::error::{invalid, Error, Result};
use crate::optics::BenchGeometry;

/// `(z1 - z2) / z3`: reference-plane distance per mask-plane distance.
pub fn predicted_magnification(geometry: &BenchGeometry) -> Result<f64> {
    if geometry.z3 == 0.0 || !geometry.z3.is_finite() {
        return Err(Error::DegenerateGeometry("z3 must be nonzero".into()));
    }
    if geometry.z1 == geometry.z2 {
        return Err(Error::DegenerateGeometry(
            "z1 equals z2, the image plane sits on the lens".into(),
        ));
    }
    Ok((geometry.z1 - geometry.z2) / geometry.z3)
}

/// Number of independent temporal modes inside the coincidence response:
/// `(2 * peak_halfwidth + combined_jitter_fwhm) / coherence_time`, at least 1.
pub fn suggested_temporal_modes(peak_halfwidth: f64, combined_jitter_fwhm: f64, coherence_time: f64) -> Result<f64> {
    if !(peak_halfwidth >= 0.0) || !(combined_jitter_fwhm >= 0.0) || !(coherence_time > 0.0) {
        return Err(invalid(
            "temporal modes need non-negative windows and a positive coherence time",
        ));
    }
    Ok(((2.0 * peak_halfwidth + combined_jitter_fwhm) / coherence_time).max(1.0))
}

/// Half-width point of `sinc^2`: `sinc^2(v) = 1/2` at `v = 1.391557...`.
const SINC2_HALF: f64 = 1.391_557_378_251_510_2;

/// Half-width point of the Airy pattern: `(2 J1(v)/v)^2 = 1/2` at
/// `v = 1.616339...`.
const AIRY_HALF: f64 = 1.616_339_948_310_703;

/// Full width of the region where `|mu|^2 >= 1/2` at `distance` from a
/// uniform incoherent strip source of width `source_diameter`:
/// `0.886 * lambda * z / D`.
pub fn coherence_width(wavelength: f64, distance: f64, source_diameter: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !(distance > 0.0) || !(source_diameter > 0.0) {
        return Err(invalid(
            "coherence width needs positive wavelength, distance and source size",
        ));
    }
    Ok(2.0 * SINC2_HALF / std::f64::consts::PI * wavelength * distance / source_diameter)
}

/// Area of the disk where `|mu|^2 >= 1/2` at `distance` from a uniform
/// circular source of diameter `source_diameter`.
pub fn coherence_area(wavelength: f64, distance: f64, source_diameter: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !(distance > 0.0) || !(source_diameter > 0.0) {
        return Err(invalid(
            "coherence area needs positive wavelength, distance and source size",
        ));
    }
    let r = AIRY_HALF / std::f64::consts::PI * wavelength * distance / source_diameter;
    Ok(std::f64::consts::PI * r * r)
}
