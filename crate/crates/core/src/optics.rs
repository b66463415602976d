//! Linear optical elements acting on [`SampledField`]s.
//!
//! Free-space propagation uses the paraxial angular-spectrum transfer function
//! `exp(-i pi lambda z fx^2)` on a grid zero-padded to twice its length. The
//! guard band is absorbing: light that walks out of the window is cropped, it
//! never wraps back in. A call is rejected when the field's occupied spatial
//! bandwidth `B` would carry light further than the guard band,
//! `lambda * z * B > span / 2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::field::{Grid1D, SampledField};

/// Spectral energy fraction allowed beyond the occupied bandwidth.
pub const BANDWIDTH_TAIL: f64 = 1e-6;

type Plan = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plan(len: usize) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        })
        .clone()
}

/// Angular spectrum of a field on the doubled (guard-banded) grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid1D,
    wavelength: f64,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(field: &SampledField) -> Self {
        let n = field.grid.n_points();
        let len = 2 * n;
        let mut data = vec![Complex64::new(0.0, 0.0); len];
        data[n / 2..n / 2 + n].copy_from_slice(&field.amplitude);
        plan(len).0.process(&mut data);
        Self {
            grid: field.grid,
            wavelength: field.wavelength,
            data,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Spatial frequency (1/m) of every padded bin, FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        spatial_frequencies(&self.grid)
    }

    /// Smallest `|fx|` such that at most [`BANDWIDTH_TAIL`] of the spectral
    /// energy lies above it.
    pub fn occupied_bandwidth(&self) -> f64 {
        let len = self.data.len();
        let half = len / 2;
        // Energy per |k|, k = 0..=half.
        let mut per_k = vec![0.0; half + 1];
        for (k, c) in self.data.iter().enumerate() {
            let idx = if k <= half { k } else { len - k };
            per_k[idx] += c.norm_sqr();
        }
        let total: f64 = per_k.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let df = 1.0 / (len as f64 * self.grid.pitch());
        let budget = BANDWIDTH_TAIL * total;
        let mut tail = 0.0;
        for k in (0..=half).rev() {
            tail += per_k[k];
            if tail > budget {
                return k as f64 * df;
            }
        }
        0.0
    }

    /// Checks that propagating by `distance` keeps the occupied band inside
    /// the guard band.
    pub fn check_walk_off(&self, distance: f64) -> Result<()> {
        let bandwidth = self.occupied_bandwidth();
        let walk_off = self.wavelength * distance * bandwidth;
        let limit = self.grid.span() / 2.0;
        if walk_off > limit * (1.0 + 1e-12) {
            return Err(Error::Aliasing {
                distance,
                bandwidth,
                walk_off,
                limit,
            });
        }
        Ok(())
    }

    pub fn apply(&mut self, kernel: &[Complex64]) {
        assert_eq!(kernel.len(), self.data.len(), "kernel length mismatch");
        for (d, k) in self.data.iter_mut().zip(kernel) {
            *d *= k;
        }
    }

    /// Back to the spatial grid: inverse transform and crop the guard band.
    pub fn to_field(&self) -> SampledField {
        let n = self.grid.n_points();
        let len = self.data.len();
        let mut buf = self.data.clone();
        plan(len).1.process(&mut buf);
        let scale = 1.0 / len as f64;
        let amplitude = buf[n / 2..n / 2 + n].iter().map(|c| c * scale).collect();
        SampledField {
            grid: self.grid,
            amplitude,
            wavelength: self.wavelength,
        }
    }

    /// `to_field` of a filtered copy, leaving this spectrum untouched.
    pub fn filtered_field(&self, kernel: &[Complex64]) -> SampledField {
        let mut s = self.clone();
        s.apply(kernel);
        s.to_field()
    }
}

fn spatial_frequencies(grid: &Grid1D) -> Vec<f64> {
    let len = 2 * grid.n_points();
    let df = 1.0 / (len as f64 * grid.pitch());
    (0..len)
        .map(|k| {
            let signed = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
            signed * df
        })
        .collect()
}

/// Paraxial free-space transfer function for one grid, wavelength and
/// distance. Build once, apply to every frame of an ensemble.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid1D,
    wavelength: f64,
    distance: f64,
    kernel: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: Grid1D, wavelength: f64, distance: f64) -> Result<Self> {
        if !(distance >= 0.0) || !distance.is_finite() {
            return Err(invalid(format!(
                "propagation distance must be finite and >= 0, got {distance}"
            )));
        }
        if !(wavelength > 0.0) {
            return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self {
            grid,
            wavelength,
            distance,
            kernel: transfer_function(&grid, wavelength, distance),
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn kernel(&self) -> &[Complex64] {
        &self.kernel
    }

    pub fn apply(&self, field: &SampledField) -> Result<SampledField> {
        if field.grid != self.grid || field.wavelength != self.wavelength {
            return Err(invalid("field grid or wavelength does not match the propagator"));
        }
        if self.distance == 0.0 {
            return Ok(field.clone());
        }
        let mut spectrum = Spectrum::of(field);
        spectrum.check_walk_off(self.distance)?;
        spectrum.apply(&self.kernel);
        Ok(spectrum.to_field())
    }
}

/// `exp(-i pi lambda z fx^2)` sampled on the padded frequency grid.
pub fn transfer_function(grid: &Grid1D, wavelength: f64, distance: f64) -> Vec<Complex64> {
    spatial_frequencies(grid)
        .into_iter()
        .map(|fx| Complex64::from_polar(1.0, -PI * wavelength * distance * fx * fx))
        .collect()
}

/// Paraxial free-space propagation by `distance` meters.
pub fn propagate(field: &SampledField, distance: f64) -> Result<SampledField> {
    Propagator::new(field.grid, field.wavelength, distance)?.apply(field)
}

/// Angular acceptance of a relay: flat amplitude transmission for ray angles
/// up to `half_angle`, raised-cosine roll-off to zero at
/// `half_angle * (1 + taper)`.
pub fn pupil_function(grid: &Grid1D, wavelength: f64, half_angle: f64, taper: f64) -> Result<Vec<Complex64>> {
    if !(half_angle > 0.0) || !(taper >= 0.0) {
        return Err(invalid(format!(
            "pupil needs half_angle > 0 and taper >= 0, got {half_angle}, {taper}"
        )));
    }
    let edge = half_angle * (1.0 + taper);
    Ok(spatial_frequencies(grid)
        .into_iter()
        .map(|fx| {
            let angle = (wavelength * fx).abs();
            let t = if angle <= half_angle {
                1.0
            } else if angle >= edge {
                0.0
            } else {
                0.5 * (1.0 + (PI * (angle - half_angle) / (edge - half_angle)).cos())
            };
            Complex64::new(t, 0.0)
        })
        .collect())
}

/// Low-pass filters the field's angular spectrum (see [`pupil_function`]).
pub fn angular_pupil(field: &SampledField, half_angle: f64, taper: f64) -> Result<SampledField> {
    let kernel = pupil_function(&field.grid, field.wavelength, half_angle, taper)?;
    Ok(Spectrum::of(field).filtered_field(&kernel))
}

/// Thin lens of focal length `f` centered on the optical axis `x = 0`.
pub fn apply_lens(field: &SampledField, f: f64) -> Result<SampledField> {
    if f == 0.0 || !f.is_finite() {
        return Err(invalid(format!("focal length must be finite and nonzero, got {f}")));
    }
    let k = -PI / (field.wavelength * f);
    let amplitude = field
        .grid
        .coordinates()
        .zip(&field.amplitude)
        .map(|(x, a)| a * Complex64::from_polar(1.0, k * x * x))
        .collect();
    Ok(SampledField {
        amplitude,
        ..field.clone()
    })
}

/// Amplitude transmission of an object mask.
#[derive(Clone)]
pub enum MaskShape {
    Open,
    Opaque,
    /// Equal circular holes (1D: slits) of `diameter` at `centers`.
    Pinholes {
        centers: Vec<f64>,
        diameter: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MaskShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskShape::Open => write!(f, "Open"),
            MaskShape::Opaque => write!(f, "Opaque"),
            MaskShape::Pinholes { centers, diameter } => f
                .debug_struct("Pinholes")
                .field("centers", centers)
                .field("diameter", diameter)
                .finish(),
            MaskShape::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskSpec {
    pub shape: MaskShape,
    pub description: String,
}

impl MaskSpec {
    pub fn open() -> Self {
        Self {
            shape: MaskShape::Open,
            description: "open".into(),
        }
    }

    pub fn opaque() -> Self {
        Self {
            shape: MaskShape::Opaque,
            description: "opaque".into(),
        }
    }

    pub fn custom(description: impl Into<String>, t: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            shape: MaskShape::Custom(Arc::new(t)),
            description: description.into(),
        }
    }

    pub fn transmission(&self, x: f64) -> f64 {
        match &self.shape {
            MaskShape::Open => 1.0,
            MaskShape::Opaque => 0.0,
            MaskShape::Pinholes { centers, diameter } => {
                let r = diameter / 2.0 * (1.0 + 1e-12);
                if centers.iter().any(|c| (x - c).abs() <= r) {
                    1.0
                } else {
                    0.0
                }
            }
            MaskShape::Custom(t) => t(x),
        }
    }

    /// Number of transparent features, when the shape defines one.
    pub fn feature_count(&self) -> Option<usize> {
        match &self.shape {
            MaskShape::Open => Some(1),
            MaskShape::Opaque => Some(0),
            MaskShape::Pinholes { centers, .. } => Some(centers.len()),
            MaskShape::Custom(_) => None,
        }
    }

    /// Feature centers for pinhole masks.
    pub fn feature_centers(&self) -> Vec<f64> {
        match &self.shape {
            MaskShape::Pinholes { centers, .. } => centers.clone(),
            _ => Vec::new(),
        }
    }
}

/// Two holes of `hole_diameter` with centers `separation` apart, symmetric
/// about the axis.
pub fn double_pinhole(separation: f64, hole_diameter: f64) -> Result<MaskSpec> {
    pinhole_row(2, separation, hole_diameter)
}

/// `count` equal holes on a line, pitch `separation`, centered on the axis.
pub fn pinhole_row(count: usize, separation: f64, hole_diameter: f64) -> Result<MaskSpec> {
    if count == 0 {
        return Err(invalid("pinhole row needs at least one hole"));
    }
    if !(hole_diameter > 0.0) {
        return Err(invalid(format!("hole diameter must be positive, got {hole_diameter}")));
    }
    if count > 1 && !(separation > hole_diameter) {
        return Err(invalid(format!(
            "holes overlap: separation {separation} m <= diameter {hole_diameter} m"
        )));
    }
    let offset = (count as f64 - 1.0) / 2.0;
    let centers = (0..count).map(|i| (i as f64 - offset) * separation).collect();
    Ok(MaskSpec {
        shape: MaskShape::Pinholes {
            centers,
            diameter: hole_diameter,
        },
        description: format!(
            "{count} pinhole(s), diameter {:.3} mm, pitch {:.3} mm",
            hole_diameter * 1e3,
            separation * 1e3
        ),
    })
}

/// Multiplies the field by the mask's amplitude transmission.
pub fn apply_mask(field: &SampledField, mask: &MaskSpec) -> Result<SampledField> {
    let mut amplitude = Vec::with_capacity(field.amplitude.len());
    for (x, a) in field.grid.coordinates().zip(&field.amplitude) {
        let t = mask.transmission(x);
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Contract(format!(
                "mask `{}` transmission {t} at x = {x} m outside [0, 1]",
                mask.description
            )));
        }
        amplitude.push(a * t);
    }
    Ok(SampledField {
        amplitude,
        ..field.clone()
    })
}

/// Lossless 50/50 splitter: two identical copies at `1/sqrt(2)` amplitude.
pub fn beamsplit(field: &SampledField) -> (SampledField, SampledField) {
    let amplitude: Vec<Complex64> = field
        .amplitude
        .iter()
        .map(|a| a * std::f64::consts::FRAC_1_SQRT_2)
        .collect();
    let out = SampledField {
        amplitude,
        ..field.clone()
    };
    (out.clone(), out)
}

/// Distances of the lensed ghost-imaging bench, all measured along the
/// unfolded optical path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchGeometry {
    /// Secondary source to the scanned reference collimator.
    pub z1: f64,
    /// Secondary source to the imaging lens.
    pub z2: f64,
    /// Imaging lens to the object mask.
    pub z3: f64,
    /// Focal length of the imaging lens.
    pub f: f64,
}

impl BenchGeometry {
    pub fn new(z1: f64, z2: f64, z3: f64, f: f64) -> Result<Self> {
        let g = Self { z1, z2, z3, f };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("z1", self.z1), ("z2", self.z2), ("z3", self.z3), ("f", self.f)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("bench distance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            z1: self.z1 * k,
            z2: self.z2 * k,
            z3: self.z3 * k,
            f: self.f * k,
        }
    }
}

/// Outcome of the signed thin-lens check `1/(z2-z1) + 1/z3 = 1/f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensReport {
    /// `1/(z2-z1) + 1/z3 - 1/f` in 1/m.
    pub residual: f64,
    /// `|residual * f|`.
    pub relative_residual: f64,
    pub satisfied: bool,
    /// `(z1-z2)/z3`, reference-plane distance per object-plane distance.
    pub magnification: f64,
    /// `z3 == f`: the image sits at infinity, no finite bench satisfies it.
    pub infinite_conjugate: bool,
    /// The `z2 - z1` that would satisfy the equation for this `z3` and `f`.
    pub conjugate_offset: Option<f64>,
}

pub fn check_lens_equation(geom: &BenchGeometry, tolerance: f64) -> Result<LensReport> {
    if geom.z2 == geom.z1 {
        return Err(Error::DegenerateGeometry("z2 equals z1, 1/(z2-z1) is undefined".into()));
    }
    if geom.z3 == 0.0 {
        return Err(Error::DegenerateGeometry("z3 is zero".into()));
    }
    if geom.f == 0.0 {
        return Err(Error::DegenerateGeometry("focal length is zero".into()));
    }
    let residual = 1.0 / (geom.z2 - geom.z1) + 1.0 / geom.z3 - 1.0 / geom.f;
    let relative_residual = (residual * geom.f).abs();
    let infinite_conjugate = geom.z3 == geom.f;
    let conjugate_offset = conjugate_image_offset(geom.z3, geom.f);
    Ok(LensReport {
        residual,
        relative_residual,
        satisfied: !infinite_conjugate && relative_residual <= tolerance,
        magnification: (geom.z1 - geom.z2) / geom.z3,
        infinite_conjugate,
        conjugate_offset,
    })
}

/// Solves the signed lens equation for `z2 - z1`; `None` at `z3 == f`.
pub fn conjugate_image_offset(z3: f64, f: f64) -> Option<f64> {
    let inv = 1.0 / f - 1.0 / z3;
    if inv == 0.0 {
        None
    } else {
        Some(1.0 / inv)
    }
}
