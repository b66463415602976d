//! Transverse grids and thermal source realizations.
//!
//! A source frame is one snapshot of a spatially incoherent, quasi-monochromatic
//! disk source: inside the disk every grid sample carries an independent
//! complex circular Gaussian amplitude with unit mean intensity, outside it is
//! exactly zero. Temporal dynamics live in [`crate::detection`]; one frame is
//! one temporal mode.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Domain};

/// Uniform 1D transverse sampling. Sample `i` sits at
/// `center + (i - n_points/2) * pitch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    pitch: f64,
    center: f64,
}

impl Grid1D {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Total extent `n_points * pitch`.
    pub fn span(&self) -> f64 {
        self.n_points as f64 * self.pitch
    }

    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        self.center + (i as f64 - (self.n_points / 2) as f64) * self.pitch
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.coordinate(i))
    }

    pub fn first(&self) -> f64 {
        self.coordinate(0)
    }

    pub fn last(&self) -> f64 {
        self.coordinate(self.n_points - 1)
    }

    /// Index range of samples with `|x - center| <= half_width`, empty when
    /// no sample qualifies.
    pub fn window(&self, center: f64, half_width: f64) -> std::ops::Range<usize> {
        // Small slack so samples sitting exactly on an edge are not lost to
        // rounding in the coordinate arithmetic.
        let eps = 1e-9 * self.pitch;
        let lo = ((center - half_width - eps - self.first()) / self.pitch).ceil();
        let hi = ((center + half_width + eps - self.first()) / self.pitch).floor();
        let lo = lo.max(0.0);
        let hi = hi.min(self.n_points as f64 - 1.0);
        if hi < lo {
            return 0..0;
        }
        lo as usize..hi as usize + 1
    }
}

/// Builds a grid of `n_points` samples spaced `pitch` apart around `center`.
pub fn make_grid(n_points: usize, pitch: f64, center: f64) -> Result<Grid1D> {
    if n_points < 2 || !n_points.is_multiple_of(2) {
        return Err(invalid(format!(
            "grid needs an even number of points >= 2, got {n_points}"
        )));
    }
    if !(pitch > 0.0) || !pitch.is_finite() {
        return Err(invalid(format!("grid pitch must be positive, got {pitch}")));
    }
    if !center.is_finite() {
        return Err(invalid("grid center must be finite"));
    }
    Ok(Grid1D {
        n_points,
        pitch,
        center,
    })
}

/// Complex scalar field sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: Grid1D,
    pub amplitude: Vec<Complex64>,
    pub wavelength: f64,
}

impl SampledField {
    pub fn new(grid: Grid1D, amplitude: Vec<Complex64>, wavelength: f64) -> Result<Self> {
        if amplitude.len() != grid.n_points() {
            return Err(invalid(format!(
                "amplitude length {} does not match grid size {}",
                amplitude.len(),
                grid.n_points()
            )));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self {
            grid,
            amplitude,
            wavelength,
        })
    }

    pub fn zeros(grid: Grid1D, wavelength: f64) -> Result<Self> {
        Self::new(grid, vec![Complex64::new(0.0, 0.0); grid.n_points()], wavelength)
    }

    /// Builds a field from a closure of the transverse coordinate.
    pub fn from_fn(grid: Grid1D, wavelength: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amplitude = grid.coordinates().map(f).collect();
        Self::new(grid, amplitude, wavelength)
    }

    /// `sum |E|^2 * pitch`.
    pub fn energy(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.pitch()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Incoherent disk source: lamp image or pinhole secondary source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub diameter: f64,
    pub wavelength: f64,
    pub coherence_time: f64,
    pub mean_rate: f64,
}

impl SourceSpec {
    pub fn new(diameter: f64, wavelength: f64, coherence_time: f64, mean_rate: f64) -> Result<Self> {
        let spec = Self {
            diameter,
            wavelength,
            coherence_time,
            mean_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("diameter", self.diameter),
            ("wavelength", self.wavelength),
            ("coherence_time", self.coherence_time),
            ("mean_rate", self.mean_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("source {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Identifies one frame of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSeed {
    pub master_seed: u64,
    pub frame_index: u64,
}

impl EnsembleSeed {
    pub fn new(master_seed: u64, frame_index: u64) -> Self {
        Self {
            master_seed,
            frame_index,
        }
    }
}

/// Draws one spatial realization of the source.
///
/// Sample `i` of frame `k` consumes exactly two 64-bit words at a fixed offset
/// of the `(master_seed, k)` stream, so its value does not depend on which
/// other samples or frames were generated.
pub fn generate_source_frame(spec: &SourceSpec, grid: &Grid1D, seed: EnsembleSeed) -> Result<SampledField> {
    spec.validate()?;
    let half = spec.diameter / 2.0;
    if !(grid.first() < -half && half < grid.last()) {
        return Err(Error::Geometry(format!(
            "source diameter {} m does not fit strictly inside grid [{}, {}] m",
            spec.diameter,
            grid.first(),
            grid.last()
        )));
    }
    let mut amplitude = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let inside = grid.window(0.0, half);
    if !inside.is_empty() {
        let mut rng = rng::stream(seed.master_seed, Domain::SourceFrame, seed.frame_index);
        // Two u64 per sample, four 32-bit words.
        rng.set_word_pos(4 * inside.start as u128);
        for a in &mut amplitude[inside] {
            *a = circular_gaussian(rng.next_u64(), rng.next_u64());
        }
    }
    SampledField::new(*grid, amplitude, spec.wavelength)
}

/// Unit-power complex circular Gaussian from two uniform words: the modulus
/// squared is Exp(1), the phase uniform.
#[inline]
pub(crate) fn circular_gaussian(w1: u64, w2: u64) -> Complex64 {
    let r = (-rng::open_unit(w1).ln()).sqrt();
    Complex64::from_polar(r, TAU * rng::open_unit(w2))
}

/// Frames `0..count` of the ensemble for `master_seed`, generated in
/// parallel and returned in index order.
pub fn frame_ensemble(spec: &SourceSpec, grid: &Grid1D, master_seed: u64, count: usize) -> Result<Vec<SampledField>> {
    if count == 0 {
        return Err(invalid("frame ensemble needs count >= 1"));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|k| generate_source_frame(spec, grid, EnsembleSeed::new(master_seed, k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SourceSpec {
        SourceSpec::new(0.5e-3, 780e-9, 0.2e-9, 3e5).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = make_grid(1024, 10e-6, 0.0).unwrap();
        assert!((g.span() - 10.24e-3).abs() < 1e-15);
        assert_eq!(g.coordinate(512), 0.0);
        let g = make_grid(2, 1e-3, 0.0).unwrap();
        assert_eq!(g.coordinate(0), -1e-3);
        assert_eq!(g.coordinate(1), 0.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(3, 1e-3, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(0, 1e-3, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, 0.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, -1.0, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn window_is_inclusive() {
        let g = make_grid(10, 1.0, 0.0).unwrap();
        assert_eq!(g.window(0.0, 1.0), 4..7);
        assert_eq!(g.window(100.0, 1.0), 0..0);
        assert_eq!(g.window(0.0, 100.0), 0..10);
    }

    #[test]
    fn zero_outside_disk() {
        let g = make_grid(512, 5e-6, 0.0).unwrap();
        let f = generate_source_frame(&spec(), &g, EnsembleSeed::new(1, 0)).unwrap();
        for (x, a) in g.coordinates().zip(&f.amplitude) {
            if x.abs() > 0.25e-3 {
                assert_eq!(*a, Complex64::new(0.0, 0.0));
            } else {
                assert_ne!(*a, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn source_must_fit() {
        let g = make_grid(64, 5e-6, 0.0).unwrap();
        assert!(matches!(
            generate_source_frame(&spec(), &g, EnsembleSeed::new(1, 0)),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn ensemble_is_deterministic_and_matches_single_frames() {
        let g = make_grid(256, 5e-6, 0.0).unwrap();
        let a = frame_ensemble(&spec(), &g, 99, 3).unwrap();
        let b = frame_ensemble(&spec(), &g, 99, 3).unwrap();
        assert_eq!(a, b);
        let one = frame_ensemble(&spec(), &g, 99, 1).unwrap();
        assert_eq!(
            one[0],
            generate_source_frame(&spec(), &g, EnsembleSeed::new(99, 0)).unwrap()
        );
        assert_ne!(a[0], a[1]);
        assert!(frame_ensemble(&spec(), &g, 99, 0).is_err());
    }
}
