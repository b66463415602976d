use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::correlation::{visibility, G2Estimate, PairAccumulator, JACKKNIFE_BLOCK};
use crate::detection::DetectorSpec;
use crate::error::{invalid, Error, Result};
use crate::field::{generate_source_frame, EnsembleSeed, Grid1D, SourceSpec};
use crate::optics::{
    check_lens_equation, pupil_function, transfer_function, BenchGeometry, LensReport, MaskSpec, Spectrum,
};

use super::{coherence_width, predicted_magnification};

/// Angular acceptance of the relay that forms the secondary source. Sets the
/// spread of the beam, not its coherence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relay {
    /// Flat-top half-angle in radians.
    pub half_angle: f64,
    /// Raised-cosine roll-off as a fraction of `half_angle`.
    pub taper: f64,
}

impl Default for Relay {
    fn default() -> Self {
        Self {
            half_angle: 3e-3,
            taper: 0.5,
        }
    }
}

impl Relay {
    fn edge(&self) -> f64 {
        self.half_angle * (1.0 + self.taper)
    }
}

/// Whether scan positions see independent frame ensembles, as in a
/// point-by-point scan, or one ensemble read out at every position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameSharing {
    #[default]
    Independent,
    Shared,
}

/// Non-resolving detector behind the mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSpec {
    pub efficiency: f64,
    /// Collection window `(center, diameter)`; `None` collects the whole grid.
    pub aperture: Option<(f64, f64)>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            aperture: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GhostConfig {
    pub source: SourceSpec,
    pub geometry: BenchGeometry,
    pub mask: MaskSpec,
    /// Scanned reference detector; its `center` is replaced by each position.
    pub reference: DetectorSpec,
    pub bucket: BucketSpec,
    pub positions: Vec<f64>,
    pub frames: usize,
    pub temporal_modes: f64,
    pub master_seed: u64,
    pub grid: Grid1D,
    pub relay: Relay,
    /// Relative tolerance on `|r f|` of the lens equation before a warning.
    pub lens_tolerance: f64,
    pub sharing: FrameSharing,
}

impl GhostConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.geometry.validate()?;
        self.reference.validate()?;
        if self.positions.is_empty() {
            return Err(invalid("scan needs at least one position"));
        }
        if self.positions.iter().any(|p| !p.is_finite()) || self.positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("scan positions must be finite and strictly increasing"));
        }
        if self.frames < 100 {
            return Err(invalid(format!(
                "need at least 100 frames per position, got {}",
                self.frames
            )));
        }
        if !(self.temporal_modes >= 1.0) || !self.temporal_modes.is_finite() {
            return Err(invalid(format!(
                "temporal modes must be >= 1, got {}",
                self.temporal_modes
            )));
        }
        if !(self.lens_tolerance > 0.0) {
            return Err(invalid("lens tolerance must be positive"));
        }
        if !(self.relay.half_angle > 0.0) || !(self.relay.taper >= 0.0) {
            return Err(invalid("relay needs a positive half-angle and non-negative taper"));
        }
        if !(self.bucket.efficiency > 0.0 && self.bucket.efficiency <= 1.0) {
            return Err(invalid("bucket efficiency must be in (0, 1]"));
        }
        if let Some((c, d)) = self.bucket.aperture {
            if !(d > 0.0) || !c.is_finite() {
                return Err(invalid("bucket aperture needs a finite center and positive diameter"));
            }
        }
        Ok(())
    }

    /// Jackknife block length: 100 frames, or a twentieth of the ensemble
    /// when that is smaller.
    pub fn block_size(&self) -> usize {
        (self.frames / 20).clamp(1, JACKKNIFE_BLOCK as usize)
    }
}

/// One g2 estimate per scan position, before and after temporal-mode
/// dilution.
#[derive(Debug, Clone)]
pub struct GhostScan {
    pub positions: Vec<f64>,
    /// `1 + (g2 - 1) / M`, errors scaled by `1 / M`.
    pub g2: Vec<G2Estimate>,
    /// Spatial-only estimates, `M = 1`.
    pub raw: Vec<G2Estimate>,
    pub visibility: f64,
    pub peaks: Vec<f64>,
    pub temporal_modes: f64,
    pub magnification: f64,
    pub lens: LensReport,
    /// Van Cittert-Zernike `|mu|^2 >= 1/2` width at the reference plane.
    pub coherence_width: f64,
    pub warnings: Vec<String>,
}

impl GhostScan {
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.positions
            .iter()
            .zip(&self.g2)
            .map(|(p, g)| (*p, g.value))
            .collect()
    }
}

fn detector_window(grid: &Grid1D, center: f64, diameter: f64) -> Result<Range<usize>> {
    let half = diameter / 2.0;
    if center + half < grid.first() || center - half > grid.last() {
        return Err(Error::Geometry(format!(
            "detector at {center} m with diameter {diameter} m lies outside the grid [{}, {}] m",
            grid.first(),
            grid.last()
        )));
    }
    let w = grid.window(center, half);
    if !w.is_empty() {
        return Ok(w);
    }
    // Narrower than one sample: the nearest sample stands in for a point
    // detector.
    let i = ((center - grid.first()) / grid.pitch())
        .round()
        .clamp(0.0, grid.n_points() as f64 - 1.0) as usize;
    Ok(i..i + 1)
}

// Precomputed kernels for the two arms.
struct Bench {
    reference_kernel: Vec<Complex64>,
    lens_kernel: Vec<Complex64>,
    lens_phase: Vec<Complex64>,
    mask_kernel: Vec<Complex64>,
    transmission: Vec<f64>,
    reference_windows: Vec<Range<usize>>,
    bucket_window: Range<usize>,
    reference_scale: f64,
    bucket_scale: f64,
}

fn aliasing(distance: f64, bandwidth: f64, walk_off: f64, limit: f64) -> Error {
    Error::Aliasing {
        distance,
        bandwidth,
        walk_off,
        limit,
    }
}

impl Bench {
    fn new(cfg: &GhostConfig) -> Result<Self> {
        let grid = cfg.grid;
        let g = &cfg.geometry;
        let lambda = cfg.source.wavelength;
        let limit = grid.span() / 2.0;
        let nyquist = 1.0 / (2.0 * grid.pitch());
        let band = cfg.relay.edge() / lambda;
        if band > nyquist {
            return Err(aliasing(0.0, band, f64::INFINITY, limit));
        }
        for z in [g.z1, g.z2] {
            let walk = lambda * z * band;
            if walk > limit {
                return Err(aliasing(z, band, walk, limit));
            }
        }
        // After the lens the local frequency grows by x / (lambda f) across
        // the illuminated part of the lens plane.
        let lit = (cfg.source.diameter / 2.0 + cfg.relay.edge() * g.z2).min(limit);
        let chirp = lit / (lambda * g.f.abs());
        if band + chirp > nyquist {
            return Err(aliasing(g.z3, band + chirp, f64::INFINITY, limit));
        }
        let walk = lambda * g.z3 * (band + chirp);
        if walk > limit {
            return Err(aliasing(g.z3, band + chirp, walk, limit));
        }

        let pupil = pupil_function(&grid, lambda, cfg.relay.half_angle, cfg.relay.taper)?;
        let mul = |a: Vec<Complex64>| -> Vec<Complex64> { a.iter().zip(&pupil).map(|(x, p)| x * p).collect() };
        let reference_kernel = mul(transfer_function(&grid, lambda, g.z1));
        let lens_kernel = mul(transfer_function(&grid, lambda, g.z2));
        let k = -std::f64::consts::PI / (lambda * g.f);
        let lens_phase = grid
            .coordinates()
            .map(|x| Complex64::from_polar(1.0, k * x * x))
            .collect();
        let mask_kernel = transfer_function(&grid, lambda, g.z3);
        let mut transmission = Vec::with_capacity(grid.n_points());
        for x in grid.coordinates() {
            let t = cfg.mask.transmission(x);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Contract(format!(
                    "mask `{}` transmission {t} at x = {x} m outside [0, 1]",
                    cfg.mask.description
                )));
            }
            transmission.push(t);
        }
        let reference_windows = cfg
            .positions
            .iter()
            .map(|&p| detector_window(&grid, p, cfg.reference.aperture_diameter))
            .collect::<Result<Vec<_>>>()?;
        let bucket_window = match cfg.bucket.aperture {
            Some((c, d)) => detector_window(&grid, c, d)?,
            None => 0..grid.n_points(),
        };
        Ok(Self {
            reference_kernel,
            lens_kernel,
            lens_phase,
            mask_kernel,
            transmission,
            reference_windows,
            bucket_window,
            reference_scale: cfg.reference.efficiency * grid.pitch(),
            bucket_scale: cfg.bucket.efficiency * grid.pitch(),
        })
    }

    /// Bucket signal and the reference signal at the selected positions for
    /// one source frame.
    fn frame(&self, cfg: &GhostConfig, index: u64, positions: &[usize]) -> Result<(f64, Vec<f64>)> {
        let src = generate_source_frame(&cfg.source, &cfg.grid, EnsembleSeed::new(cfg.master_seed, index))?;
        let spectrum = Spectrum::of(&src);

        let reference = spectrum.filtered_field(&self.reference_kernel);
        let refs = positions
            .iter()
            .map(|&p| {
                let s: f64 = reference.amplitude[self.reference_windows[p].clone()]
                    .iter()
                    .map(|a| a.norm_sqr())
                    .sum();
                s * self.reference_scale
            })
            .collect();

        let mut at_lens = spectrum.filtered_field(&self.lens_kernel);
        for (a, p) in at_lens.amplitude.iter_mut().zip(&self.lens_phase) {
            *a *= p;
        }
        let at_mask = Spectrum::of(&at_lens).filtered_field(&self.mask_kernel);
        let bucket: f64 = self
            .bucket_window
            .clone()
            .map(|i| (at_mask.amplitude[i] * self.transmission[i]).norm_sqr())
            .sum();
        Ok((bucket * self.bucket_scale, refs))
    }
}

/// Monte Carlo ghost-imaging scan.
///
/// Arm B propagates each source frame `z1` to the reference plane; arm A
/// propagates it `z2` to the lens, applies the lens, propagates `z3` to the
/// mask and integrates the transmitted intensity. Both arms share the source
/// spectrum, which passes through the relay pupil first.
pub fn run_ghost(cfg: &GhostConfig) -> Result<GhostScan> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let lens = check_lens_equation(&cfg.geometry, cfg.lens_tolerance)?;
    if !lens.satisfied {
        warnings.push(format!(
            "lens equation residual |r f| = {:.3e} exceeds tolerance {}",
            lens.relative_residual, cfg.lens_tolerance
        ));
    }
    if let Some(n) = cfg.mask.feature_count() {
        if n == 0 {
            warnings.push("mask is opaque; the bucket signal is zero".into());
        }
    }
    let magnification = predicted_magnification(&cfg.geometry)?;
    let bench = Bench::new(cfg)?;
    let block = cfg.block_size();
    let n_pos = cfg.positions.len();
    let n_blocks = cfg.frames.div_ceil(block);

    // Work units are (position group, block); each yields one accumulator per
    // position in the group. Units are merged in a fixed order.
    let groups: Vec<Vec<usize>> = match cfg.sharing {
        FrameSharing::Shared => vec![(0..n_pos).collect()],
        FrameSharing::Independent => (0..n_pos).map(|p| vec![p]).collect(),
    };
    let units: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..n_blocks).map(move |b| (g, b)))
        .collect();
    let partials: Vec<Vec<PairAccumulator>> = units
        .par_iter()
        .map(|&(g, b)| {
            let members = &groups[g];
            let mut accs = vec![PairAccumulator::new(block as u64); members.len()];
            let first = b * block;
            let last = ((b + 1) * block).min(cfg.frames);
            for f in first..last {
                let index = match cfg.sharing {
                    FrameSharing::Shared => f as u64,
                    FrameSharing::Independent => (members[0] * cfg.frames + f) as u64,
                };
                let (bucket, refs) = bench.frame(cfg, index, members)?;
                for (acc, r) in accs.iter_mut().zip(refs) {
                    acc.push(bucket, r);
                }
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;

    let mut totals: Vec<PairAccumulator> = (0..n_pos).map(|_| PairAccumulator::new(block as u64)).collect();
    for (&(g, _), accs) in units.iter().zip(partials) {
        for (&p, acc) in groups[g].iter().zip(accs) {
            totals[p].merge(acc);
        }
    }
    let raw = totals
        .iter()
        .enumerate()
        .map(|(p, acc)| {
            acc.estimate().map_err(|e| match e {
                Error::DegenerateData(m) => Error::DegenerateData(format!("position {} m: {m}", cfg.positions[p])),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = cfg.temporal_modes;
    let g2: Vec<G2Estimate> = raw
        .iter()
        .map(|e| G2Estimate {
            value: 1.0 + (e.value - 1.0) / m,
            std_error: e.std_error / m,
            n_samples: e.n_samples,
        })
        .collect();
    let curve: Vec<(f64, f64)> = cfg.positions.iter().zip(&g2).map(|(p, e)| (*p, e.value)).collect();
    let vis = if curve.len() >= 2 { visibility(&curve)? } else { 0.0 };
    let peaks = find_peaks(&cfg.positions, &g2, cfg.mask.feature_count().filter(|n| *n > 0));
    Ok(GhostScan {
        positions: cfg.positions.clone(),
        g2,
        raw,
        visibility: vis,
        peaks,
        temporal_modes: m,
        magnification,
        lens,
        coherence_width: coherence_width(cfg.source.wavelength, cfg.geometry.z1, cfg.source.diameter)?,
        warnings,
    })
}

/// Positions of significant local maxima of a g2 scan, refined by a parabola
/// through each maximum and its neighbours.
///
/// A maximum counts when its excess over 1 is above three standard errors.
/// With `count`, only the `count` highest maxima are kept. Output is sorted
/// by position.
pub fn find_peaks(positions: &[f64], g2: &[G2Estimate], count: Option<usize>) -> Vec<f64> {
    let n = positions.len().min(g2.len());
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (l, c, r) = (g2[i - 1].value, g2[i].value, g2[i + 1].value);
        let err = if g2[i].std_error.is_finite() {
            g2[i].std_error
        } else {
            0.0
        };
        if c >= l && c > r && c - 1.0 > 3.0 * err {
            let (x0, x1, x2) = (positions[i - 1], positions[i], positions[i + 1]);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let a = (x2 * (c - l) + x1 * (l - r) + x0 * (r - c)) / denom;
            let b = (x2 * x2 * (l - c) + x1 * x1 * (r - l) + x0 * x0 * (c - r)) / denom;
            let vertex = if a < 0.0 { (-b / (2.0 * a)).clamp(x0, x2) } else { x1 };
            found.push((vertex, c));
        }
    }
    if let Some(k) = count {
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found.truncate(k);
    }
    let mut peaks: Vec<f64> = found.into_iter().map(|p| p.0).collect();
    peaks.sort_by(f64::total_cmp);
    peaks
}
