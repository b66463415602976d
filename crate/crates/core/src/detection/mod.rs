//! Photodetection: finite apertures, bucket detection, thermal intensity
//! processes, photon sampling and timing jitter.

mod emitter;

use std::io::{BufRead, Write};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::field::{circular_gaussian, SampledField};
use crate::rng::{self, Domain};

pub use emitter::{sample_thermal_streams, EmitterStats, INTENSITY_CAP, LINK_GAP_COHERENCE_TIMES};

/// `2 * sqrt(2 ln 2)`, Gaussian FWHM per standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub center: f64,
    pub aperture_diameter: f64,
    pub efficiency: f64,
    /// Gaussian timing jitter of this channel, FWHM in seconds.
    pub jitter_fwhm: f64,
    /// Non-paralyzable dead time in seconds, 0 by default.
    pub dead_time: f64,
    /// Dark count rate in counts/second, 0 by default.
    pub dark_rate: f64,
}

impl DetectorSpec {
    pub fn new(center: f64, aperture_diameter: f64, efficiency: f64, jitter_fwhm: f64) -> Result<Self> {
        let d = Self {
            center,
            aperture_diameter,
            efficiency,
            jitter_fwhm,
            dead_time: 0.0,
            dark_rate: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aperture_diameter > 0.0) || !self.aperture_diameter.is_finite() {
            return Err(invalid(format!(
                "detector aperture must be positive, got {}",
                self.aperture_diameter
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(invalid(format!(
                "detector efficiency must be in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.jitter_fwhm >= 0.0) || !self.jitter_fwhm.is_finite() {
            return Err(invalid(format!("jitter FWHM must be >= 0, got {}", self.jitter_fwhm)));
        }
        if !self.center.is_finite() {
            return Err(invalid("detector center must be finite"));
        }
        if !(self.dead_time >= 0.0) || !self.dead_time.is_finite() {
            return Err(invalid(format!("dead time must be >= 0, got {}", self.dead_time)));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(invalid(format!("dark rate must be >= 0, got {}", self.dark_rate)));
        }
        Ok(())
    }

    pub fn at(&self, center: f64) -> Self {
        Self { center, ..*self }
    }
}

/// `efficiency * sum |E|^2 * pitch` over samples inside the aperture.
pub fn integrate_intensity(field: &SampledField, det: &DetectorSpec) -> Result<f64> {
    det.validate()?;
    let grid = &field.grid;
    let half = det.aperture_diameter / 2.0;
    if det.center + half < grid.first() || det.center - half > grid.last() {
        return Err(Error::Geometry(format!(
            "detector aperture [{}, {}] m lies outside the grid [{}, {}] m",
            det.center - half,
            det.center + half,
            grid.first(),
            grid.last()
        )));
    }
    let sum: f64 = field.amplitude[grid.window(det.center, half)]
        .iter()
        .map(|a| a.norm_sqr())
        .sum();
    Ok(det.efficiency * sum * grid.pitch())
}

/// Spatially non-resolving detector collecting everything behind the mask.
pub fn bucket_detect(field_after_mask: &SampledField, efficiency: f64) -> f64 {
    efficiency * field_after_mask.energy()
}

/// Sampled classical intensity `I(t)` in counts per second.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl IntensityTrace {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("trace dt must be positive, got {dt}")));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("trace values must be finite and non-negative"));
        }
        Ok(Self { dt, values })
    }

    pub fn constant(rate: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize;
        Self::new(dt, vec![rate; n])
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Chaotic-light intensity: `I = mean_rate * |a|^2` with `a` a stationary
/// complex Ornstein-Uhlenbeck process, `<a(t) a*(t+tau)> = exp(-|tau|/tau0)`.
/// The intensity correlation is therefore `1 + exp(-2|tau|/tau0)`.
///
/// An infinite `coherence_time` gives the frozen single-mode limit, a
/// constant exponentially distributed level.
pub fn synthesize_intensity_trace(
    coherence_time: f64,
    mean_rate: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<IntensityTrace> {
    if !(coherence_time > 0.0) || !(mean_rate > 0.0) || !(duration > 0.0) || !(dt > 0.0) {
        return Err(invalid("trace parameters must all be positive"));
    }
    if !mean_rate.is_finite() || !duration.is_finite() || !dt.is_finite() {
        return Err(invalid("trace rate, duration and dt must be finite"));
    }
    if dt > coherence_time / 10.0 * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "dt = {dt} s does not resolve coherence time {coherence_time} s (need dt <= tau0/10)"
        )));
    }
    if coherence_time.is_finite() && duration < 100.0 * coherence_time * (1.0 - 1e-9) {
        return Err(invalid(format!(
            "duration {duration} s is shorter than 100 coherence times ({coherence_time} s)"
        )));
    }
    let n = (duration / dt).round().max(1.0) as usize;
    let rho = (-dt / coherence_time).exp();
    let kick = (1.0 - rho * rho).sqrt();
    let mut rng = rng::stream(seed, Domain::IntensityTrace, 0);
    let mut a = circular_gaussian(rng.next_u64(), rng.next_u64());
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(mean_rate * a.norm_sqr());
        if kick > 0.0 {
            a = a * rho + circular_gaussian(rng.next_u64(), rng.next_u64()) * kick;
        }
    }
    IntensityTrace::new(dt, values)
}

/// Sorted detection times of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStream {
    pub timestamps: Vec<f64>,
    pub duration: f64,
}

impl PhotonStream {
    pub fn new(mut timestamps: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration >= 0.0) {
            return Err(invalid(format!("stream duration must be >= 0, got {duration}")));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(invalid("timestamps must be finite"));
        }
        timestamps.sort_unstable_by(f64::total_cmp);
        Ok(Self { timestamps, duration })
    }

    pub fn empty(duration: f64) -> Self {
        Self {
            timestamps: Vec::new(),
            duration,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.len() as f64 / self.duration
        } else {
            0.0
        }
    }

    /// Plain-text time tags: `#` header lines, then one timestamp in seconds
    /// per line, ascending.
    pub fn write_text<W: Write>(&self, mut w: W, seed: Option<u64>) -> Result<()> {
        writeln!(w, "# photon stream, timestamps in seconds")?;
        writeln!(w, "# duration_s = {}", self.duration)?;
        if let Some(seed) = seed {
            writeln!(w, "# seed = {seed}")?;
        }
        writeln!(w, "# count = {}", self.len())?;
        for t in &self.timestamps {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    /// Reads the format written by [`PhotonStream::write_text`]. A missing
    /// `duration_s` header falls back to the last timestamp.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut duration = None;
        let mut timestamps = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if let Some((k, v)) = header.split_once('=') {
                    if k.trim() == "duration_s" {
                        duration = Some(
                            v.trim()
                                .parse::<f64>()
                                .map_err(|e| invalid(format!("line {}: bad duration `{}`: {e}", i + 1, v.trim())))?,
                        );
                    }
                }
                continue;
            }
            let t: f64 = line
                .parse()
                .map_err(|e| invalid(format!("line {}: bad timestamp `{line}`: {e}", i + 1)))?;
            if let Some(prev) = timestamps.last() {
                if t < *prev {
                    return Err(invalid(format!("line {}: timestamps not ascending", i + 1)));
                }
            }
            timestamps.push(t);
        }
        let duration = duration.unwrap_or_else(|| timestamps.last().copied().unwrap_or(0.0));
        Self::new(timestamps, duration)
    }
}

/// Doubly stochastic Poisson detection of `efficiency * I(t)`, intensity held
/// constant within each trace sample. Uses time rescaling, so the cost is
/// linear in samples plus photons and the output comes out sorted.
pub fn sample_photons(trace: &IntensityTrace, efficiency: f64, seed: u64) -> Result<PhotonStream> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(invalid(format!("efficiency must be in (0, 1], got {efficiency}")));
    }
    let peak = trace.values.iter().fold(0.0f64, |m, v| m.max(*v)) * efficiency;
    if peak * trace.dt > 0.1 {
        return Err(invalid(format!(
            "peak rate * dt = {} exceeds 0.1; refine the trace",
            peak * trace.dt
        )));
    }
    let mut rng = rng::stream(seed, Domain::Thinning, 0);
    let mut next_exp = || -rng::open_unit(rng.next_u64()).ln();
    let mut timestamps = Vec::new();
    // Remaining integrated intensity until the next event.
    let mut budget = next_exp();
    for (k, &v) in trace.values.iter().enumerate() {
        let mass = efficiency * v * trace.dt;
        if mass <= 0.0 {
            continue;
        }
        let mut used = 0.0;
        while used + budget <= mass {
            used += budget;
            timestamps.push((k as f64 + used / mass) * trace.dt);
            budget = next_exp();
        }
        budget -= mass - used;
    }
    Ok(PhotonStream {
        timestamps,
        duration: trace.duration(),
    })
}

/// Adds independent Gaussian timing errors of the given FWHM and re-sorts.
pub fn apply_jitter(stream: &PhotonStream, jitter_fwhm: f64, seed: u64) -> Result<PhotonStream> {
    if !(jitter_fwhm >= 0.0) || !jitter_fwhm.is_finite() {
        return Err(invalid(format!("jitter FWHM must be >= 0, got {jitter_fwhm}")));
    }
    if jitter_fwhm == 0.0 {
        return Ok(stream.clone());
    }
    let sigma = jitter_fwhm / FWHM_PER_SIGMA;
    let mut rng = rng::stream(seed, Domain::Jitter, 0);
    let mut timestamps: Vec<f64> = stream
        .timestamps
        .iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            t + sigma * z
        })
        .collect();
    timestamps.sort_unstable_by(f64::total_cmp);
    Ok(PhotonStream {
        timestamps,
        duration: stream.duration,
    })
}

/// Merges a homogeneous Poisson stream of dark counts at `rate` into the
/// stream.
pub fn add_dark_counts(stream: &PhotonStream, rate: f64, seed: u64) -> Result<PhotonStream> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(invalid(format!("dark rate must be >= 0, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(stream.clone());
    }
    let mut rng = rng::stream(seed, Domain::Thinning, 1);
    let mut timestamps = stream.timestamps.clone();
    let mut t = 0.0;
    loop {
        t += -rng::open_unit(rng.next_u64()).ln() / rate;
        if t >= stream.duration {
            break;
        }
        timestamps.push(t);
    }
    timestamps.sort_unstable_by(f64::total_cmp);
    Ok(PhotonStream {
        timestamps,
        duration: stream.duration,
    })
}

/// Drops every event closer than `dead_time` to the last kept event.
pub fn apply_dead_time(stream: &PhotonStream, dead_time: f64) -> Result<PhotonStream> {
    if !(dead_time >= 0.0) || !dead_time.is_finite() {
        return Err(invalid(format!("dead time must be >= 0, got {dead_time}")));
    }
    if dead_time == 0.0 {
        return Ok(stream.clone());
    }
    let mut timestamps = Vec::with_capacity(stream.timestamps.len());
    let mut last = f64::NEG_INFINITY;
    for &t in &stream.timestamps {
        if t - last >= dead_time {
            timestamps.push(t);
            last = t;
        }
    }
    Ok(PhotonStream {
        timestamps,
        duration: stream.duration,
    })
}
