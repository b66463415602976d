use rayon::prelude::*;

use crate::correlation::{
    coherence_time_from_excess_with, fit_gaussian_peak, g2_zero_from_histogram, tac_histogram, tac_histogram_all_pairs,
    CoherenceModel, CoincidenceHistogram, G2Estimate, GaussianFit, TacMode,
};
use crate::detection::{
    add_dark_counts, apply_dead_time, apply_jitter, sample_photons, sample_thermal_streams, synthesize_intensity_trace,
    DetectorSpec, EmitterStats, IntensityTrace, PhotonStream,
};
use crate::error::{invalid, Error, Result};
use crate::field::SourceSpec;
use crate::rng::{self, derive_seed, Domain};

/// How photon streams are drawn from the chaotic source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Event-driven sampling of the OU intensity; cost per detected photon.
    #[default]
    Event,
    /// Sampled intensity trace thinned per channel; cost per trace sample.
    Trace,
}

/// TAC/MCA settings and the g2(0) windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TacSettings {
    pub range: (f64, f64),
    pub bin_width: f64,
    pub mode: TacMode,
    pub peak_halfwidth: f64,
    pub baseline_exclusion: f64,
}

impl Default for TacSettings {
    fn default() -> Self {
        Self {
            range: (-20e-9, 20e-9),
            bin_width: 50e-12,
            mode: TacMode::FirstStop,
            peak_halfwidth: 0.25e-9,
            baseline_exclusion: 5e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtConfig {
    pub source: SourceSpec,
    /// Start and stop detectors. Each sees half of `source.mean_rate`
    /// times its efficiency.
    pub detectors: [DetectorSpec; 2],
    pub tac: TacSettings,
    pub integration_time: f64,
    pub master_seed: u64,
    pub sampler: Sampler,
    /// Trace sample spacing for [`Sampler::Trace`].
    pub trace_dt: f64,
    /// `false` replaces the shared source by two independent ones.
    pub shared_source: bool,
    /// Length of one independently seeded acquisition block.
    pub block_duration: f64,
    pub coherence_model: CoherenceModel,
}

/// Longest trace generated in one piece.
const MAX_TRACE_SAMPLES: f64 = 4_194_304.0;

impl HbtConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        let tau0 = self.source.coherence_time;
        if !(self.integration_time >= 1e4 * tau0 * (1.0 - 1e-12)) || !self.integration_time.is_finite() {
            return Err(invalid(format!(
                "integration time {} s is below 1e4 coherence times",
                self.integration_time
            )));
        }
        if !(self.block_duration > 0.0) || !self.block_duration.is_finite() {
            return Err(invalid("block duration must be positive"));
        }
        let t = &self.tac;
        if !(t.range.0 < t.range.1) || !(t.bin_width > 0.0) {
            return Err(invalid("TAC needs a nonempty range and positive bin width"));
        }
        if !(t.baseline_exclusion > t.peak_halfwidth) || !(t.peak_halfwidth >= 0.0) {
            return Err(invalid("baseline exclusion must exceed the peak half-width"));
        }
        if self.sampler == Sampler::Trace && !(self.trace_dt > 0.0 && self.trace_dt <= tau0 / 10.0 * (1.0 + 1e-9)) {
            return Err(invalid(format!("trace dt {} s must be in (0, tau0/10]", self.trace_dt)));
        }
        Ok(())
    }

    /// Combined start-stop jitter FWHM, quadrature sum of both channels.
    pub fn combined_jitter(&self) -> f64 {
        self.detectors[0].jitter_fwhm.hypot(self.detectors[1].jitter_fwhm)
    }

    pub fn channel_rates(&self) -> [f64; 2] {
        [0, 1].map(|c| 0.5 * self.source.mean_rate * self.detectors[c].efficiency)
    }

    /// Block count and the common block length.
    pub fn blocks(&self) -> (usize, f64) {
        let mut target = self.block_duration;
        if self.sampler == Sampler::Trace {
            target = target.min(MAX_TRACE_SAMPLES * self.trace_dt);
        }
        let n = (self.integration_time / target).ceil().max(1.0) as usize;
        (n, self.integration_time / n as f64)
    }
}

/// Histogram-level results shared by simulated and imported data.
#[derive(Debug, Clone)]
pub struct HbtAnalysis {
    pub histogram: CoincidenceHistogram,
    pub fit: std::result::Result<GaussianFit, Error>,
    pub g2_zero: G2Estimate,
    /// Coherence time from the g2(0) excess, `None` without an excess.
    pub tau0_estimate: Option<f64>,
    pub combined_jitter: f64,
}

#[derive(Debug, Clone)]
pub struct HbtResult {
    pub analysis: HbtAnalysis,
    pub singles: [u64; 2],
    pub blocks: usize,
    pub emitter: EmitterStats,
}

impl HbtResult {
    pub fn singles_rates(&self, integration_time: f64) -> [f64; 2] {
        self.singles.map(|n| n as f64 / integration_time)
    }
}

/// g2(0), Gaussian fit and coherence time of a coincidence histogram.
pub fn analyze_histogram(
    histogram: CoincidenceHistogram,
    tac: &TacSettings,
    combined_jitter: f64,
    model: CoherenceModel,
) -> Result<HbtAnalysis> {
    let g2_zero = g2_zero_from_histogram(&histogram, tac.peak_halfwidth, tac.baseline_exclusion)?;
    let fit = fit_gaussian_peak(&histogram);
    let excess = g2_zero.value - 1.0;
    let tau0_estimate = if excess > 0.0 && combined_jitter > 0.0 {
        coherence_time_from_excess_with(excess, combined_jitter, model).ok()
    } else {
        None
    };
    Ok(HbtAnalysis {
        histogram,
        fit,
        g2_zero,
        tau0_estimate,
        combined_jitter,
    })
}

fn detect(stream: PhotonStream, det: &DetectorSpec, seed: u64) -> Result<PhotonStream> {
    let s = add_dark_counts(&stream, det.dark_rate, seed)?;
    let s = apply_dead_time(&s, det.dead_time)?;
    apply_jitter(&s, det.jitter_fwhm, seed)
}

fn block_streams(cfg: &HbtConfig, b: u64, duration: f64) -> Result<([PhotonStream; 2], EmitterStats)> {
    let seed = cfg.master_seed;
    let tau0 = cfg.source.coherence_time;
    let rates = cfg.channel_rates();
    let source_seed = |k: u64| derive_seed(seed, (b << 2) | (2 + k));
    let (raw, stats): ([PhotonStream; 2], EmitterStats) = match (cfg.sampler, cfg.shared_source) {
        (Sampler::Event, true) => {
            let mut r = rng::stream(source_seed(0), Domain::HbtBlock, 0);
            let (mut v, stats) = sample_thermal_streams(tau0, &rates, duration, &mut r)?;
            let s1 = v.pop().expect("two channels");
            let s0 = v.pop().expect("two channels");
            ([s0, s1], stats)
        }
        (Sampler::Event, false) => {
            let mut stats = EmitterStats::default();
            let mut out = Vec::with_capacity(2);
            for c in 0..2 {
                let mut r = rng::stream(source_seed(c as u64), Domain::HbtBlock, 0);
                let (mut v, s) = sample_thermal_streams(tau0, &rates[c..=c], duration, &mut r)?;
                stats.states_drawn += s.states_drawn;
                stats.capped += s.capped;
                out.push(v.pop().expect("one channel"));
            }
            let s1 = out.pop().expect("two channels");
            let s0 = out.pop().expect("two channels");
            ([s0, s1], stats)
        }
        (Sampler::Trace, shared) => {
            let trace = |k: u64| -> Result<IntensityTrace> {
                synthesize_intensity_trace(tau0, cfg.source.mean_rate, duration, cfg.trace_dt, source_seed(k))
            };
            let t0 = trace(0)?;
            let t1 = if shared { t0.clone() } else { trace(1)? };
            let eff = |c: usize| 0.5 * cfg.detectors[c].efficiency;
            let s0 = sample_photons(&t0, eff(0), derive_seed(seed, b << 2))?;
            let s1 = sample_photons(&t1, eff(1), derive_seed(seed, (b << 2) | 1))?;
            ([s0, s1], EmitterStats::default())
        }
    };
    let [r0, r1] = raw;
    let d0 = detect(r0, &cfg.detectors[0], derive_seed(seed, b << 2))?;
    let d1 = detect(r1, &cfg.detectors[1], derive_seed(seed, (b << 2) | 1))?;
    Ok(([d0, d1], stats))
}

/// Simulated HBT run: shared chaotic source, 50/50 split, per-channel
/// detection and jitter, TAC histogram, then [`analyze_histogram`].
///
/// The integration time is cut into equal, independently seeded blocks whose
/// histograms are summed, so the result does not depend on scheduling.
/// Coincidences straddling a block boundary are lost.
pub fn run_hbt(cfg: &HbtConfig) -> Result<HbtResult> {
    cfg.validate()?;
    let (n_blocks, duration) = cfg.blocks();
    let tac = cfg.tac;
    let parts: Vec<(CoincidenceHistogram, [u64; 2], EmitterStats)> = (0..n_blocks as u64)
        .into_par_iter()
        .map(|b| {
            let ([start, stop], stats) = block_streams(cfg, b, duration)?;
            let h = match tac.mode {
                TacMode::FirstStop => tac_histogram(&start, &stop, tac.range, tac.bin_width)?,
                TacMode::AllPairs => tac_histogram_all_pairs(&start, &stop, tac.range, tac.bin_width)?,
            };
            Ok((h, [start.len() as u64, stop.len() as u64], stats))
        })
        .collect::<Result<_>>()?;
    let mut histogram = CoincidenceHistogram::new(tac.range, tac.bin_width)?;
    let mut singles = [0u64; 2];
    let mut emitter = EmitterStats::default();
    for (h, s, e) in &parts {
        histogram.merge(h)?;
        singles[0] += s[0];
        singles[1] += s[1];
        emitter.states_drawn += e.states_drawn;
        emitter.capped += e.capped;
    }
    let analysis = analyze_histogram(histogram, &tac, cfg.combined_jitter(), cfg.coherence_model)?;
    Ok(HbtResult {
        analysis,
        singles,
        blocks: n_blocks,
        emitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn config(jitter: f64, time: f64) -> HbtConfig {
        HbtConfig {
            source: SourceSpec::new(0.5e-3, 780e-9, 0.2e-9, 6e5).unwrap(),
            detectors: [DetectorSpec::new(0.0, 2e-3, 1.0, jitter).unwrap(); 2],
            tac: TacSettings::default(),
            integration_time: time,
            master_seed: 42,
            sampler: Sampler::Event,
            trace_dt: 0.02e-9,
            shared_source: true,
            block_duration: 0.1,
            coherence_model: CoherenceModel::Lorentzian,
        }
    }

    #[test]
    fn validation() {
        let mut c = config(0.92e-9, 1.0);
        c.integration_time = 1e-7;
        assert!(c.validate().is_err());
        let mut c = config(0.92e-9, 1.0);
        c.sampler = Sampler::Trace;
        c.trace_dt = 0.05e-9;
        assert!(c.validate().is_err());
        assert!((config(0.92e-9, 1.0).combined_jitter() - 1.3011e-9).abs() < 1e-12);
    }

    #[test]
    fn blocks_cover_the_integration_time() {
        let c = config(0.0, 1.05);
        let (n, d) = c.blocks();
        assert_eq!(n, 11);
        assert!((n as f64 * d - 1.05).abs() < 1e-12);
        let mut t = config(0.0, 1e-3);
        t.sampler = Sampler::Trace;
        let (n, d) = t.blocks();
        assert!(d / t.trace_dt <= MAX_TRACE_SAMPLES && n >= 1);
    }

    #[test]
    fn singles_rates_match_configuration() {
        let c = config(0.92e-9, 0.2);
        let r = run_hbt(&c).unwrap();
        for n in r.singles {
            // Poisson-with-bunching count, 3e5/s over 0.2 s: 6e4 +- 250.
            assert!((n as f64 - 6e4).abs() < 2000.0, "{n}");
        }
        assert_eq!(r.blocks, 2);
    }

    #[test]
    fn deterministic_across_runs() {
        let c = config(0.92e-9, 0.05);
        let a = run_hbt(&c).unwrap();
        let b = run_hbt(&c).unwrap();
        assert_eq!(a.analysis.histogram, b.analysis.histogram);
    }
}
