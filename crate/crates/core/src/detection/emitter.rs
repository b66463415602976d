//! Event-driven sampling of photon streams from chaotic light.
//!
//! Equivalent to thinning a shared OU intensity trace, but without a time
//! grid. Candidate events arrive as a homogeneous Poisson process at
//! `INTENSITY_CAP` times the total mean rate and are kept with probability
//! `min(s, cap) / cap`, `s = |a|^2` being the normalized intensity at that
//! instant. The OU amplitude only matters between candidates closer than
//! `LINK_GAP_COHERENCE_TIMES * tau0`, so candidates are generated as clusters
//! linked by short gaps. Isolated candidates are accepted with a fixed
//! probability and runs of rejected ones are skipped in one Gamma draw, which
//! makes the cost proportional to detected photons rather than candidates.
//!
//! Approximations, both far below any statistical resolution: intensity is
//! capped at 16 times its mean (rate deficit `e^-16`), and amplitude
//! correlation across gaps above 15 tau0 (`e^-15`) is dropped.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Result};
use crate::field::circular_gaussian;
use crate::rng::open_unit;

use super::PhotonStream;

/// Intensity ceiling in units of the mean intensity.
pub const INTENSITY_CAP: f64 = 16.0;

/// Candidates further apart than this many coherence times are independent.
pub const LINK_GAP_COHERENCE_TIMES: f64 = 15.0;

/// Bookkeeping from one sampling run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmitterStats {
    /// Candidate states that were actually drawn (cluster members).
    pub states_drawn: u64,
    /// Drawn states above the intensity cap.
    pub capped: u64,
}

/// Photon streams of several detectors watching one chaotic source.
///
/// `rates[c]` is the mean detected rate of channel `c` (efficiency and
/// beamsplitter already applied). All channels share one intensity history;
/// each photon belongs to one channel, which is the same as independent
/// thinning of the shared intensity.
pub fn sample_thermal_streams(
    coherence_time: f64,
    rates: &[f64],
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PhotonStream>, EmitterStats)> {
    if !(coherence_time > 0.0) || !coherence_time.is_finite() {
        return Err(invalid(format!(
            "coherence time must be positive, got {coherence_time}"
        )));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(invalid(format!("duration must be >= 0, got {duration}")));
    }
    if rates.is_empty() || rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(invalid("channel rates must be finite and non-negative"));
    }
    let total: f64 = rates.iter().sum();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); rates.len()];
    let mut stats = EmitterStats::default();
    if total == 0.0 || duration == 0.0 {
        return Ok((finish(out, duration), stats));
    }

    let cap = INTENSITY_CAP;
    let link = LINK_GAP_COHERENCE_TIMES * coherence_time;
    let lambda = cap * total;
    let p_close = -(-lambda * link).exp_m1();
    // Acceptance of an isolated candidate, E[min(s, cap)] / cap for s ~ Exp(1).
    let q_single = -(-cap).exp_m1() / cap;
    let p_skip = (1.0 - p_close) * (1.0 - q_single);
    let ln_skip = p_skip.ln();
    let p_single_given_kept = (1.0 - p_close) * q_single / (1.0 - p_skip);

    // Channel choice by cumulative rate.
    let cumulative: Vec<f64> = rates
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r / total;
            Some(*acc)
        })
        .collect();
    let pick = |u: f64| cumulative.iter().position(|c| u < *c).unwrap_or(rates.len() - 1);

    let mut t = -link;
    loop {
        // Rejected isolated candidates before the next cluster that matters.
        let skipped = (open_unit(rng.next_u64()).ln() / ln_skip).floor();
        let slots = skipped + 1.0;
        let gaps = if slots == 1.0 {
            -open_unit(rng.next_u64()).ln() / lambda
        } else {
            Gamma::new(slots, 1.0 / lambda).expect("valid gamma").sample(rng)
        };
        let start = t + slots * link + gaps;
        if start >= duration {
            break;
        }
        if rng.random::<f64>() < p_single_given_kept {
            out[pick(rng.random::<f64>())].push(start);
            t = start;
            continue;
        }
        // Linked cluster of at least two candidates.
        let extra = if p_close > 0.0 {
            (open_unit(rng.next_u64()).ln() / p_close.ln()).floor()
        } else {
            0.0
        };
        let members = 2 + extra as u64;
        let mut a = circular_gaussian(rng.next_u64(), rng.next_u64());
        let mut time = start;
        for m in 0..members {
            if m > 0 {
                // Exp(lambda) conditioned below the link gap.
                let u = open_unit(rng.next_u64());
                let gap = -(-u * p_close).ln_1p() / lambda;
                time += gap;
                if time >= duration {
                    break;
                }
                let rho = (-gap / coherence_time).exp();
                let kick = (1.0 - rho * rho).max(0.0).sqrt();
                a = a * rho + circular_gaussian(rng.next_u64(), rng.next_u64()) * kick;
            }
            stats.states_drawn += 1;
            let s = a.norm_sqr();
            if s > cap {
                stats.capped += 1;
            }
            if rng.random::<f64>() * cap < s {
                out[pick(rng.random::<f64>())].push(time);
            }
        }
        t = time;
        if t >= duration {
            break;
        }
    }
    Ok((finish(out, duration), stats))
}

fn finish(channels: Vec<Vec<f64>>, duration: f64) -> Vec<PhotonStream> {
    channels
        .into_iter()
        .map(|timestamps| PhotonStream { timestamps, duration })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn rates_match_request() {
        let mut rng = stream(3, Domain::HbtBlock, 0);
        let rates = [3e5, 1.5e5];
        let (s, _) = sample_thermal_streams(0.2e-9, &rates, 2.0, &mut rng).unwrap();
        for (stream, r) in s.iter().zip(rates) {
            let expected = r * 2.0;
            // Thermal light with tau0 << T is Poisson-like at this scale.
            assert!(
                (stream.len() as f64 - expected).abs() < 5.0 * expected.sqrt() * 1.01,
                "{} vs {expected}",
                stream.len()
            );
            assert!(stream.timestamps.windows(2).all(|w| w[0] < w[1]));
            assert!(stream.timestamps.iter().all(|t| (0.0..2.0).contains(t)));
        }
    }

    #[test]
    fn deterministic_given_stream() {
        let run = || sample_thermal_streams(1e-9, &[1e6, 1e6], 0.01, &mut stream(9, Domain::HbtBlock, 4)).unwrap();
        assert_eq!(run().0, run().0);
    }

    #[test]
    fn degenerate_inputs() {
        let mut rng = stream(1, Domain::HbtBlock, 0);
        let (s, _) = sample_thermal_streams(1e-9, &[0.0, 0.0], 1.0, &mut rng).unwrap();
        assert!(s.iter().all(|x| x.is_empty()));
        assert!(sample_thermal_streams(0.0, &[1.0], 1.0, &mut rng).is_err());
        assert!(sample_thermal_streams(1e-9, &[], 1.0, &mut rng).is_err());
        assert!(sample_thermal_streams(1e-9, &[-1.0], 1.0, &mut rng).is_err());
    }
}
