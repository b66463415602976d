use std::io::Write;

use super::G2Estimate;
use crate::detection::PhotonStream;
use crate::error::{invalid, Error, Result};

/// Start-stop delay histogram with fixed-width bins over `[range.0, range.1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    bin_width: f64,
    range: (f64, f64),
    counts: Vec<u64>,
    n_starts: u64,
}

/// Conversion semantics of the time-to-amplitude converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TacMode {
    /// Each start records the first unused stop in range.
    #[default]
    FirstStop,
    /// Every start-stop pair in range is recorded.
    AllPairs,
}

fn bin_count(range: (f64, f64), bin_width: f64) -> Result<usize> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(invalid(format!("empty delay range ({}, {})", range.0, range.1)));
    }
    let r = (range.1 - range.0) / bin_width;
    let nearest = r.round();
    let n = if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        r.ceil()
    };
    if n > 1e8 {
        return Err(invalid(format!("{n} bins is too many")));
    }
    Ok(n.max(1.0) as usize)
}

impl CoincidenceHistogram {
    pub fn new(range: (f64, f64), bin_width: f64) -> Result<Self> {
        let n = bin_count(range, bin_width)?;
        Ok(Self {
            bin_width,
            range,
            counts: vec![0; n],
            n_starts: 0,
        })
    }

    /// Builds a histogram from explicit counts, e.g. for analysis of external
    /// data.
    pub fn from_counts(range: (f64, f64), bin_width: f64, counts: Vec<u64>, n_starts: u64) -> Result<Self> {
        let n = bin_count(range, bin_width)?;
        if counts.len() != n {
            return Err(invalid(format!("expected {n} bins, got {}", counts.len())));
        }
        Ok(Self {
            bin_width,
            range,
            counts,
            n_starts,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_starts(&self) -> u64 {
        self.n_starts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.range.0 + (k as f64 + 0.5) * self.bin_width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.bin_center(k)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin index of a delay, `None` outside the range.
    pub fn bin_of(&self, delay: f64) -> Option<usize> {
        if !(delay >= self.range.0 && delay < self.range.1) {
            return None;
        }
        let k = ((delay - self.range.0) / self.bin_width) as usize;
        (k < self.counts.len()).then_some(k)
    }

    pub fn record(&mut self, delay: f64) -> bool {
        match self.bin_of(delay) {
            Some(k) => {
                self.counts[k] += 1;
                true
            }
            None => false,
        }
    }

    pub fn add_starts(&mut self, n: u64) {
        self.n_starts += n;
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if self.range != other.range || self.bin_width != other.bin_width {
            return Err(invalid("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_starts += other.n_starts;
        Ok(())
    }

    /// Histogram with the delay axis shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> CoincidenceHistogram {
        CoincidenceHistogram {
            range: (self.range.0 + delta, self.range.1 + delta),
            ..self.clone()
        }
    }

    /// `delay_ns,counts` rows after `#`-prefixed comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W, header_comments: &[String]) -> Result<()> {
        for line in header_comments {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "delay_ns,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", super::scaled_for_csv(self.bin_center(k), 1e9), c)?;
        }
        Ok(())
    }
}

/// First-stop TAC histogram of `stops - starts`.
///
/// Starts are processed in time order. Each start takes the earliest stop
/// whose delay lies in the range and that no earlier start has taken.
pub fn tac_histogram(
    starts: &PhotonStream,
    stops: &PhotonStream,
    range: (f64, f64),
    bin_width: f64,
) -> Result<CoincidenceHistogram> {
    let mut h = CoincidenceHistogram::new(range, bin_width)?;
    h.add_starts(starts.len() as u64);
    let stops = &stops.timestamps;
    let mut j = 0usize;
    for &s in &starts.timestamps {
        let lo = s + range.0;
        while j < stops.len() && stops[j] < lo {
            j += 1;
        }
        if j < stops.len() && h.record(stops[j] - s) {
            j += 1;
        }
    }
    Ok(h)
}

/// Histogram of every start-stop pair with delay in range.
pub fn tac_histogram_all_pairs(
    starts: &PhotonStream,
    stops: &PhotonStream,
    range: (f64, f64),
    bin_width: f64,
) -> Result<CoincidenceHistogram> {
    let mut h = CoincidenceHistogram::new(range, bin_width)?;
    h.add_starts(starts.len() as u64);
    let stops = &stops.timestamps;
    let mut j = 0usize;
    for &s in &starts.timestamps {
        let lo = s + range.0;
        while j < stops.len() && stops[j] < lo {
            j += 1;
        }
        let mut k = j;
        while k < stops.len() && stops[k] - s < range.1 {
            h.record(stops[k] - s);
            k += 1;
        }
    }
    Ok(h)
}

/// Mean count per bin with `|center| <= peak_halfwidth` over mean count per
/// bin with `|center| >= baseline_exclusion`, Poisson errors propagated.
pub fn g2_zero_from_histogram(
    h: &CoincidenceHistogram,
    peak_halfwidth: f64,
    baseline_exclusion: f64,
) -> Result<G2Estimate> {
    if !(peak_halfwidth >= 0.0) {
        return Err(invalid("peak half-width must be non-negative"));
    }
    if !(baseline_exclusion > peak_halfwidth) {
        return Err(invalid("baseline exclusion must exceed the peak half-width"));
    }
    let slack = 1e-9 * h.bin_width();
    let (mut peak, mut n_peak) = (0u64, 0u64);
    let (mut base, mut n_left, mut n_right) = (0u64, 0u64, 0u64);
    for (k, &c) in h.counts().iter().enumerate() {
        let t = h.bin_center(k);
        if t.abs() <= peak_halfwidth + slack {
            peak += c;
            n_peak += 1;
        } else if t.abs() >= baseline_exclusion - slack {
            base += c;
            if t < 0.0 {
                n_left += 1;
            } else {
                n_right += 1;
            }
        }
    }
    if n_peak == 0 {
        return Err(invalid("no bin center lies inside the peak window"));
    }
    if n_left == 0 || n_right == 0 {
        return Err(Error::InsufficientBaseline(format!(
            "need bins beyond {baseline_exclusion} s on both sides, have {n_left} left and {n_right} right"
        )));
    }
    if base == 0 {
        return Err(Error::InsufficientBaseline("baseline bins are empty".into()));
    }
    let n_base = n_left + n_right;
    let peak_mean = peak as f64 / n_peak as f64;
    let base_mean = base as f64 / n_base as f64;
    let value = peak_mean / base_mean;
    let std_error = if peak > 0 {
        value * (1.0 / peak as f64 + 1.0 / base as f64).sqrt()
    } else {
        (1.0 / n_peak as f64) / base_mean
    };
    Ok(G2Estimate {
        value,
        std_error,
        n_samples: peak + base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(ts: &[f64]) -> PhotonStream {
        PhotonStream::new(ts.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn bin_layout() {
        let h = CoincidenceHistogram::new((-20e-9, 20e-9), 50e-12).unwrap();
        assert_eq!(h.n_bins(), 800);
        let h = CoincidenceHistogram::new((0.0, 1.0), 0.3).unwrap();
        assert_eq!(h.n_bins(), 4);
        assert!(CoincidenceHistogram::new((1.0, 1.0), 0.1).is_err());
        assert!(CoincidenceHistogram::new((0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn single_pair() {
        let h = tac_histogram(&stream(&[0.0]), &stream(&[0.5e-9]), (0.0, 10e-9), 0.2e-9).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts()[2], 1);
        assert_eq!(h.n_starts(), 1);
    }

    #[test]
    fn first_stop_consumes_stops() {
        let starts = stream(&[0.0, 1e-9]);
        let stops = stream(&[2e-9, 3e-9]);
        let h = tac_histogram(&starts, &stops, (-5e-9, 5e-9), 1e-9).unwrap();
        // 0 -> 2 ns, then 1 ns -> 3 ns since the 2 ns stop is taken.
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts()[h.bin_of(2e-9).unwrap()], 2);
        let all = tac_histogram_all_pairs(&starts, &stops, (-5e-9, 5e-9), 1e-9).unwrap();
        assert_eq!(all.total(), 4);
    }

    #[test]
    fn negative_delays_and_empty_streams() {
        let h = tac_histogram(&stream(&[5e-9]), &stream(&[4e-9]), (-2e-9, 2e-9), 0.5e-9).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts()[2], 1);
        let e = tac_histogram(&PhotonStream::empty(1.0), &stream(&[1e-9]), (0.0, 1e-8), 1e-9).unwrap();
        assert_eq!(e.total(), 0);
    }

    #[test]
    fn flat_histogram_g2_is_one() {
        let h = CoincidenceHistogram::from_counts((-20e-9, 20e-9), 1e-9, vec![50; 40], 1000).unwrap();
        let g = g2_zero_from_histogram(&h, 0.5e-9, 5e-9).unwrap();
        assert_eq!(g.value, 1.0);
        assert!(g.std_error > 0.0);
    }

    #[test]
    fn baseline_checks() {
        let h = CoincidenceHistogram::from_counts((-4e-9, 4e-9), 1e-9, vec![5; 8], 10).unwrap();
        assert!(matches!(
            g2_zero_from_histogram(&h, 0.5e-9, 5e-9),
            Err(Error::InsufficientBaseline(_))
        ));
        assert!(matches!(
            g2_zero_from_histogram(&h, 2e-9, 1e-9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn merge_requires_same_binning() {
        let mut a = CoincidenceHistogram::new((0.0, 1.0), 0.1).unwrap();
        a.record(0.05);
        let mut b = a.clone();
        b.merge(&a).unwrap();
        assert_eq!(b.counts()[0], 2);
        let c = CoincidenceHistogram::new((0.0, 1.0), 0.2).unwrap();
        assert!(b.merge(&c).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = CoincidenceHistogram::from_counts((0.0, 2e-9), 1e-9, vec![3, 4], 7).unwrap();
        let mut out = Vec::new();
        h.write_csv(&mut out, &["seed = 1".to_string()]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "# seed = 1\ndelay_ns,counts\n0.5,3\n1.5,4\n"
        );
    }
}
