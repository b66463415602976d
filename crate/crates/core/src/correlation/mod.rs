//! Correlation estimators: intensity g2 from paired samples, coincidence
//! histograms, Gaussian peak fitting and the derived coherence time and
//! visibility numbers.

mod fit;
mod histogram;

use crate::detection::{PhotonStream, FWHM_PER_SIGMA};
use crate::error::{invalid, Error, Result};

pub use fit::{fit_gaussian, fit_gaussian_peak, GaussianFit, Weighting};
pub use histogram::{g2_zero_from_histogram, tac_histogram, tac_histogram_all_pairs, CoincidenceHistogram, TacMode};

/// Normalized second-order correlation with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

impl G2Estimate {
    /// `value - 1`.
    pub fn excess(&self) -> f64 {
        self.value - 1.0
    }
}

/// Count, sums and sum of products of `(I1, I2)` samples. Merging is
/// element-wise addition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub n: u64,
    pub sum1: f64,
    pub sum2: f64,
    pub sum12: f64,
}

impl PairMoments {
    #[inline]
    pub fn push(&mut self, i1: f64, i2: f64) {
        self.n += 1;
        self.sum1 += i1;
        self.sum2 += i2;
        self.sum12 += i1 * i2;
    }

    pub fn merge(&mut self, other: &PairMoments) {
        self.n += other.n;
        self.sum1 += other.sum1;
        self.sum2 += other.sum2;
        self.sum12 += other.sum12;
    }

    fn minus(&self, other: &PairMoments) -> PairMoments {
        PairMoments {
            n: self.n - other.n,
            sum1: self.sum1 - other.sum1,
            sum2: self.sum2 - other.sum2,
            sum12: self.sum12 - other.sum12,
        }
    }

    /// `<I1 I2> / (<I1><I2>)`, `None` when either mean vanishes.
    pub fn ratio(&self) -> Option<f64> {
        if self.n == 0 || self.sum1 == 0.0 || self.sum2 == 0.0 {
            return None;
        }
        Some(self.n as f64 * self.sum12 / (self.sum1 * self.sum2))
    }
}

/// Streaming g2 estimator with block jackknife errors.
///
/// Samples are grouped into consecutive blocks of `block_size`; merging two
/// accumulators concatenates their block lists. The estimate depends only on
/// the block sums, so any split of the work along block boundaries reproduces
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAccumulator {
    block_size: u64,
    blocks: Vec<PairMoments>,
    current: PairMoments,
}

/// Default jackknife block length.
pub const JACKKNIFE_BLOCK: u64 = 100;

impl PairAccumulator {
    pub fn new(block_size: u64) -> Self {
        assert!(block_size > 0, "block size must be positive");
        Self {
            block_size,
            blocks: Vec::new(),
            current: PairMoments::default(),
        }
    }

    #[inline]
    pub fn push(&mut self, i1: f64, i2: f64) {
        self.current.push(i1, i2);
        if self.current.n == self.block_size {
            self.blocks.push(std::mem::take(&mut self.current));
        }
    }

    pub fn merge(&mut self, mut other: PairAccumulator) {
        if self.current.n > 0 {
            self.blocks.push(std::mem::take(&mut self.current));
        }
        self.blocks.append(&mut other.blocks);
        self.current = other.current;
    }

    pub fn len(&self) -> u64 {
        self.blocks.iter().map(|b| b.n).sum::<u64>() + self.current.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn totals(&self) -> PairMoments {
        let mut t = PairMoments::default();
        for b in self.blocks.iter().chain(std::iter::once(&self.current)) {
            t.merge(b);
        }
        t
    }

    pub fn estimate(&self) -> Result<G2Estimate> {
        let blocks: Vec<PairMoments> = self
            .blocks
            .iter()
            .copied()
            .chain((self.current.n > 0).then_some(self.current))
            .collect();
        let total = self.totals();
        if total.n < 2 {
            return Err(invalid("g2 needs at least two samples"));
        }
        let value = total
            .ratio()
            .ok_or_else(|| Error::DegenerateData("mean intensity is zero on one channel".into()))?;
        let std_error = if blocks.len() >= 2 {
            let partials: Vec<f64> = blocks.iter().map(|b| total.minus(b).ratio().unwrap_or(value)).collect();
            let m = partials.len() as f64;
            let mean = partials.iter().sum::<f64>() / m;
            let ss: f64 = partials.iter().map(|p| (p - mean) * (p - mean)).sum();
            ((m - 1.0) / m * ss).sqrt()
        } else {
            f64::NAN
        };
        Ok(G2Estimate {
            value,
            std_error,
            n_samples: total.n,
        })
    }
}

/// `<I1 I2> / (<I1><I2>)` with a jackknife error: blocks of
/// [`JACKKNIFE_BLOCK`] samples, or single samples when there are fewer than
/// two full blocks.
pub fn g2_from_pairs(samples: &[(f64, f64)]) -> Result<G2Estimate> {
    if samples.len() < 2 {
        return Err(invalid("g2 needs at least two samples"));
    }
    let block = if samples.len() as u64 >= 2 * JACKKNIFE_BLOCK {
        JACKKNIFE_BLOCK
    } else {
        1
    };
    let mut acc = PairAccumulator::new(block);
    for &(a, b) in samples {
        acc.push(a, b);
    }
    acc.estimate()
}

/// Normalized intensity autocorrelation of a sampled trace at `lag` samples,
/// jackknifed over blocks of `block` samples.
pub fn intensity_autocorrelation(values: &[f64], lag: usize, block: u64) -> Result<G2Estimate> {
    if values.len() <= lag + 1 {
        return Err(invalid("trace too short for the requested lag"));
    }
    let mut acc = PairAccumulator::new(block);
    for (a, b) in values.iter().zip(&values[lag..]) {
        acc.push(*a, *b);
    }
    acc.estimate()
}

/// Field-level and intensity-level correlation of two sample points over a
/// frame ensemble, for checking the Gaussian moment theorem.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldPairMoments {
    pub n: u64,
    pub cross: num_complex::Complex64,
    pub i1: f64,
    pub i2: f64,
    pub i1i2: f64,
}

impl FieldPairMoments {
    pub fn push(&mut self, e1: num_complex::Complex64, e2: num_complex::Complex64) {
        let (a, b) = (e1.norm_sqr(), e2.norm_sqr());
        self.n += 1;
        self.cross += e1 * e2.conj();
        self.i1 += a;
        self.i2 += b;
        self.i1i2 += a * b;
    }

    /// `g2 - 1` from intensities.
    pub fn intensity_excess(&self) -> f64 {
        self.n as f64 * self.i1i2 / (self.i1 * self.i2) - 1.0
    }

    /// `|g1|^2` from fields.
    pub fn coherence_squared(&self) -> f64 {
        self.cross.norm_sqr() / (self.i1 * self.i2)
    }
}

/// Photon-number statistics of a stream in fixed counting windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelQ {
    pub q: f64,
    pub std_error: f64,
    pub mean_count: f64,
    pub windows: u64,
}

/// `Q = (Var - Mean) / Mean` of counts in consecutive windows of `window`
/// seconds over `[0, duration)`, with a jackknife error over 100 groups of
/// windows.
pub fn mandel_q(stream: &PhotonStream, window: f64) -> Result<MandelQ> {
    if !(window > 0.0) {
        return Err(invalid("counting window must be positive"));
    }
    let n_windows = (stream.duration / window).floor() as usize;
    if n_windows < 200 {
        return Err(Error::DegenerateData(format!(
            "only {n_windows} counting windows; need at least 200"
        )));
    }
    let mut counts = vec![0u64; n_windows];
    for t in &stream.timestamps {
        let k = (t / window).floor();
        if k >= 0.0 && (k as usize) < n_windows {
            counts[k as usize] += 1;
        }
    }
    let groups = 100usize;
    let per = n_windows / groups;
    let mut group_sums = vec![(0.0f64, 0.0f64, 0u64); groups];
    for (g, chunk) in counts.chunks(per).take(groups).enumerate() {
        for &c in chunk {
            group_sums[g].0 += c as f64;
            group_sums[g].1 += (c * c) as f64;
            group_sums[g].2 += 1;
        }
    }
    let q_of = |s: f64, s2: f64, n: u64| -> f64 {
        let n = n as f64;
        let mean = s / n;
        let var = s2 / n - mean * mean;
        (var - mean) / mean
    };
    let (s, s2, n) = group_sums
        .iter()
        .fold((0.0, 0.0, 0u64), |a, g| (a.0 + g.0, a.1 + g.1, a.2 + g.2));
    if s == 0.0 {
        return Err(Error::DegenerateData("no photons in the counting windows".into()));
    }
    let q = q_of(s, s2, n);
    let partials: Vec<f64> = group_sums.iter().map(|g| q_of(s - g.0, s2 - g.1, n - g.2)).collect();
    let m = partials.len() as f64;
    let pm = partials.iter().sum::<f64>() / m;
    let std_error = ((m - 1.0) / m * partials.iter().map(|p| (p - pm).powi(2)).sum::<f64>()).sqrt();
    Ok(MandelQ {
        q,
        std_error,
        mean_count: s / n as f64,
        windows: n,
    })
}

/// Field correlation model used to turn a measured g2(0) excess into a
/// coherence time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoherenceModel {
    /// `g2 - 1 = exp(-2|tau|/tau0)`, Lorentzian line, the OU source model.
    #[default]
    Lorentzian,
    /// `|g1(tau)| = exp(-tau^2 / (2 tau0^2))`, Gaussian line.
    Gaussian,
}

/// Coherence time from the zero-delay excess seen through Gaussian timing
/// jitter of the given combined FWHM, Lorentzian model.
pub fn coherence_time_from_excess(g2_zero_excess: f64, combined_jitter_fwhm: f64) -> Result<f64> {
    coherence_time_from_excess_with(g2_zero_excess, combined_jitter_fwhm, CoherenceModel::Lorentzian)
}

/// Inverts the jitter convolution for either line shape.
///
/// Lorentzian: the true excess has area `tau0` and is much narrower than the
/// jitter kernel, so the measured peak is `tau0 * h(0)`,
/// `h(0) = 1/(sigma sqrt(2 pi))`.
/// Gaussian: a Gaussian excess of width `tau0/sqrt(2)` convolved with the
/// kernel peaks at `s / sqrt(s^2 + sigma^2)`, solved exactly for `s`.
pub fn coherence_time_from_excess_with(
    g2_zero_excess: f64,
    combined_jitter_fwhm: f64,
    model: CoherenceModel,
) -> Result<f64> {
    if !(g2_zero_excess > 0.0) || !g2_zero_excess.is_finite() {
        return Err(invalid(format!("g2(0) excess must be positive, got {g2_zero_excess}")));
    }
    if !(combined_jitter_fwhm > 0.0) || !combined_jitter_fwhm.is_finite() {
        return Err(invalid(format!(
            "jitter FWHM must be positive, got {combined_jitter_fwhm}"
        )));
    }
    let sigma = combined_jitter_fwhm / FWHM_PER_SIGMA;
    match model {
        CoherenceModel::Lorentzian => Ok(g2_zero_excess * sigma * (2.0 * std::f64::consts::PI).sqrt()),
        CoherenceModel::Gaussian => {
            if g2_zero_excess >= 1.0 {
                return Err(invalid("Gaussian inversion needs an excess below 1"));
            }
            let s = g2_zero_excess * sigma / (1.0 - g2_zero_excess * g2_zero_excess).sqrt();
            Ok(std::f64::consts::SQRT_2 * s)
        }
    }
}

/// `(max - min) / (max + min)` of the curve values.
pub fn visibility(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(invalid("visibility needs at least two points"));
    }
    if curve.iter().any(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("visibility needs finite non-negative values"));
    }
    let max = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Err(Error::DegenerateData("all curve values are zero".into()));
    }
    Ok((max - min) / (max + min))
}

/// `value * factor` rounded to nine decimals, so that unit conversion does not
/// leave representation noise in CSV output.
pub fn scaled_for_csv(value: f64, factor: f64) -> f64 {
    let v = ((value * factor) * 1e9).round() / 1e9;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Writes `position_mm,<value>,<value>_err`-style CSV rows.
pub fn write_curve_csv<W: std::io::Write>(
    mut w: W,
    header_comments: &[String],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    for line in header_comments {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pairs_give_exactly_one() {
        let pairs = vec![(2.0, 2.0); 500];
        let g = g2_from_pairs(&pairs).unwrap();
        assert_eq!(g.value, 1.0);
        assert_eq!(g.std_error, 0.0);
        assert_eq!(g.n_samples, 500);
        let small = vec![(3.5, 3.5); 7];
        let g = g2_from_pairs(&small).unwrap();
        assert_eq!(g.value, 1.0);
        assert_eq!(g.std_error, 0.0);
    }

    #[test]
    fn degenerate_pairs() {
        assert!(matches!(g2_from_pairs(&[(1.0, 1.0)]), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            g2_from_pairs(&[(0.0, 1.0), (0.0, 2.0)]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn merge_along_blocks_is_exact() {
        let data: Vec<(f64, f64)> = (0..1000).map(|i| ((i % 7) as f64, (i % 5) as f64 + 0.5)).collect();
        let mut whole = PairAccumulator::new(100);
        data.iter().for_each(|p| whole.push(p.0, p.1));
        let mut a = PairAccumulator::new(100);
        let mut b = PairAccumulator::new(100);
        data[..300].iter().for_each(|p| a.push(p.0, p.1));
        data[300..].iter().for_each(|p| b.push(p.0, p.1));
        a.merge(b);
        assert_eq!(a.estimate().unwrap(), whole.estimate().unwrap());
    }

    #[test]
    fn visibility_cases() {
        assert_eq!(visibility(&[(0.0, 2.0), (1.0, 2.0)]).unwrap(), 0.0);
        assert!((visibility(&[(0.0, 2.0), (1.0, 3.0)]).unwrap() - 0.2).abs() < 1e-15);
        let hbt = visibility(&[(0.0, 1.0), (1.0, 1.11)]).unwrap();
        assert!((hbt - 0.052).abs() < 5e-4, "{hbt}");
        assert!(matches!(
            visibility(&[(0.0, 0.0), (1.0, 0.0)]),
            Err(Error::DegenerateData(_))
        ));
        assert!(visibility(&[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn coherence_time_inversion() {
        // sigma = 1.3 ns / 2.3548 = 0.55206 ns, sigma*sqrt(2 pi) = 1.38381 ns.
        let tau = coherence_time_from_excess(0.11, 1.3e-9).unwrap();
        assert!((tau - 0.152_219e-9).abs() < 1e-14, "{tau}");
        assert!((tau - 0.2e-9).abs() / 0.2e-9 < 0.35);
        let tiny = coherence_time_from_excess(1e-9, 1.3e-9).unwrap();
        assert!(tiny < 1e-17);
        assert!(coherence_time_from_excess(0.0, 1.3e-9).is_err());
        assert!(coherence_time_from_excess(-0.1, 1.3e-9).is_err());
        assert!(coherence_time_from_excess(0.1, 0.0).is_err());
    }

    #[test]
    fn gaussian_inversion_round_trip() {
        // Forward: excess = s / sqrt(s^2 + sigma^2) with s = tau0 / sqrt 2.
        let sigma = 1.3e-9 / FWHM_PER_SIGMA;
        let tau0 = 0.2e-9;
        let s = tau0 / std::f64::consts::SQRT_2;
        let excess = s / (s * s + sigma * sigma).sqrt();
        let back = coherence_time_from_excess_with(excess, 1.3e-9, CoherenceModel::Gaussian).unwrap();
        assert!((back - tau0).abs() < 1e-15);
    }
}
