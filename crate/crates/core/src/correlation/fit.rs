use super::CoincidenceHistogram;
use crate::detection::FWHM_PER_SIGMA;
use crate::error::{invalid, Error, Result};

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-9;

/// Noise model of the least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Poisson likelihood, solved by damped Fisher scoring. Parameter
    /// covariance is the inverse Fisher information.
    #[default]
    Poisson,
    /// Ordinary least squares; covariance scaled by the residual variance.
    Uniform,
}

/// `baseline + amplitude * exp(-(t - center)^2 / (2 sigma^2))` with one
/// standard error per parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    pub baseline: f64,
    pub amplitude_err: f64,
    pub center_err: f64,
    pub fwhm_err: f64,
    pub baseline_err: f64,
    /// `sqrt(sum w r^2)`, with `w = 1/model` for Poisson weighting.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GaussianFit {
    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = self.sigma();
        self.baseline + self.amplitude * (-(t - self.center).powi(2) / (2.0 * s * s)).exp()
    }
}

/// Gaussian-plus-baseline fit to a coincidence histogram with Poisson
/// weighting.
pub fn fit_gaussian_peak(h: &CoincidenceHistogram) -> Result<GaussianFit> {
    let y: Vec<f64> = h.counts().iter().map(|&c| c as f64).collect();
    fit_gaussian(&h.centers(), &y, Weighting::Poisson)
}

// Parameters in scaled units: [baseline, amplitude, center, sigma], with the
// abscissa u = (x - x0) / dx.
fn model(q: &[f64; 4], u: f64) -> (f64, [f64; 4]) {
    let d = u - q[2];
    let e = (-d * d / (2.0 * q[3] * q[3])).exp();
    let f = q[0] + q[1] * e;
    let grad = [
        1.0,
        e,
        q[1] * e * d / (q[3] * q[3]),
        q[1] * e * d * d / (q[3] * q[3] * q[3]),
    ];
    (f, grad)
}

fn cost(q: &[f64; 4], u: &[f64], y: &[f64], weighting: Weighting) -> f64 {
    if !(q[3] > 0.0) {
        return f64::INFINITY;
    }
    let mut c = 0.0;
    for (&ui, &yi) in u.iter().zip(y) {
        let (f, _) = model(q, ui);
        match weighting {
            Weighting::Uniform => c += (yi - f) * (yi - f),
            Weighting::Poisson => {
                if f < 0.0 || (f == 0.0 && yi > 0.0) {
                    return f64::INFINITY;
                }
                c += if yi > 0.0 {
                    2.0 * (yi * (yi / f).ln() - (yi - f))
                } else {
                    2.0 * f
                };
            }
        }
    }
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

fn poisson_weight(f: f64, floor: f64) -> f64 {
    1.0 / f.max(floor)
}

// Normal matrix J^T W J and gradient J^T W r at q.
fn normal_equations(q: &[f64; 4], u: &[f64], y: &[f64], weighting: Weighting, floor: f64) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut n = [[0.0; 4]; 4];
    let mut g = [0.0; 4];
    for (&ui, &yi) in u.iter().zip(y) {
        let (f, j) = model(q, ui);
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::Poisson => poisson_weight(f, floor),
        };
        let r = yi - f;
        for a in 0..4 {
            g[a] += w * j[a] * r;
            for b in 0..4 {
                n[a][b] += w * j[a] * j[b];
            }
        }
    }
    (n, g)
}

fn solve4(mut m: [[f64; 4]; 4], mut v: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let p = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col] == 0.0 || !m[p][col].is_finite() {
            return None;
        }
        m.swap(col, p);
        v.swap(col, p);
        for row in 0..4 {
            if row != col {
                let k = m[row][col] / m[col][col];
                let pivot = m[col];
                for (a, b) in m[row][col..].iter_mut().zip(&pivot[col..]) {
                    *a -= k * b;
                }
                v[row] -= k * v[col];
            }
        }
    }
    Some([v[0] / m[0][0], v[1] / m[1][1], v[2] / m[2][2], v[3] / m[3][3]])
}

fn invert4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        let col = solve4(*m, e)?;
        for r in 0..4 {
            inv[r][k] = col[r];
        }
    }
    Some(inv)
}

fn initial_guess(u: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    let n = y.len();
    let k = (n / 10).max(1);
    let baseline = (y[..k].iter().sum::<f64>() + y[n - k..].iter().sum::<f64>()) / (2 * k) as f64;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let imax = (0..n).max_by(|&a, &b| smooth[a].total_cmp(&smooth[b])).unwrap_or(0);
    let amplitude = smooth[imax] - baseline;
    if !(amplitude > 0.0) {
        return Err(Error::NoPeak("no excess above the baseline".into()));
    }
    let half = baseline + amplitude / 2.0;
    let mut l = imax;
    while l > 0 && smooth[l - 1] > half {
        l -= 1;
    }
    let mut r = imax;
    while r + 1 < n && smooth[r + 1] > half {
        r += 1;
    }
    let fwhm = (u[r] - u[l] + 1.0).max(1.0);
    let (mut sw, mut swx) = (0.0, 0.0);
    for i in 0..n {
        if (u[i] - u[imax]).abs() <= fwhm {
            let w = (y[i] - baseline).max(0.0);
            sw += w;
            swx += w * u[i];
        }
    }
    let center = if sw > 0.0 { swx / sw } else { u[imax] };
    Ok([baseline, amplitude, center, fwhm / FWHM_PER_SIGMA])
}

/// Fits `baseline + amplitude * exp(-(x - center)^2 / (2 sigma^2))` to
/// samples on a strictly increasing abscissa by damped Gauss-Newton.
pub fn fit_gaussian(x: &[f64], y: &[f64], weighting: Weighting) -> Result<GaussianFit> {
    let n = x.len();
    if n != y.len() {
        return Err(invalid("abscissa and ordinate lengths differ"));
    }
    if n < 5 {
        return Err(invalid("a Gaussian fit needs at least five points"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("abscissa must be finite and strictly increasing"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("ordinate must be finite"));
    }
    if weighting == Weighting::Poisson && y.iter().any(|&v| v < 0.0) {
        return Err(invalid("Poisson weighting needs non-negative data"));
    }
    let x0 = 0.5 * (x[0] + x[n - 1]);
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    let u: Vec<f64> = x.iter().map(|&v| (v - x0) / dx).collect();
    let ymax = y.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let floor = (1e-9 * ymax).max(f64::MIN_POSITIVE);

    let mut q = initial_guess(&u, y)?;
    let mut c = cost(&q, &u, y, weighting);
    if !c.is_finite() {
        // A negative initial baseline under Poisson weighting.
        q[0] = q[0].max(floor);
        c = cost(&q, &u, y, weighting);
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (nm, g) = normal_equations(&q, &u, y, weighting, floor);
        let mut damped = nm;
        for (a, row) in damped.iter_mut().enumerate() {
            row[a] += lambda * nm[a][a].max(f64::MIN_POSITIVE);
        }
        let Some(step) = solve4(damped, g) else {
            break;
        };
        let trial = [q[0] + step[0], q[1] + step[1], q[2] + step[2], q[3] + step[3]];
        let tc = cost(&trial, &u, y, weighting);
        if tc <= c {
            let scales = [q[1].abs(), q[1].abs(), q[3], q[3]];
            let small = (0..4).all(|i| step[i].abs() <= STEP_TOLERANCE * q[i].abs().max(scales[i]));
            q = trial;
            c = tc;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }

    let (nm, _) = normal_equations(&q, &u, y, weighting, floor);
    let cov = invert4(&nm).ok_or_else(|| Error::NoPeak("singular fit normal matrix".into()))?;
    let mut chi2 = 0.0;
    for (&ui, &yi) in u.iter().zip(y) {
        let (f, _) = model(&q, ui);
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::Poisson => poisson_weight(f, floor),
        };
        chi2 += w * (yi - f) * (yi - f);
    }
    let dof = (n - 4) as f64;
    let scale = match weighting {
        Weighting::Uniform => chi2 / dof,
        Weighting::Poisson => 1.0,
    };
    let err = |i: usize| (cov[i][i] * scale).max(0.0).sqrt();
    let amplitude_err = err(1);
    if !(q[1] > 0.0) || !(q[1] > 3.0 * amplitude_err) || !q.iter().all(|v| v.is_finite()) {
        return Err(Error::NoPeak(format!(
            "fitted amplitude {} is not significant (error {amplitude_err})",
            q[1]
        )));
    }
    let sigma = q[3].abs();
    Ok(GaussianFit {
        amplitude: q[1],
        center: x0 + dx * q[2],
        fwhm: FWHM_PER_SIGMA * sigma * dx,
        baseline: q[0],
        amplitude_err,
        center_err: dx * err(2),
        fwhm_err: FWHM_PER_SIGMA * dx * err(3),
        baseline_err: err(0),
        residual_norm: chi2.sqrt(),
        reduced_chi2: chi2 / dof,
        iterations,
        converged,
    })
}
