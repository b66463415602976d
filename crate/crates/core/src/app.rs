//! Command-line runs: build scenario inputs from a [`RunConfig`], execute,
//! and write CSV outputs with a manifest.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{RunConfig, Value};
use crate::correlation::{
    scaled_for_csv, tac_histogram, tac_histogram_all_pairs, write_curve_csv, CoherenceModel, TacMode,
};
use crate::detection::{DetectorSpec, PhotonStream};
use crate::error::{Error, Result};
use crate::field::{make_grid, SourceSpec};
use crate::optics::{check_lens_equation, double_pinhole, pinhole_row, BenchGeometry, LensReport, MaskSpec};
use crate::scenarios::{
    analyze_histogram, coherence_width, ideal_ghost_curve, predicted_magnification, run_ghost, run_hbt,
    suggested_temporal_modes, BucketSpec, FrameSharing, GhostConfig, HbtAnalysis, HbtConfig, Relay, Sampler,
    TacSettings,
};
use crate::selftest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Hbt,
    Ghost,
    CheckLens,
    IdealCurve,
    Selftest,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hbt => "hbt",
            Scenario::Ghost => "ghost",
            Scenario::CheckLens => "check-lens",
            Scenario::IdealCurve => "ideal-curve",
            Scenario::Selftest => "selftest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Scenario::Hbt,
            Scenario::Ghost,
            Scenario::CheckLens,
            Scenario::IdealCurve,
            Scenario::Selftest,
        ]
        .into_iter()
        .find(|x| x.name() == s)
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Human-readable result lines, also written to the manifest.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Set when the run finished but its statistics fell short, e.g. no
    /// significant HBT peak. Reported after outputs are written.
    pub deferred: Option<Error>,
    /// Selftest verdict.
    pub passed: bool,
}

fn source(cfg: &RunConfig) -> Result<SourceSpec> {
    SourceSpec::new(
        cfg.quantity("source", "diameter")?,
        cfg.quantity("source", "wavelength")?,
        cfg.quantity("source", "coherence_time")?,
        cfg.quantity("source", "mean_rate")?,
    )
    .map_err(|e| cfg.error("source", "diameter", e.to_string()))
}

fn detector(cfg: &RunConfig, section: &str) -> Result<DetectorSpec> {
    let d = DetectorSpec {
        center: cfg.quantity(section, "center")?,
        aperture_diameter: cfg.quantity(section, "aperture")?,
        efficiency: cfg.number(section, "efficiency")?,
        jitter_fwhm: cfg.quantity(section, "jitter_fwhm")?,
        dead_time: cfg.quantity(section, "dead_time")?,
        dark_rate: cfg.quantity(section, "dark_rate")?,
    };
    d.validate()
        .map_err(|e| cfg.error(section, "efficiency", e.to_string()))?;
    Ok(d)
}

fn tac(cfg: &RunConfig) -> Result<TacSettings> {
    let mode = match cfg.text("tac", "mode")? {
        Some("all-pairs") => TacMode::AllPairs,
        _ => TacMode::FirstStop,
    };
    Ok(TacSettings {
        range: (cfg.quantity("tac", "range_min")?, cfg.quantity("tac", "range_max")?),
        bin_width: cfg.quantity("tac", "bin_width")?,
        mode,
        peak_halfwidth: cfg.quantity("tac", "peak_halfwidth")?,
        baseline_exclusion: cfg.quantity("tac", "baseline_exclusion")?,
    })
}

fn coherence_model(cfg: &RunConfig) -> Result<CoherenceModel> {
    Ok(match cfg.text("hbt", "coherence_model")? {
        Some("gaussian") => CoherenceModel::Gaussian,
        _ => CoherenceModel::Lorentzian,
    })
}

pub fn seed(cfg: &RunConfig) -> Result<u64> {
    match cfg.get("run", "seed") {
        Some(_) => cfg.integer("run", "seed"),
        None => Ok(1),
    }
}

/// HBT inputs from `[source]`, `[detector1]`, `[detector2]`, `[tac]` and the
/// optional `[hbt]`.
pub fn hbt_config(cfg: &RunConfig) -> Result<HbtConfig> {
    let mut cfg = cfg.clone();
    for s in ["source", "detector1", "detector2", "tac", "hbt"] {
        cfg.require_section(s)?;
    }
    let source = source(&cfg)?;
    let sampler = match cfg.text("hbt", "sampler")? {
        Some("trace") => Sampler::Trace,
        _ => Sampler::Event,
    };
    let out = HbtConfig {
        source,
        detectors: [detector(&cfg, "detector1")?, detector(&cfg, "detector2")?],
        tac: tac(&cfg)?,
        integration_time: cfg.quantity("tac", "integration_time")?,
        master_seed: seed(&cfg)?,
        sampler,
        trace_dt: cfg
            .opt_quantity("hbt", "trace_dt")?
            .unwrap_or(source.coherence_time / 10.0),
        shared_source: cfg.boolean("hbt", "shared_source")?,
        block_duration: cfg.quantity("hbt", "block_duration")?,
        coherence_model: coherence_model(&cfg)?,
    };
    out.validate()
        .map_err(|e| cfg.error("tac", "integration_time", e.to_string()))?;
    Ok(out)
}

pub fn geometry(cfg: &RunConfig) -> Result<(BenchGeometry, f64)> {
    let mut cfg = cfg.clone();
    cfg.require_section("geometry")?;
    let g = BenchGeometry {
        z1: cfg.quantity("geometry", "z1")?,
        z2: cfg.quantity("geometry", "z2")?,
        z3: cfg.quantity("geometry", "z3")?,
        f: cfg.quantity("geometry", "f")?,
    };
    Ok((g, cfg.number("geometry", "tolerance")?))
}

pub fn mask(cfg: &RunConfig) -> Result<MaskSpec> {
    let mut cfg = cfg.clone();
    cfg.require_section("mask")?;
    let need = |k: &str| cfg.quantity("mask", k);
    let kind = cfg.text("mask", "type")?.unwrap_or("double-pinhole").to_string();
    let m = match kind.as_str() {
        "double-pinhole" => double_pinhole(need("separation")?, need("hole_diameter")?),
        "pinholes" => {
            let count = cfg.integer("mask", "count")? as usize;
            let sep = if count > 1 {
                need("separation")?
            } else {
                cfg.opt_quantity("mask", "separation")?.unwrap_or(0.0)
            };
            pinhole_row(count, sep, need("hole_diameter")?)
        }
        "open" => Ok(MaskSpec::open()),
        _ => Ok(MaskSpec::opaque()),
    };
    m.map_err(|e| cfg.error("mask", "type", e.to_string()))
}

pub fn scan_positions(cfg: &RunConfig) -> Result<Vec<f64>> {
    let start = cfg.quantity("scan", "start")?;
    let stop = cfg.quantity("scan", "stop")?;
    let step = cfg.quantity("scan", "step")?;
    if !(step > 0.0) || !(stop >= start) {
        return Err(cfg.error("scan", "step", "need step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(cfg.error("scan", "step", "more than 100000 scan positions"));
    }
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Ghost-scan inputs from `[source]`, `[geometry]`, `[mask]`, `[scan]` and
/// the optional `[reference]`, `[bucket]`, `[grid]`.
pub fn ghost_config(cfg: &RunConfig) -> Result<GhostConfig> {
    let mut cfg = cfg.clone();
    for s in ["source", "geometry", "mask", "scan", "reference", "bucket", "grid"] {
        cfg.require_section(s)?;
    }
    let source = source(&cfg)?;
    let (geometry, lens_tolerance) = geometry(&cfg)?;
    let temporal_modes = match cfg.opt_number("scan", "temporal_modes")? {
        Some(m) => m,
        None => suggested_temporal_modes(
            cfg.quantity("scan", "peak_halfwidth")?,
            cfg.quantity("scan", "combined_jitter")?,
            source.coherence_time,
        )?,
    };
    let reference = DetectorSpec {
        center: 0.0,
        aperture_diameter: cfg.quantity("reference", "aperture")?,
        efficiency: cfg.number("reference", "efficiency")?,
        jitter_fwhm: 0.0,
        dead_time: 0.0,
        dark_rate: 0.0,
    };
    reference
        .validate()
        .map_err(|e| cfg.error("reference", "aperture", e.to_string()))?;
    let bucket = BucketSpec {
        efficiency: cfg.number("bucket", "efficiency")?,
        aperture: cfg
            .opt_quantity("bucket", "aperture")?
            .map(|d| Ok::<_, Error>((cfg.quantity("bucket", "center")?, d)))
            .transpose()?,
    };
    let points = cfg.integer("grid", "points")? as usize;
    let grid = make_grid(points, cfg.quantity("grid", "pitch")?, 0.0)
        .map_err(|e| cfg.error("grid", "points", e.to_string()))?;
    let sharing = match cfg.text("scan", "sharing")? {
        Some("shared") => FrameSharing::Shared,
        _ => FrameSharing::Independent,
    };
    let out = GhostConfig {
        source,
        geometry,
        mask: mask(&cfg)?,
        reference,
        bucket,
        positions: scan_positions(&cfg)?,
        frames: cfg.integer("scan", "frames")? as usize,
        temporal_modes,
        master_seed: seed(&cfg)?,
        grid,
        relay: Relay {
            half_angle: cfg.quantity("source", "divergence")?,
            taper: cfg.number("source", "divergence_taper")?,
        },
        lens_tolerance,
        sharing,
    };
    out.validate().map_err(|e| cfg.error("scan", "frames", e.to_string()))?;
    Ok(out)
}

fn manifest_lines(cfg: &RunConfig, scenario: Scenario, threads: usize, wall: f64) -> Vec<String> {
    let mut lines = vec![
        format!("ghostsim {VERSION}"),
        format!("scenario = {}", scenario.name()),
        format!("seed = {}", seed(cfg).unwrap_or(1)),
        format!("threads = {threads}"),
        format!("wall_time_s = {wall:.3}"),
        "config:".to_string(),
    ];
    lines.extend(cfg.to_text().lines().map(|l| format!("  {l}")));
    lines
}

fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn output_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

struct Summary {
    rows: Vec<(String, f64, f64, String)>,
}

impl Summary {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    fn add(&mut self, name: &str, value: f64, err: f64, unit: &str) {
        self.rows.push((name.to_string(), value, err, unit.to_string()));
    }

    fn lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|(n, v, e, u)| {
                if e.is_nan() {
                    format!("{n} = {v} {u}")
                } else {
                    format!("{n} = {v} +- {e} {u}")
                }
            })
            .map(|s| s.trim_end().to_string())
            .collect()
    }

    fn write(&self, w: &mut Vec<u8>, header: &[String]) -> Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "quantity,value,std_error,unit")?;
        for (n, v, e, u) in &self.rows {
            writeln!(w, "{n},{v},{e},{u}")?;
        }
        Ok(())
    }
}

fn hbt_summary(a: &HbtAnalysis, s: &mut Summary) {
    s.add("g2_zero", a.g2_zero.value, a.g2_zero.std_error, "");
    s.add("coincidences", a.histogram.total() as f64, f64::NAN, "counts");
    s.add("starts", a.histogram.n_starts() as f64, f64::NAN, "counts");
    s.add("combined_jitter_fwhm", a.combined_jitter * 1e9, f64::NAN, "ns");
    if let Some(t) = a.tau0_estimate {
        s.add("tau0_estimate", t * 1e9, f64::NAN, "ns");
    }
    if let Ok(f) = &a.fit {
        s.add("fit_fwhm", f.fwhm * 1e9, f.fwhm_err * 1e9, "ns");
        s.add("fit_center", f.center * 1e9, f.center_err * 1e9, "ns");
        s.add("fit_amplitude", f.amplitude, f.amplitude_err, "counts/bin");
        s.add("fit_baseline", f.baseline, f.baseline_err, "counts/bin");
        s.add("fit_residual_norm", f.residual_norm, f64::NAN, "");
        s.add("fit_reduced_chi2", f.reduced_chi2, f64::NAN, "");
        s.add("fit_peak_g2", 1.0 + f.amplitude / f.baseline, f64::NAN, "");
    }
}

/// A data file: suffix, column names, rows.
type Curve<'a> = (&'a str, Vec<&'a str>, Vec<Vec<f64>>);

/// Executes one scenario and writes its outputs under `prefix`.
pub fn run(cfg: &RunConfig, scenario: Scenario, prefix: &str, threads: usize) -> Result<RunReport> {
    let started = Instant::now();
    let mut summary = Summary::new();
    let mut warnings = Vec::new();
    let mut deferred = None;
    let mut passed = true;
    let mut curves: Vec<Curve> = Vec::new();
    let mut histogram = None;
    let mut extra_lines = Vec::new();

    match scenario {
        Scenario::CheckLens => {
            let (g, tol) = geometry(cfg)?;
            let r: LensReport = check_lens_equation(&g, tol)?;
            summary.add("residual", r.residual, f64::NAN, "1/m");
            summary.add("relative_residual", r.relative_residual, f64::NAN, "");
            summary.add("tolerance", tol, f64::NAN, "");
            summary.add("satisfied", if r.satisfied { 1.0 } else { 0.0 }, f64::NAN, "");
            summary.add("magnification", r.magnification, f64::NAN, "");
            if let Some(off) = r.conjugate_offset {
                summary.add("conjugate_offset", off, f64::NAN, "m");
            }
            if r.infinite_conjugate {
                warnings.push("infinite conjugate: z3 = f, no finite image plane".to_string());
            }
        }
        Scenario::IdealCurve => {
            let mut c = cfg.clone();
            for s in ["geometry", "mask", "scan", "reference", "ideal"] {
                c.require_section(s)?;
            }
            let (g, _) = geometry(&c)?;
            let m = mask(&c)?;
            let n = match c.opt_integer("ideal", "features")? {
                Some(n) => n as usize,
                None => m.feature_count().filter(|k| *k > 0).unwrap_or(1),
            };
            let width = match c.opt_quantity("ideal", "coherence_width")? {
                Some(w) => w,
                None => {
                    c.require_section("source")?;
                    coherence_width(
                        c.quantity("source", "wavelength")?,
                        g.z1,
                        c.quantity("source", "diameter")?,
                    )?
                }
            };
            let det = DetectorSpec {
                center: 0.0,
                aperture_diameter: c.quantity("reference", "aperture")?,
                efficiency: 1.0,
                jitter_fwhm: 0.0,
                dead_time: 0.0,
                dark_rate: 0.0,
            };
            let positions = scan_positions(&c)?;
            let curve = ideal_ghost_curve(&g, &m, n, &det, width, &positions)
                .map_err(|e| c.error("ideal", "features", e.to_string()))?;
            let vis = crate::correlation::visibility(&curve)?;
            summary.add("features", n as f64, f64::NAN, "");
            summary.add("coherence_width", width * 1e3, f64::NAN, "mm");
            summary.add("magnification", predicted_magnification(&g)?, f64::NAN, "");
            summary.add("visibility", vis, f64::NAN, "");
            let rows = curve.iter().map(|(x, v)| vec![scaled_for_csv(*x, 1e3), *v]).collect();
            curves.push(("ideal.csv", vec!["position_mm", "g2"], rows));
        }
        Scenario::Ghost => {
            let g = ghost_config(cfg)?;
            let scan = run_ghost(&g)?;
            warnings.extend(scan.warnings.iter().cloned());
            summary.add("visibility", scan.visibility, f64::NAN, "");
            summary.add("temporal_modes", scan.temporal_modes, f64::NAN, "");
            summary.add("magnification", scan.magnification, f64::NAN, "");
            summary.add("lens_relative_residual", scan.lens.relative_residual, f64::NAN, "");
            summary.add("coherence_width_reference", scan.coherence_width * 1e3, f64::NAN, "mm");
            summary.add("frames_per_position", g.frames as f64, f64::NAN, "");
            for (i, p) in scan.peaks.iter().enumerate() {
                summary.add(&format!("peak_{}", i + 1), scaled_for_csv(*p, 1e3), f64::NAN, "mm");
            }
            if scan.peaks.len() == 2 {
                summary.add(
                    "peak_separation",
                    scaled_for_csv(scan.peaks[1] - scan.peaks[0], 1e3),
                    f64::NAN,
                    "mm",
                );
            }
            let rows = |v: &[crate::correlation::G2Estimate]| -> Vec<Vec<f64>> {
                scan.positions
                    .iter()
                    .zip(v)
                    .map(|(x, e)| vec![scaled_for_csv(*x, 1e3), e.value, e.std_error])
                    .collect()
            };
            curves.push(("scan.csv", vec!["position_mm", "g2", "g2_err"], rows(&scan.g2)));
            curves.push(("scan_raw.csv", vec!["position_mm", "g2", "g2_err"], rows(&scan.raw)));
        }
        Scenario::Hbt => {
            let mut c = cfg.clone();
            c.require_section("hbt")?;
            let start = c.text("hbt", "start_stream")?.map(str::to_string);
            let stop = c.text("hbt", "stop_stream")?.map(str::to_string);
            let analysis = match (start, stop) {
                (Some(a), Some(b)) => {
                    for s in ["detector1", "detector2", "tac"] {
                        c.require_section(s)?;
                    }
                    let read = |p: &str| -> Result<PhotonStream> {
                        let f = fs::File::open(p).map_err(|e| Error::Io(format!("{p}: {e}")))?;
                        PhotonStream::read_text(BufReader::new(f))
                    };
                    let (s0, s1) = (read(&a)?, read(&b)?);
                    let t = tac(&c)?;
                    let h = match t.mode {
                        TacMode::FirstStop => tac_histogram(&s0, &s1, t.range, t.bin_width)?,
                        TacMode::AllPairs => tac_histogram_all_pairs(&s0, &s1, t.range, t.bin_width)?,
                    };
                    let jitter = detector(&c, "detector1")?
                        .jitter_fwhm
                        .hypot(detector(&c, "detector2")?.jitter_fwhm);
                    summary.add("start_events", s0.len() as f64, f64::NAN, "counts");
                    summary.add("stop_events", s1.len() as f64, f64::NAN, "counts");
                    analyze_histogram(h, &t, jitter, coherence_model(&c)?)?
                }
                (None, None) => {
                    let h = hbt_config(&c)?;
                    let r = run_hbt(&h)?;
                    let rates = r.singles_rates(h.integration_time);
                    summary.add("singles_rate_start", rates[0], f64::NAN, "Hz");
                    summary.add("singles_rate_stop", rates[1], f64::NAN, "Hz");
                    summary.add("blocks", r.blocks as f64, f64::NAN, "");
                    if r.emitter.capped > 0 {
                        warnings.push(format!("{} intensity states above the sampling cap", r.emitter.capped));
                    }
                    r.analysis
                }
                _ => return Err(c.error("hbt", "start_stream", "start_stream and stop_stream go together")),
            };
            hbt_summary(&analysis, &mut summary);
            if let Err(e) = &analysis.fit {
                deferred = Some(e.clone());
            }
            histogram = Some(analysis.histogram);
        }
        Scenario::Selftest => {
            let outcomes = selftest::run_all(seed(cfg)?);
            for o in &outcomes {
                extra_lines.push(o.line());
                passed &= o.passed;
            }
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let manifest = manifest_lines(cfg, scenario, threads, wall);
    let mut lines = extra_lines;
    lines.extend(summary.lines());
    lines.extend(warnings.iter().map(|w| format!("warning: {w}")));
    let mut files = Vec::new();
    if scenario != Scenario::Selftest {
        if let Some(h) = &histogram {
            let p = output_path(prefix, "histogram.csv");
            write_file(&p, |w| h.write_csv(w, &manifest))?;
            files.push(p);
        }
        for (suffix, cols, rows) in &curves {
            let p = output_path(prefix, suffix);
            write_file(&p, |w| write_curve_csv(w, &manifest, cols, rows))?;
            files.push(p);
        }
        let p = output_path(prefix, "summary.csv");
        write_file(&p, |w| summary.write(w, &manifest))?;
        files.push(p);
        let p = output_path(prefix, "manifest.txt");
        let listed: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
        write_file(&p, |w| {
            for l in &manifest {
                writeln!(w, "{l}")?;
            }
            writeln!(w, "outputs:")?;
            for f in &listed {
                writeln!(w, "  {f}")?;
            }
            writeln!(w, "results:")?;
            for l in &lines {
                writeln!(w, "  {l}")?;
            }
            Ok(())
        })?;
        files.push(p);
    }
    Ok(RunReport {
        lines,
        files,
        deferred,
        passed,
    })
}

/// Loads the config file (if any) and applies overrides.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            crate::config::parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.require_section("run")?;
    if let Some(s) = overrides.seed {
        cfg.set("run", "seed", Value::Integer(s));
    }
    if let Some(o) = &overrides.out {
        cfg.set("run", "out", Value::Text(o.clone()));
    }
    if let Some(t) = overrides.threads {
        cfg.set("run", "threads", Value::Integer(t as u64));
    }
    Ok(cfg)
}

/// Full invocation: config, thread pool, run. Returns the process exit code
/// and the report or the error.
pub fn execute(scenario: Scenario, path: Option<&Path>, overrides: &Overrides) -> (i32, Result<RunReport>) {
    let result = (|| {
        if path.is_none() && !matches!(scenario, Scenario::Selftest) {
            return Err(Error::Config {
                line: 0,
                key: "--config".into(),
                message: format!("{} needs a configuration file", scenario.name()),
            });
        }
        let cfg = load(path, overrides)?;
        if let Some(s) = cfg.text("run", "scenario")? {
            if s != scenario.name() {
                return Err(cfg.error(
                    "run",
                    "scenario",
                    format!("file is for `{s}`, invoked as `{}`", scenario.name()),
                ));
            }
        }
        let threads = cfg.integer("run", "threads")? as usize;
        let prefix = cfg.text("run", "out")?.unwrap_or(scenario.name()).to_string();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let used = pool.current_num_threads();
        pool.install(|| run(&cfg, scenario, &prefix, used))
    })();
    let code = match &result {
        Ok(r) if !r.passed => 1,
        Ok(r) => r.deferred.as_ref().map_or(0, Error::exit_code),
        Err(e) => e.exit_code(),
    };
    (code, result)
}

/// Single-line machine-readable error report.
pub fn error_line(scenario: Scenario, e: &Error) -> String {
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
    format!(
        "error scenario={} kind={} exit={} message=\"{msg}\"",
        scenario.name(),
        e.kind(),
        e.exit_code()
    )
}
