//! Run configuration files.
//!
//! Line-oriented: `[section]` headers, `key = value [unit]` entries, `#`
//! starts a comment. Physical quantities must carry a unit and are stored in
//! SI. Every section has a fixed key set; unknown and duplicate keys are
//! errors that name the line.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Length,
    Time,
    Rate,
    Angle,
}

impl Dim {
    fn si_unit(self) -> &'static str {
        match self {
            Dim::Length => "m",
            Dim::Time => "s",
            Dim::Rate => "Hz",
            Dim::Angle => "rad",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        match (self, unit) {
            (Dim::Length, "nm") => Some(1e-9),
            (Dim::Length, "um" | "µm" | "μm") => Some(1e-6),
            (Dim::Length, "mm") => Some(1e-3),
            (Dim::Length, "cm") => Some(1e-2),
            (Dim::Length, "m") => Some(1.0),
            (Dim::Time, "ps") => Some(1e-12),
            (Dim::Time, "ns") => Some(1e-9),
            (Dim::Time, "s") => Some(1.0),
            (Dim::Rate, "Hz") => Some(1.0),
            (Dim::Rate, "kHz") => Some(1e3),
            (Dim::Angle, "mrad") => Some(1e-3),
            (Dim::Angle, "rad") => Some(1.0),
            _ => None,
        }
    }

    fn units(self) -> &'static str {
        match self {
            Dim::Length => "nm, um, mm, cm, m",
            Dim::Time => "ps, ns, s",
            Dim::Rate => "Hz, kHz",
            Dim::Angle => "mrad, rad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Quantity(Dim),
    QuantityOrAuto(Dim),
    Number,
    NumberOrAuto,
    Integer,
    Bool,
    Choice(&'static [&'static str]),
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Need {
    Required,
    Default(&'static str),
    Optional,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    need: Need,
}

const fn key(name: &'static str, kind: Kind, need: Need) -> KeySpec {
    KeySpec { name, kind, need }
}

use Dim::*;
use Kind::*;
use Need::*;

pub const SCENARIOS: &[&str] = &["hbt", "ghost", "check-lens", "ideal-curve", "selftest"];

const RUN: &[KeySpec] = &[
    key("scenario", Choice(SCENARIOS), Optional),
    key("seed", Integer, Default("1")),
    key("out", Text, Optional),
    key("threads", Integer, Default("0")),
];
const SOURCE: &[KeySpec] = &[
    key("diameter", Quantity(Length), Required),
    key("wavelength", Quantity(Length), Required),
    key("coherence_time", Quantity(Time), Required),
    key("mean_rate", Quantity(Rate), Required),
    key("divergence", Quantity(Angle), Default("3 mrad")),
    key("divergence_taper", Number, Default("0.5")),
];
const DETECTOR: &[KeySpec] = &[
    key("efficiency", Number, Default("1")),
    key("jitter_fwhm", Quantity(Time), Default("0.92 ns")),
    key("aperture", Quantity(Length), Default("2 mm")),
    key("center", Quantity(Length), Default("0 m")),
    key("dead_time", Quantity(Time), Default("0 s")),
    key("dark_rate", Quantity(Rate), Default("0 Hz")),
];
const TAC: &[KeySpec] = &[
    key("integration_time", Quantity(Time), Required),
    key("range_min", Quantity(Time), Default("-20 ns")),
    key("range_max", Quantity(Time), Default("20 ns")),
    key("bin_width", Quantity(Time), Default("50 ps")),
    key("mode", Choice(&["first-stop", "all-pairs"]), Default("first-stop")),
    key("peak_halfwidth", Quantity(Time), Default("0.25 ns")),
    key("baseline_exclusion", Quantity(Time), Default("5 ns")),
];
const HBT: &[KeySpec] = &[
    key("sampler", Choice(&["event", "trace"]), Default("event")),
    key("trace_dt", Quantity(Time), Optional),
    key("shared_source", Bool, Default("true")),
    key("block_duration", Quantity(Time), Default("0.1 s")),
    key(
        "coherence_model",
        Choice(&["lorentzian", "gaussian"]),
        Default("lorentzian"),
    ),
    key("start_stream", Text, Optional),
    key("stop_stream", Text, Optional),
];
const GEOMETRY: &[KeySpec] = &[
    key("z1", Quantity(Length), Required),
    key("z2", Quantity(Length), Required),
    key("z3", Quantity(Length), Required),
    key("f", Quantity(Length), Required),
    key("tolerance", Number, Default("0.01")),
];
const MASK: &[KeySpec] = &[
    key(
        "type",
        Choice(&["double-pinhole", "pinholes", "open", "opaque"]),
        Required,
    ),
    key("separation", Quantity(Length), Optional),
    key("hole_diameter", Quantity(Length), Optional),
    key("count", Integer, Optional),
];
const REFERENCE: &[KeySpec] = &[
    key("aperture", Quantity(Length), Default("2 mm")),
    key("efficiency", Number, Default("1")),
];
const BUCKET: &[KeySpec] = &[
    key("efficiency", Number, Default("1")),
    key("aperture", Quantity(Length), Optional),
    key("center", Quantity(Length), Default("0 m")),
];
const SCAN: &[KeySpec] = &[
    key("start", Quantity(Length), Required),
    key("stop", Quantity(Length), Required),
    key("step", Quantity(Length), Required),
    key("frames", Integer, Default("2000")),
    key("temporal_modes", NumberOrAuto, Default("1")),
    key("peak_halfwidth", Quantity(Time), Default("0.25 ns")),
    key("combined_jitter", Quantity(Time), Default("1.3 ns")),
    key("sharing", Choice(&["independent", "shared"]), Default("independent")),
];
const GRID: &[KeySpec] = &[
    key("points", Integer, Default("4096")),
    key("pitch", Quantity(Length), Default("5 um")),
];
const IDEAL: &[KeySpec] = &[
    key("coherence_width", QuantityOrAuto(Length), Default("auto")),
    key("features", Integer, Optional),
];

const SECTIONS: &[(&str, &[KeySpec])] = &[
    ("run", RUN),
    ("source", SOURCE),
    ("detector1", DETECTOR),
    ("detector2", DETECTOR),
    ("tac", TAC),
    ("hbt", HBT),
    ("geometry", GEOMETRY),
    ("mask", MASK),
    ("reference", REFERENCE),
    ("bucket", BUCKET),
    ("scan", SCAN),
    ("grid", GRID),
    ("ideal", IDEAL),
];

fn section_spec(name: &str) -> Option<&'static [KeySpec]> {
    SECTIONS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A parsed value, quantities in SI.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Quantity(f64, Dim),
    Number(f64),
    Integer(u64),
    Bool(bool),
    Choice(String),
    Text(String),
    Auto,
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Quantity(v, d) => format!("{v:?} {}", d.si_unit()),
            Value::Number(v) => format!("{v:?}"),
            Value::Integer(v) => v.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Choice(s) | Value::Text(s) => s.clone(),
            Value::Auto => "auto".into(),
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_value(kind: Kind, raw: &str) -> std::result::Result<Value, String> {
    let mut parts = raw.split_whitespace();
    let first = parts.next().ok_or("missing value")?;
    let rest: Vec<&str> = parts.collect();
    let no_unit = |v: Value| {
        if rest.is_empty() {
            Ok(v)
        } else {
            Err(format!("unexpected trailing text `{}`", rest.join(" ")))
        }
    };
    match kind {
        Quantity(dim) | QuantityOrAuto(dim) => {
            if matches!(kind, QuantityOrAuto(_)) && first == "auto" {
                return no_unit(Value::Auto);
            }
            let v = parse_number(first).ok_or_else(|| format!("`{first}` is not a number"))?;
            match rest.as_slice() {
                [] => Err(format!("missing unit (one of {})", dim.units())),
                [unit] => dim
                    .factor(unit)
                    .map(|f| Value::Quantity(v * f, dim))
                    .ok_or_else(|| format!("unit `{unit}` is not one of {}", dim.units())),
                _ => Err(format!("unexpected trailing text `{}`", rest[1..].join(" "))),
            }
        }
        Number | NumberOrAuto => {
            if kind == NumberOrAuto && first == "auto" {
                return no_unit(Value::Auto);
            }
            let v = parse_number(first).ok_or_else(|| format!("`{first}` is not a number"))?;
            no_unit(Value::Number(v))
        }
        Integer => {
            let v: u64 = first
                .parse()
                .map_err(|_| format!("`{first}` is not a non-negative integer"))?;
            no_unit(Value::Integer(v))
        }
        Bool => match first {
            "true" => no_unit(Value::Bool(true)),
            "false" => no_unit(Value::Bool(false)),
            _ => Err(format!("`{first}` is not true or false")),
        },
        Choice(options) => {
            if options.contains(&first) {
                no_unit(Value::Choice(first.to_string()))
            } else {
                Err(format!("`{first}` is not one of {}", options.join(", ")))
            }
        }
        Text => Ok(Value::Text(raw.trim().to_string())),
    }
}

/// Parsed configuration: section name to key to value.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, Value>>,
    lines: HashMap<(String, String), usize>,
}

impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        self.sections == other.sections
    }
}

fn config_error(line: usize, key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.into(),
        message: message.into(),
    }
}

/// Parses a configuration file and fills documented defaults of every
/// section that appears.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| config_error(line_no, line, "malformed section header"))?
                .trim();
            if section_spec(name).is_none() {
                return Err(config_error(line_no, name, "unknown section"));
            }
            if cfg.sections.contains_key(name) {
                return Err(config_error(line_no, name, "duplicate section"));
            }
            cfg.sections.insert(name.to_string(), BTreeMap::new());
            cfg.lines.insert((name.to_string(), String::new()), line_no);
            current = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_error(line_no, line, "expected `key = value`"))?;
        let k = k.trim();
        let section = current
            .clone()
            .ok_or_else(|| config_error(line_no, k, "entry before any [section]"))?;
        let spec = section_spec(&section)
            .expect("section validated")
            .iter()
            .find(|s| s.name == k)
            .ok_or_else(|| config_error(line_no, format!("{section}.{k}"), "unknown key"))?;
        let entries = cfg.sections.get_mut(&section).expect("section exists");
        if entries.contains_key(k) {
            return Err(config_error(line_no, format!("{section}.{k}"), "duplicate key"));
        }
        let value = parse_value(spec.kind, v).map_err(|m| config_error(line_no, format!("{section}.{k}"), m))?;
        entries.insert(k.to_string(), value);
        cfg.lines.insert((section, k.to_string()), line_no);
    }
    let names: Vec<String> = cfg.sections.keys().cloned().collect();
    for name in names {
        cfg.complete_section(&name)?;
    }
    Ok(cfg)
}

impl RunConfig {
    fn complete_section(&mut self, name: &str) -> Result<()> {
        let header = self.lines.get(&(name.to_string(), String::new())).copied().unwrap_or(0);
        let spec = section_spec(name).ok_or_else(|| config_error(0, name, "unknown section"))?;
        let entries = self.sections.entry(name.to_string()).or_default();
        for k in spec {
            if entries.contains_key(k.name) {
                continue;
            }
            match k.need {
                Required => {
                    return Err(config_error(
                        header,
                        format!("{name}.{}", k.name),
                        "missing required key",
                    ));
                }
                Default(text) => {
                    let v = parse_value(k.kind, text).expect("valid built-in default");
                    entries.insert(k.name.to_string(), v);
                }
                Optional => {}
            }
        }
        Ok(())
    }

    /// Makes sure a section exists, filling its defaults; an absent section
    /// with required keys is a config error.
    pub fn require_section(&mut self, name: &str) -> Result<()> {
        if !self.sections.contains_key(name) {
            let spec = section_spec(name).ok_or_else(|| config_error(0, name, "unknown section"))?;
            if let Some(k) = spec.iter().find(|k| k.need == Required) {
                return Err(config_error(
                    0,
                    format!("{name}.{}", k.name),
                    format!("missing section [{name}]"),
                ));
            }
        }
        self.complete_section(name)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.sections.get(section)?.get(key)
    }

    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.lines
            .get(&(section.to_string(), key.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Config error pinned to the line of `section.key`.
    pub fn error(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        config_error(self.line_of(section, key), format!("{section}.{key}"), message)
    }

    fn missing(&self, section: &str, key: &str) -> Error {
        let line = self
            .lines
            .get(&(section.to_string(), String::new()))
            .copied()
            .unwrap_or(0);
        config_error(line, format!("{section}.{key}"), "missing key")
    }

    pub fn set(&mut self, section: &str, key: &str, value: Value) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value);
    }

    pub fn quantity(&self, section: &str, key: &str) -> Result<f64> {
        match self.get(section, key) {
            Some(Value::Quantity(v, _)) => Ok(*v),
            Some(_) => Err(self.error(section, key, "expected a quantity")),
            None => Err(self.missing(section, key)),
        }
    }

    pub fn opt_quantity(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None | Some(Value::Auto) => Ok(None),
            Some(_) => self.quantity(section, key).map(Some),
        }
    }

    pub fn number(&self, section: &str, key: &str) -> Result<f64> {
        match self.get(section, key) {
            Some(Value::Number(v)) => Ok(*v),
            Some(_) => Err(self.error(section, key, "expected a number")),
            None => Err(self.missing(section, key)),
        }
    }

    pub fn opt_number(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None | Some(Value::Auto) => Ok(None),
            Some(_) => self.number(section, key).map(Some),
        }
    }

    pub fn integer(&self, section: &str, key: &str) -> Result<u64> {
        match self.get(section, key) {
            Some(Value::Integer(v)) => Ok(*v),
            Some(_) => Err(self.error(section, key, "expected an integer")),
            None => Err(self.missing(section, key)),
        }
    }

    pub fn opt_integer(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(_) => self.integer(section, key).map(Some),
        }
    }

    pub fn boolean(&self, section: &str, key: &str) -> Result<bool> {
        match self.get(section, key) {
            Some(Value::Bool(v)) => Ok(*v),
            Some(_) => Err(self.error(section, key, "expected true or false")),
            None => Err(self.missing(section, key)),
        }
    }

    pub fn text(&self, section: &str, key: &str) -> Result<Option<&str>> {
        match self.get(section, key) {
            Some(Value::Text(s)) | Some(Value::Choice(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.error(section, key, "expected text")),
            None => Ok(None),
        }
    }

    /// Normalized text form: sections and keys in sorted order, quantities in
    /// SI units with round-trip float formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {}", v.render());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HBT_MIN: &str = "
[source]
diameter = 0.5 mm
wavelength = 780 nm
coherence_time = 0.2 ns
mean_rate = 600 kHz

[detector1]
jitter_fwhm = 0.92 ns
[detector2]
jitter_fwhm = 0.92 ns

[tac]
integration_time = 100 s
";

    #[test]
    fn minimal_hbt_with_defaults() {
        let c = parse_config(HBT_MIN).unwrap();
        assert_eq!(c.quantity("source", "mean_rate").unwrap(), 6e5);
        assert!((c.quantity("source", "wavelength").unwrap() - 780e-9).abs() < 1e-20);
        assert_eq!(c.quantity("tac", "bin_width").unwrap(), 50e-12);
        assert_eq!(c.text("tac", "mode").unwrap(), Some("first-stop"));
        assert_eq!(c.number("detector1", "efficiency").unwrap(), 1.0);
        assert!(c.get("hbt", "sampler").is_none());
    }

    #[test]
    fn unit_conversion() {
        let c = parse_config("[geometry]\nz1 = 1.8 m\nz2 = 147.5 cm\nz3 = 12.4 cm\nf = 200 mm\n").unwrap();
        assert_eq!(c.quantity("geometry", "z3").unwrap(), 12.4 * 1e-2);
        assert!((c.quantity("geometry", "z3").unwrap() - 0.124).abs() < 1e-15);
        let c = parse_config("[grid]\npitch = 5 µm\n").unwrap();
        assert!((c.quantity("grid", "pitch").unwrap() - 5e-6).abs() < 1e-20);
    }

    fn line_of_error(text: &str) -> (usize, String) {
        match parse_config(text) {
            Err(Error::Config { line, key, .. }) => (line, key),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_line_and_key() {
        assert_eq!(
            line_of_error("[grid]\npitch = 5 um\npitch = 6 um\n"),
            (3, "grid.pitch".into())
        );
        assert_eq!(line_of_error("[grid]\nwidth = 5 um\n"), (2, "grid.width".into()));
        assert_eq!(line_of_error("\n[grid]\npitch = 5\n"), (3, "grid.pitch".into()));
        assert_eq!(line_of_error("[grid]\npitch = 5 furlong\n"), (2, "grid.pitch".into()));
        assert_eq!(line_of_error("[grid]\npitch 5 um\n"), (2, "pitch 5 um".into()));
        assert_eq!(line_of_error("[nope]\n"), (1, "nope".into()));
        assert_eq!(line_of_error("pitch = 5 um\n"), (1, "pitch".into()));
        assert_eq!(
            line_of_error("# bench\n[geometry]\nz1 = 1 m\n"),
            (2, "geometry.z2".into())
        );
        assert_eq!(
            line_of_error("[scan]\nstart = 0 mm\nstop = 1 mm\nstep = 1 mm\nframes = -3\n").0,
            5
        );
    }

    #[test]
    fn comments_and_auto() {
        let c = parse_config(
            "# top\n[scan] # trailing\nstart = -5 mm # here\nstop = 5 mm\nstep = 0.5 mm\ntemporal_modes = auto\n",
        )
        .unwrap();
        assert_eq!(c.get("scan", "temporal_modes"), Some(&Value::Auto));
        assert_eq!(c.quantity("scan", "start").unwrap(), -5e-3);
    }

    #[test]
    fn round_trip() {
        let c = parse_config(HBT_MIN).unwrap();
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }

    #[test]
    fn require_section_fills_defaults() {
        let mut c = parse_config(HBT_MIN).unwrap();
        c.require_section("hbt").unwrap();
        assert_eq!(c.text("hbt", "sampler").unwrap(), Some("event"));
        assert!(matches!(c.require_section("geometry"), Err(Error::Config { .. })));
    }
}
