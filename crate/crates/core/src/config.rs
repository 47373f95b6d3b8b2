//! Experiment configuration. The document is a sectioned key-value file in
//! TOML syntax; quantities take unit suffixes and angles take fractions of π.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::engines::{BhsiParams, EngineKind, RetrocausalMode};
use crate::error::{Error, Result};
use crate::physics::{PhaseMode, PhysicsField, PhysicsParams};
use crate::sensor::{validate_timing, SensorTimings, Stage};
use crate::stages::{EmSetup, StageConfig};
use crate::state::{prepare_qubit, SpinQubit};
use crate::stats::DEFAULT_SIGNIFICANCE;
use crate::units::{parse_angle, parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::domain(format!(
                "unknown output format `{s}` (json | csv)"
            ))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsConfig {
    /// p-value below which a test is reported as significant.
    pub significance: f64,
    /// Confidence level of anomaly-rate intervals.
    pub confidence: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            significance: DEFAULT_SIGNIFICANCE,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stage: Stage,
    pub engine: EngineKind,
    pub bhsi: Option<BhsiParams>,
    pub initial: SpinQubit,
    pub ts_inserted: bool,
    pub timings: SensorTimings,
    pub physics: Option<EmSetup>,
    pub trials: u64,
    pub seed: u64,
    pub stats: StatsConfig,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 7] = [
    "experiment",
    "initial",
    "timings",
    "bhsi",
    "physics",
    "stats",
    "output",
];

const PRESETS: [&str; 3] = ["default", "electron-ion", "electron-pair"];

fn preset(name: &str) -> Option<PhysicsParams> {
    match name {
        "default" => Some(PhysicsParams::default()),
        "electron-ion" => Some(PhysicsParams::electron_ion()),
        "electron-pair" => Some(PhysicsParams::electron_pair()),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Defaults everywhere else: reference timings, TSs inserted, and for
    /// stage 3 the reference physics parameters in verbatim mode. BHSI gets
    /// all-zero anomaly parameters.
    pub fn new(
        stage: Stage,
        engine: EngineKind,
        initial: SpinQubit,
        trials: u64,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            stage,
            engine,
            bhsi: (engine == EngineKind::BranchedSubspace).then(BhsiParams::default),
            initial,
            ts_inserted: true,
            timings: SensorTimings::default(),
            physics: (stage == Stage::Three).then(|| EmSetup {
                params: PhysicsParams::default(),
                mode: PhaseMode::Verbatim,
                tolerance: None,
            }),
            trials,
            seed,
            stats: StatsConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn stage_config(&self) -> StageConfig {
        StageConfig {
            stage: self.stage,
            initial: self.initial,
            timings: self.timings,
            em: self.physics,
            ts_inserted: self.ts_inserted,
        }
    }

    /// Cross-field rules.
    pub fn validate(&self) -> Result<()> {
        match (self.engine, &self.bhsi) {
            (EngineKind::BranchedSubspace, None) => {
                return Err(Error::domain("engine BHSI requires a [bhsi] block"))
            }
            (EngineKind::BranchedSubspace, Some(p)) => p.validate()?,
            (e, Some(_)) => {
                return Err(Error::domain(format!(
                    "a [bhsi] block is only valid with engine BHSI, not {e}"
                )))
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be positive"));
        }
        self.check_stats()?;
        self.stage_config().validate()
    }

    fn check_stats(&self) -> Result<()> {
        let s = &self.stats;
        if !(s.significance > 0.0 && s.significance < 1.0) {
            return Err(Error::domain(format!(
                "significance {} outside (0, 1)",
                s.significance
            )));
        }
        if !(s.confidence > 0.0 && s.confidence < 1.0) {
            return Err(Error::domain(format!(
                "confidence {} outside (0, 1)",
                s.confidence
            )));
        }
        Ok(())
    }

    /// Everything except `[output]`, in canonical form.
    fn body_string(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        section(w, "experiment");
        kv(w, "stage", self.stage.number());
        kv(w, "engine", quote(self.engine.code()));
        kv(w, "trials", int(self.trials));
        kv(w, "seed", int(self.seed));
        kv(w, "ts_inserted", self.ts_inserted);

        section(w, "initial");
        kv(w, "theta", float(self.initial.theta()));
        kv(w, "phi", float(self.initial.phi()));

        section(w, "timings");
        let t = &self.timings;
        kv(w, "tau_od", float(t.tau_od));
        kv(w, "tau_ts", float(t.tau_ts));
        kv(w, "t_window", float(t.t_window));
        kv(w, "rep_rate", float(t.rep_rate));
        kv(w, "gap_transit", float(t.gap_transit));

        if let Some(b) = &self.bhsi {
            section(w, "bhsi");
            kv(w, "p_delayed", float(b.p_delayed));
            kv(w, "p_uncommitted", float(b.p_uncommitted));
            kv(w, "p_double_ts", float(b.p_double_ts));
            kv(w, "p_recohere", float(b.p_recohere));
            kv(
                w,
                "retrocausal_mode",
                quote(&b.retrocausal_mode.to_string()),
            );
        }

        if let Some(em) = &self.physics {
            section(w, "physics");
            for f in PhysicsField::ALL {
                kv(w, f.name(), float(em.params.get(f)));
            }
            kv(w, "phase_mode", quote(&em.mode.to_string()));
            if let Some(tol) = em.tolerance {
                kv(w, "phase_tolerance", float(tol));
            }
        }

        section(w, "stats");
        kv(w, "significance", float(self.stats.significance));
        kv(w, "confidence", float(self.stats.confidence));
        s
    }

    /// Serialize to a document that parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = self.body_string();
        section(&mut s, "output");
        if let Some(p) = &self.output.path {
            kv(&mut s, "path", quote(&p.to_string_lossy()));
        }
        kv(&mut s, "format", quote(&self.output.format.to_string()));
        s
    }

    /// SHA-256 of the canonical document, without `[output]`, as lowercase hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.body_string().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn section(w: &mut String, name: &str) {
    if !w.is_empty() {
        w.push('\n');
    }
    let _ = writeln!(w, "[{name}]");
}

fn kv(w: &mut String, key: &str, value: impl fmt::Display) {
    let _ = writeln!(w, "{key} = {value}");
}

fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn int(v: u64) -> String {
    if v <= i64::MAX as u64 {
        v.to_string()
    } else {
        quote(&v.to_string())
    }
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn inner_message(e: Error) -> String {
    match e {
        Error::Domain(m) | Error::State(m) => m,
        other => other.to_string(),
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Finds where sections and keys sit in the source text.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn header(line: &str) -> Option<&str> {
        let t = line.trim();
        let t = t.strip_prefix('[')?;
        let end = t.find(']')?;
        Some(t[..end].trim())
    }

    /// Line of `key` inside `[section]`, else of the section header, else 0.
    fn line_of(&self, section: &str, key: Option<&str>) -> usize {
        let mut current = None;
        let mut header_line = 0;
        for (i, line) in self.text.lines().enumerate() {
            if let Some(h) = Self::header(line) {
                current = Some(h);
                if h == section && header_line == 0 {
                    header_line = i + 1;
                }
                continue;
            }
            if current != Some(section) {
                continue;
            }
            if let Some(k) = key {
                let t = line.trim_start();
                let t = t
                    .strip_prefix(k)
                    .or_else(|| t.strip_prefix(&format!("\"{k}\"")));
                if t.is_some_and(|rest| rest.trim_start().starts_with('=')) {
                    return i + 1;
                }
            }
        }
        header_line
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    loc: &'a Locator<'a>,
}

impl<'a> Section<'a> {
    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        let (line, key) = if key.is_empty() {
            (self.loc.line_of(self.name, None), self.name.to_string())
        } else {
            (
                self.loc.line_of(self.name, Some(key)),
                format!("{}.{key}", self.name),
            )
        };
        Error::Parse {
            line,
            key,
            message: message.into(),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(self.err(
                        k,
                        format!("unknown key (expected one of: {})", allowed.join(", ")),
                    ));
                }
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.get(key)
            .ok_or_else(|| self.err(key, "missing required key"))
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(key, "expected a number")),
        }
    }

    fn quantity(&self, key: &str, dim: Dimension, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => {
                parse_quantity(s, dim).map_err(|e| self.err(key, inner_message(e)))
            }
            Some(v) => self.number(key, v),
        }
    }

    fn float(&self, key: &str, default: f64) -> Result<f64> {
        self.quantity(key, Dimension::Dimensionless, default)
    }

    fn angle(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = match (self.get(key), default) {
            (None, Some(d)) => return Ok(d),
            (None, None) => return Err(self.err(key, "missing required key")),
            (Some(v), _) => v,
        };
        match v {
            Value::String(s) => parse_angle(s).map_err(|e| self.err(key, inner_message(e))),
            v => self.number(key, v),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    fn uint(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            Value::String(s) => s
                .trim()
                .parse()
                .map_err(|_| self.err(key, format!("`{s}` is not a non-negative integer"))),
            _ => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn parse<T: FromStr<Err = Error>>(&self, key: &str, s: &str) -> Result<T> {
        s.parse().map_err(|e| self.err(key, inner_message(e)))
    }
}

/// Parse and fully validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e.span().map(|s| line_at(text, s.start)).unwrap_or(0),
        key: String::new(),
        message: e.message().trim().to_string(),
    })?;
    let loc = Locator { text };

    for (name, v) in &table {
        let known = SECTIONS.contains(&name.as_str());
        if !known || !v.is_table() {
            let line = text
                .lines()
                .position(|l| {
                    Locator::header(l) == Some(name) || l.trim_start().starts_with(name.as_str())
                })
                .map_or(0, |i| i + 1);
            let message = if known {
                "expected a [section]"
            } else {
                "unknown section"
            };
            return Err(Error::Parse {
                line,
                key: name.clone(),
                message: message.into(),
            });
        }
    }
    let sec = |name: &'static str| Section {
        name,
        table: table.get(name).and_then(Value::as_table),
        loc: &loc,
    };

    let exp = sec("experiment");
    exp.check_keys(&["stage", "engine", "trials", "seed", "ts_inserted"])?;
    let stage_n = exp.uint("stage", exp.required("stage")?)?;
    let stage = u8::try_from(stage_n)
        .ok()
        .and_then(|n| Stage::try_from(n).ok())
        .ok_or_else(|| exp.err("stage", format!("stage must be 1, 2 or 3, got {stage_n}")))?;
    let engine_s = exp
        .string("engine")?
        .ok_or_else(|| exp.err("engine", "missing required key"))?;
    let engine: EngineKind = exp.parse("engine", engine_s)?;
    let trials = exp.uint("trials", exp.required("trials")?)?;
    if trials == 0 {
        return Err(exp.err("trials", "trials must be positive"));
    }
    let seed = exp.uint("seed", exp.required("seed")?)?;
    let ts_inserted = exp.boolean("ts_inserted", true)?;
    if stage == Stage::One && !ts_inserted {
        return Err(exp.err(
            "ts_inserted",
            "the TSs can only be removed in stages 2 and 3",
        ));
    }

    let init = sec("initial");
    init.check_keys(&["theta", "phi"])?;
    if !init.present() {
        return Err(init.err("", "missing required section [initial]"));
    }
    let theta = init.angle("theta", None)?;
    let phi = init.angle("phi", Some(0.0))?;
    let initial = prepare_qubit(theta, phi).map_err(|e| init.err("theta", inner_message(e)))?;

    let tim = sec("timings");
    tim.check_keys(&["tau_od", "tau_ts", "t_window", "rep_rate", "gap_transit"])?;
    let d = SensorTimings::default();
    let timings = SensorTimings {
        tau_od: tim.quantity("tau_od", Dimension::Time, d.tau_od)?,
        tau_ts: tim.quantity("tau_ts", Dimension::Time, d.tau_ts)?,
        t_window: tim.quantity("t_window", Dimension::Time, d.t_window)?,
        rep_rate: tim.quantity("rep_rate", Dimension::Frequency, d.rep_rate)?,
        gap_transit: tim.quantity("gap_transit", Dimension::Time, d.gap_transit)?,
    };
    let report = validate_timing(&timings).map_err(|e| tim.err("", inner_message(e)))?;
    if let Some(fail) = report.failures().next() {
        return Err(tim.err("", format!("timing constraint violated: {}", fail.relation)));
    }
    let latest = timings.od_click_time().max(timings.tau_ts);
    if latest > timings.t_window {
        return Err(tim.err(
            "t_window",
            format!(
                "window {} s is shorter than the latest click at {latest} s",
                timings.t_window
            ),
        ));
    }

    let bh = sec("bhsi");
    bh.check_keys(&[
        "p_delayed",
        "p_uncommitted",
        "p_double_ts",
        "p_recohere",
        "retrocausal_mode",
    ])?;
    let bhsi = match (engine, bh.present()) {
        (EngineKind::BranchedSubspace, false) => {
            return Err(Error::Parse {
                line: 0,
                key: "bhsi".into(),
                message: "engine BHSI requires a [bhsi] block".into(),
            })
        }
        (EngineKind::BranchedSubspace, true) => {
            let p = BhsiParams {
                p_delayed: bh.float("p_delayed", 0.0)?,
                p_uncommitted: bh.float("p_uncommitted", 0.0)?,
                p_double_ts: bh.float("p_double_ts", 0.0)?,
                p_recohere: bh.float("p_recohere", 0.0)?,
                retrocausal_mode: match bh.string("retrocausal_mode")? {
                    Some(s) => bh.parse::<RetrocausalMode>("retrocausal_mode", s)?,
                    None => RetrocausalMode::default(),
                },
            };
            p.validate().map_err(|e| bh.err("", inner_message(e)))?;
            Some(p)
        }
        (e, true) => {
            return Err(bh.err(
                "",
                format!("a [bhsi] block is only valid with engine BHSI, not {e}"),
            ))
        }
        (_, false) => None,
    };

    let ph = sec("physics");
    let mut physics_keys: Vec<&str> = PhysicsField::ALL.iter().map(|f| f.name()).collect();
    physics_keys.extend(["preset", "phase_mode", "phase_tolerance"]);
    ph.check_keys(&physics_keys)?;
    let physics = match (stage, ph.present()) {
        (Stage::Three, false) => {
            return Err(Error::Parse {
                line: 0,
                key: "physics".into(),
                message: "stage 3 requires a [physics] block".into(),
            })
        }
        (Stage::Three, true) => {
            let mut params = match ph.string("preset")? {
                None => PhysicsParams::default(),
                Some(name) => preset(name).ok_or_else(|| {
                    ph.err(
                        "preset",
                        format!("unknown preset `{name}` ({})", PRESETS.join(" | ")),
                    )
                })?,
            };
            for f in PhysicsField::ALL {
                let v = ph.quantity(f.name(), f.dimension(), params.get(f))?;
                params = params.with(f, v);
            }
            params
                .validate()
                .map_err(|e| ph.err("", inner_message(e)))?;
            let mode = match ph.string("phase_mode")? {
                Some(s) => ph.parse::<PhaseMode>("phase_mode", s)?,
                None => PhaseMode::default(),
            };
            let tolerance = match ph.get("phase_tolerance") {
                Some(_) => Some(ph.angle("phase_tolerance", None)?),
                None => None,
            };
            Some(EmSetup {
                params,
                mode,
                tolerance,
            })
        }
        (s, true) => return Err(ph.err("", format!("stage {s} takes no [physics] block"))),
        (_, false) => None,
    };

    let st = sec("stats");
    st.check_keys(&["significance", "confidence"])?;
    let ds = StatsConfig::default();
    let stats = StatsConfig {
        significance: st.float("significance", ds.significance)?,
        confidence: st.float("confidence", ds.confidence)?,
    };

    let out = sec("output");
    out.check_keys(&["path", "format"])?;
    let output = OutputConfig {
        path: out.string("path")?.map(PathBuf::from),
        format: match out.string("format")? {
            Some(s) => out.parse("format", s)?,
            None => OutputFormat::default(),
        },
    };

    let cfg = ExperimentConfig {
        stage,
        engine,
        bhsi,
        initial,
        ts_inserted,
        timings,
        physics,
        trials,
        seed,
        stats,
        output,
    };
    cfg.check_stats()
        .map_err(|e| st.err("", inner_message(e)))?;
    cfg.stage_config().validate().map_err(|e| {
        let target = if cfg.physics.is_some() { &ph } else { &tim };
        target.err("", inner_message(e))
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    const MINIMAL: &str = r#"
[experiment]
stage = 1
engine = "CI"
trials = 1_000_000
seed = 42

[initial]
theta = "pi/4"
"#;

    fn parse_err(text: &str) -> (usize, String, String) {
        match parse_config(text) {
            Err(Error::Parse { line, key, message }) => (line, key, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.stage, Stage::One);
        assert_eq!(c.engine, EngineKind::Copenhagen);
        assert_eq!(c.trials, 1_000_000);
        assert_eq!(c.seed, 42);
        assert_eq!(c.initial.theta(), FRAC_PI_4);
        assert_eq!(c.timings, SensorTimings::default());
        assert!(c.bhsi.is_none() && c.physics.is_none());
        assert_eq!(c.output.format, OutputFormat::Json);
    }

    #[test]
    fn bhsi_needs_its_block() {
        let text = MINIMAL.replace("\"CI\"", "\"BHSI\"");
        let (_, key, message) = parse_err(&text);
        assert_eq!(key, "bhsi");
        assert!(message.contains("[bhsi]"));
    }

    #[test]
    fn stage1_rejects_physics() {
        let text = format!("{MINIMAL}\n[physics]\nd = \"100um\"\n");
        let (line, key, _) = parse_err(&text);
        assert_eq!(key, "physics");
        assert_eq!(line, 11);
    }

    #[test]
    fn unknown_key_is_located() {
        let text = MINIMAL.replace("seed = 42", "seed = 42\ncolour = \"blue\"");
        let (line, key, message) = parse_err(&text);
        assert_eq!((line, key.as_str()), (7, "experiment.colour"));
        assert!(message.contains("unknown key"));
        let (_, key, _) = parse_err(&format!("{MINIMAL}\n[extras]\nx = 1\n"));
        assert_eq!(key, "extras");
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("seed = 42\n", "");
        let (_, key, message) = parse_err(&text);
        assert_eq!(key, "experiment.seed");
        assert!(message.contains("missing"));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let (line, _, _) = parse_err("[experiment]\nstage = = 1\n");
        assert_eq!(line, 2);
    }

    #[test]
    fn units_resolve_to_si() {
        let text = format!(
            "{MINIMAL}\n[timings]\ntau_od = \"2ns\"\ntau_ts = \"0.02us\"\nt_window = \"80 ns\"\nrep_rate = \"2kHz\"\n"
        );
        let c = parse_config(&text).unwrap();
        assert!((c.timings.tau_od - 2e-9).abs() < 1e-24);
        assert!((c.timings.tau_ts - 2e-8).abs() < 1e-22);
        assert!((c.timings.t_window - 8e-8).abs() < 1e-22);
        assert_eq!(c.timings.rep_rate, 2000.0);
    }

    #[test]
    fn timing_violation_is_rejected() {
        let text = format!("{MINIMAL}\n[timings]\ntau_od = \"20ns\"\n");
        let (_, key, message) = parse_err(&text);
        assert_eq!(key, "timings");
        assert!(message.contains("tau_od < tau_ts"));
    }

    #[test]
    fn stage3_presets_and_overrides() {
        let text = r#"
[experiment]
stage = 3
engine = "BHSI"
trials = 10
seed = 7

[initial]
theta = "pi/4"
phi = 0.3

[bhsi]
p_recohere = 1.0
retrocausal_mode = "erasure"

[physics]
preset = "electron-ion"
tau = "50ms"
phase_mode = "exact-denominator"
"#;
        let c = parse_config(text).unwrap();
        let em = c.physics.unwrap();
        assert_eq!(em.params.q2, PhysicsParams::electron_ion().q2);
        assert_eq!(em.params.tau, 0.05);
        assert_eq!(em.mode, PhaseMode::ExactDenominator);
        assert_eq!(c.bhsi.unwrap().retrocausal_mode, RetrocausalMode::Erasure);
        assert_eq!(c.bhsi.unwrap().p_recohere, 1.0);
    }

    #[test]
    fn stage1_control_is_rejected() {
        let text = MINIMAL.replace("seed = 42", "seed = 42\nts_inserted = false");
        let (_, key, _) = parse_err(&text);
        assert_eq!(key, "experiment.ts_inserted");
    }

    #[test]
    fn round_trip() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.seed = u64::MAX;
        c.output.path = Some("out dir/report \"x\".json".into());
        let again = parse_config(&c.to_config_string()).unwrap();
        assert_eq!(again, c);

        let mut c3 = ExperimentConfig::new(
            Stage::Three,
            EngineKind::BranchedSubspace,
            prepare_qubit(0.3, 1.1).unwrap(),
            5,
            9,
        );
        c3.physics.as_mut().unwrap().tolerance = Some(0.01);
        c3.ts_inserted = false;
        c3.validate().unwrap();
        assert_eq!(parse_config(&c3.to_config_string()).unwrap(), c3);
    }

    #[test]
    fn digest_ignores_formatting_and_output() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(&format!(
            "# comment\n{MINIMAL}\n[output]\nformat = \"csv\"\n"
        ))
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let mut c = a.clone();
        c.seed = 43;
        assert_ne!(a.digest(), c.digest());
    }
}
