//! Experiment configuration: a versioned JSON document.
//!
//! Parsing walks the raw JSON value and collects every problem before giving
//! up, so a bad file is fixed in one round instead of one field at a time.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use bjj_core::classical::Region;
use bjj_core::{Family, ModelParams, Spin};

pub const CONFIG_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Classical,
    Twa,
    QuantumTrajectory,
    Liouvillian,
    PhaseDiagram,
}

impl Scenario {
    pub const ALL: [(&'static str, Scenario); 5] = [
        ("classical", Scenario::Classical),
        ("twa", Scenario::Twa),
        ("quantum-trajectory", Scenario::QuantumTrajectory),
        ("liouvillian", Scenario::Liouvillian),
        ("phase-diagram", Scenario::PhaseDiagram),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, s)| *s == self).map(|(n, _)| *n).expect("listed")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// Spin-coherent (or mean-field) point per species.
    Coherent { z1: f64, phi1: f64, z2: f64, phi2: f64 },
    /// A labelled fixed point of the mean-field equations.
    FixedPoint { name: Family },
    /// Ensemble region (classical) or a point drawn from it (other scenarios).
    Region { region: Region },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunParams {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// Decorrelator / Lyapunov ensemble size (classical and phase-diagram).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub husimi_grid: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sectors: Vec<i8>,
    /// Long-time Lyapunov integration: transient discarded, then total time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_transient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepAxes {
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega_z: Vec<f64>,
}

impl SweepAxes {
    /// Points in `(omega_z, V, gamma)` order, `gamma` fastest.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &w in &self.omega_z {
            for &v in &self.v {
                for &g in &self.gamma {
                    out.push((w, v, g));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub version: u64,
    pub scenario: Scenario,
    pub model: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    pub run: RunParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Every schema problem found in a document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn single(msg: impl Into<String>) -> Self {
        Self { problems: vec![msg.into()] }
    }
}

#[derive(Default)]
struct Checker {
    problems: Vec<String>,
}

impl Checker {
    fn fail(&mut self, path: &str, msg: impl fmt::Display) {
        self.problems.push(format!("{path}: {msg}"));
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(m) = v.as_object() else {
            self.fail(path, "expected an object");
            return None;
        };
        for key in m.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(&join(path, key), format!("unknown field (allowed: {})", allowed.join(", ")));
            }
        }
        Some(m)
    }

    fn number(&mut self, m: &Map<String, Value>, path: &str, key: &str, required: bool) -> Option<f64> {
        match m.get(key) {
            None if required => {
                self.fail(&join(path, key), "missing required number");
                None
            }
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.fail(&join(path, key), format!("expected a finite number, got {v}"));
                    None
                }
            },
        }
    }

    fn checked(&mut self, m: &Map<String, Value>, path: &str, key: &str, required: bool, ok: fn(f64) -> bool, what: &str) -> Option<f64> {
        let x = self.number(m, path, key, required)?;
        if ok(x) {
            Some(x)
        } else {
            self.fail(&join(path, key), format!("must be {what}, got {x}"));
            None
        }
    }

    fn count(&mut self, m: &Map<String, Value>, path: &str, key: &str, min: u64) -> Option<usize> {
        let v = m.get(key)?;
        match v.as_u64() {
            Some(n) if n >= min => Some(n as usize),
            _ => {
                self.fail(&join(path, key), format!("expected an integer >= {min}, got {v}"));
                None
            }
        }
    }

    fn numbers(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Vec<f64> {
        let Some(v) = m.get(key) else { return Vec::new() };
        let p = join(path, key);
        match v.as_array() {
            Some(a) => {
                let xs: Vec<f64> = a.iter().filter_map(|x| x.as_f64().filter(|x| x.is_finite())).collect();
                if xs.len() != a.len() {
                    self.fail(&p, "every entry must be a finite number");
                }
                xs
            }
            None => {
                self.fail(&p, "expected an array of numbers");
                Vec::new()
            }
        }
    }

    /// A sweep axis: a list, a `{start, stop, num}` range or a single number.
    fn axis(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: f64) -> Vec<f64> {
        let p = join(path, key);
        match m.get(key) {
            None => vec![default],
            Some(Value::Number(n)) => n.as_f64().map(|x| vec![x]).unwrap_or_default(),
            Some(Value::Array(_)) => {
                let xs = self.numbers(m, path, key);
                if xs.is_empty() {
                    self.fail(&p, "axis must not be empty");
                }
                xs
            }
            Some(v @ Value::Object(_)) => {
                let Some(r) = self.object(v, &p, &["start", "stop", "num"]) else { return Vec::new() };
                let a = self.number(r, &p, "start", true);
                let b = self.number(r, &p, "stop", true);
                let n = match r.get("num") {
                    None => {
                        self.fail(&join(&p, "num"), "missing required integer");
                        None
                    }
                    Some(_) => self.count(r, &p, "num", 1),
                };
                match (a, b, n) {
                    (Some(a), Some(b), Some(1)) if a == b => vec![a],
                    (Some(_), Some(_), Some(1)) => {
                        self.fail(&join(&p, "num"), "a single point needs start == stop");
                        Vec::new()
                    }
                    (Some(a), Some(b), Some(n)) => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
                    _ => Vec::new(),
                }
            }
            Some(v) => {
                self.fail(&p, format!("expected a number, list or range object, got {v}"));
                Vec::new()
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn non_negative(x: f64) -> bool {
    x >= 0.0
}

fn unit_interval(x: f64) -> bool {
    (-1.0..=1.0).contains(&x)
}

fn parse_model(c: &mut Checker, v: &Value) -> Option<ModelParams> {
    let m = c.object(v, "model", &["J", "V", "gamma", "omega_z", "S"])?;
    let j = if m.contains_key("J") { c.checked(m, "model", "J", true, positive, "positive") } else { Some(1.0) };
    let v_ = c.number(m, "model", "V", true);
    let gamma = c.checked(m, "model", "gamma", true, non_negative, "non-negative");
    let omega_z = c.number(m, "model", "omega_z", false);
    let spin = match c.checked(m, "model", "S", false, positive, "a positive half-integer") {
        Some(s) => match Spin::new(s) {
            Ok(s) => Some(s),
            Err(e) => {
                c.fail("model.S", e);
                None
            }
        },
        None if m.contains_key("S") => None,
        None => Some(ModelParams::default().spin),
    };
    Some(ModelParams { j: j?, v: v_?, gamma: gamma?, omega_z: omega_z.unwrap_or(0.0), spin: spin? })
}

fn parse_initial(c: &mut Checker, v: &Value) -> Option<InitialState> {
    let m = v.as_object();
    let kind = m.and_then(|m| m.get("kind")).and_then(Value::as_str);
    match kind {
        Some("coherent") => {
            let m = c.object(v, "initial", &["kind", "z", "phi", "z1", "phi1", "z2", "phi2"])?;
            if m.contains_key("z") || m.contains_key("phi") {
                for k in ["z1", "phi1", "z2", "phi2"] {
                    if m.contains_key(k) {
                        c.fail(&join("initial", k), "use either z/phi (both species) or z1/phi1/z2/phi2");
                    }
                }
                let z = c.checked(m, "initial", "z", true, unit_interval, "in [-1, 1]");
                let phi = c.number(m, "initial", "phi", true);
                Some(InitialState::Coherent { z1: z?, phi1: phi?, z2: z?, phi2: phi? })
            } else {
                let z1 = c.checked(m, "initial", "z1", true, unit_interval, "in [-1, 1]");
                let phi1 = c.number(m, "initial", "phi1", true);
                let z2 = c.checked(m, "initial", "z2", true, unit_interval, "in [-1, 1]");
                let phi2 = c.number(m, "initial", "phi2", true);
                Some(InitialState::Coherent { z1: z1?, phi1: phi1?, z2: z2?, phi2: phi2? })
            }
        }
        Some("fixed-point") => {
            let m = c.object(v, "initial", &["kind", "name"])?;
            let name = m.get("name").cloned().unwrap_or(Value::Null);
            match serde_json::from_value::<Family>(name.clone()) {
                Ok(Family::Numeric) | Err(_) => {
                    c.fail("initial.name", format!("expected one of FP-I, FP-II, FP-III, FP-IV, got {name}"));
                    None
                }
                Ok(f) => Some(InitialState::FixedPoint { name: f }),
            }
        }
        Some("region") => {
            let m = c.object(v, "initial", &["kind", "region"])?;
            let r = m.get("region").cloned().unwrap_or(Value::Null);
            match serde_json::from_value::<Region>(r).map_err(|e| e.to_string()).and_then(|r| {
                r.validate().map_err(|e| e.to_string())?;
                Ok(r)
            }) {
                Ok(region) => Some(InitialState::Region { region }),
                Err(e) => {
                    c.fail("initial.region", e);
                    None
                }
            }
        }
        _ => {
            c.fail("initial.kind", "expected \"coherent\", \"fixed-point\" or \"region\"");
            None
        }
    }
}

const RUN_KEYS: [&str; 13] = [
    "seed",
    "t_max",
    "dt",
    "output_step",
    "n_traj",
    "n_samples",
    "members",
    "snapshots",
    "husimi_grid",
    "sectors",
    "lyapunov_transient",
    "lyapunov_time",
    "threads",
];

fn parse_run(c: &mut Checker, v: &Value, seed_override: Option<u64>) -> Option<RunParams> {
    let m = c.object(v, "run", &RUN_KEYS)?;
    if m.contains_key("threads") {
        c.fail("run.threads", "thread count is a command-line setting (--threads), not part of the experiment");
    }
    let seed = match (seed_override, m.get("seed")) {
        (Some(s), _) => Some(s),
        (None, Some(v)) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                c.fail("run.seed", format!("expected a non-negative 64-bit integer, got {v}"));
                None
            }
        },
        (None, None) => {
            c.fail("run.seed", "missing required seed (set it in the file or pass --seed)");
            None
        }
    };
    let sectors: Vec<i8> = c
        .numbers(m, "run", "sectors")
        .into_iter()
        .filter_map(|s| match s {
            1.0 => Some(1),
            -1.0 => Some(-1),
            _ => {
                c.fail("run.sectors", format!("sector parity must be 1 or -1, got {s}"));
                None
            }
        })
        .collect();
    let snapshots = c.numbers(m, "run", "snapshots");
    if snapshots.iter().any(|t| *t < 0.0) {
        c.fail("run.snapshots", "times must be non-negative");
    }
    let run = RunParams {
        seed: 0,
        t_max: c.checked(m, "run", "t_max", false, positive, "positive"),
        dt: c.checked(m, "run", "dt", false, positive, "positive"),
        output_step: c.checked(m, "run", "output_step", false, positive, "positive"),
        n_traj: c.count(m, "run", "n_traj", 1),
        n_samples: c.count(m, "run", "n_samples", 2),
        members: c.count(m, "run", "members", 1),
        snapshots,
        husimi_grid: c.count(m, "run", "husimi_grid", 2),
        sectors,
        lyapunov_transient: c.checked(m, "run", "lyapunov_transient", false, non_negative, "non-negative"),
        lyapunov_time: c.checked(m, "run", "lyapunov_time", false, positive, "positive"),
    };
    Some(RunParams { seed: seed?, ..run })
}

fn parse_sweep(c: &mut Checker, v: &Value, model: Option<&ModelParams>) -> Option<SweepAxes> {
    let m = c.object(v, "sweep", &["V", "gamma", "omega_z"])?;
    let base = model.cloned().unwrap_or_default();
    let axes = SweepAxes {
        v: c.axis(m, "sweep", "V", base.v),
        gamma: c.axis(m, "sweep", "gamma", base.gamma),
        omega_z: c.axis(m, "sweep", "omega_z", base.omega_z),
    };
    if axes.gamma.iter().any(|g| *g < 0.0) {
        c.fail("sweep.gamma", "values must be non-negative");
    }
    Some(axes)
}

/// Scenario-specific required run fields.
fn require(c: &mut Checker, cfg: &ExperimentConfig) {
    let r = &cfg.run;
    let mut need = |present: bool, key: &str| {
        if !present {
            c.fail(&join("run", key), format!("required for scenario {}", cfg.scenario.name()));
        }
    };
    match cfg.scenario {
        Scenario::Classical => {
            need(r.t_max.is_some(), "t_max");
            need(r.output_step.is_some(), "output_step");
        }
        Scenario::Twa => {
            need(r.t_max.is_some(), "t_max");
            need(r.dt.is_some(), "dt");
            need(r.output_step.is_some(), "output_step");
            need(r.n_samples.is_some(), "n_samples");
        }
        Scenario::QuantumTrajectory => {
            need(r.t_max.is_some(), "t_max");
            need(r.dt.is_some(), "dt");
            need(r.output_step.is_some(), "output_step");
            need(r.n_traj.is_some(), "n_traj");
        }
        Scenario::Liouvillian => {}
        Scenario::PhaseDiagram => {
            need(cfg.sweep.is_some(), "(top-level) sweep");
        }
    }
    let needs_initial = matches!(cfg.scenario, Scenario::Classical | Scenario::Twa | Scenario::QuantumTrajectory);
    if needs_initial && cfg.initial.is_none() {
        c.fail("initial", format!("required for scenario {}", cfg.scenario.name()));
    }
}

/// Cross-field checks within the run section.
fn run_consistency(c: &mut Checker, r: &RunParams) {
    if let (Some(t), Some(step)) = (r.t_max, r.output_step) {
        let n = t / step;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            c.fail("run.output_step", format!("must divide t_max = {t}"));
        }
    }
    if let Some(t) = r.t_max {
        if let Some(s) = r.snapshots.iter().find(|s| **s > t) {
            c.fail("run.snapshots", format!("snapshot time {s} is after t_max = {t}"));
        }
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(v: &Value, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let mut c = Checker::default();
    let Some(top) = c.object(v, "", &["version", "scenario", "model", "initial", "run", "sweep", "output"]) else {
        return Err(ConfigError { problems: c.problems });
    };
    let version = match top.get("version").and_then(Value::as_u64) {
        Some(CONFIG_VERSION) => Some(CONFIG_VERSION),
        Some(n) => {
            c.fail("version", format!("unsupported schema version {n} (this build reads {CONFIG_VERSION})"));
            None
        }
        None => {
            c.fail("version", format!("missing or non-integer schema version (expected {CONFIG_VERSION})"));
            None
        }
    };
    let scenario = match top.get("scenario").and_then(Value::as_str) {
        Some(s) => match Scenario::ALL.iter().find(|(n, _)| *n == s) {
            Some((_, sc)) => Some(*sc),
            None => {
                let names: Vec<&str> = Scenario::ALL.iter().map(|(n, _)| *n).collect();
                c.fail("scenario", format!("unknown scenario {s:?} (expected one of {})", names.join(", ")));
                None
            }
        },
        None => {
            c.fail("scenario", "missing required string");
            None
        }
    };
    let model = match top.get("model") {
        Some(m) => parse_model(&mut c, m),
        None => {
            c.fail("model", "missing required object");
            None
        }
    };
    let initial = top.get("initial").map(|v| parse_initial(&mut c, v));
    let run = match top.get("run") {
        Some(r) => parse_run(&mut c, r, seed_override),
        None => {
            c.fail("run", "missing required object");
            None
        }
    };
    let sweep = top.get("sweep").map(|s| parse_sweep(&mut c, s, model.as_ref()));
    let output = match top.get("output") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => {
            c.fail("output", format!("expected a directory path string, got {v}"));
            None
        }
    };
    if let Some(r) = &run {
        run_consistency(&mut c, r);
    }
    if let Some(m) = &model {
        if let Err(e) = m.validate() {
            c.fail("model", e);
        }
    }
    let (Some(version), Some(scenario), Some(model), Some(run)) = (version, scenario, model, run) else {
        return Err(ConfigError { problems: c.problems });
    };
    if initial.as_ref().is_some_and(Option::is_none) || sweep.as_ref().is_some_and(Option::is_none) {
        return Err(ConfigError { problems: c.problems });
    }
    let cfg = ExperimentConfig { version, scenario, model, initial: initial.flatten(), run, sweep: sweep.flatten(), output };
    require(&mut c, &cfg);
    if c.problems.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { problems: c.problems })
    }
}

/// Marker for result manifests; a manifest can be fed back to `run`.
pub const MANIFEST_FORMAT: &str = "bjj-manifest";

/// Read a config file, or the config echoed inside a manifest.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::single(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::single(format!("{}: not valid JSON: {e}", path.display())))?;
    let is_manifest = value.get("format").and_then(Value::as_str) == Some(MANIFEST_FORMAT);
    match (is_manifest, value.get("config")) {
        (true, Some(cfg)) => parse_config(cfg, seed_override),
        (true, None) => Err(ConfigError::single("manifest has no config section")),
        _ => parse_config(&value, seed_override),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "version": 1,
            "scenario": "classical",
            "model": {"V": 0.5, "gamma": 0.2},
            "initial": {"kind": "coherent", "z": 0.3, "phi": 0.1},
            "run": {"seed": 7, "t_max": 10.0, "output_step": 0.5}
        })
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(&base(), None).unwrap();
        assert_eq!(cfg.scenario, Scenario::Classical);
        assert_eq!(cfg.model.j, 1.0);
        assert_eq!(cfg.model.omega_z, 0.0);
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.initial, Some(InitialState::Coherent { z1: 0.3, phi1: 0.1, z2: 0.3, phi2: 0.1 }));
    }

    #[test]
    fn every_offending_field_is_listed() {
        let bad = json!({
            "version": 1,
            "scenario": "classical",
            "model": {"V": "big", "gamma": -1.0, "colour": 3},
            "initial": {"kind": "coherent", "z": 2.0, "phi": 0.0},
            "run": {"t_max": 10.0, "output_step": 0.5, "n_traj": 0},
            "extra": true
        });
        let err = parse_config(&bad, None).unwrap_err();
        let text = err.to_string();
        for needle in ["model.V", "model.gamma", "model.colour", "initial.z", "run.seed", "run.n_traj", "extra"] {
            assert!(text.contains(needle), "{needle} missing from:\n{text}");
        }
        assert_eq!(err.problems.len(), 7, "{text}");
    }

    #[test]
    fn missing_seed_is_a_config_error_unless_overridden() {
        let mut v = base();
        v["run"].as_object_mut().unwrap().remove("seed");
        assert!(parse_config(&v, None).unwrap_err().problems[0].contains("run.seed"));
        assert_eq!(parse_config(&v, Some(3)).unwrap().run.seed, 3);
    }

    #[test]
    fn scenario_requirements_are_enforced() {
        let mut v = base();
        v["scenario"] = json!("quantum-trajectory");
        let err = parse_config(&v, None).unwrap_err().to_string();
        assert!(err.contains("run.dt") && err.contains("run.n_traj"), "{err}");
    }

    #[test]
    fn version_is_checked() {
        let mut v = base();
        v["version"] = json!(2);
        assert!(parse_config(&v, None).unwrap_err().to_string().contains("unsupported schema version 2"));
    }

    #[test]
    fn echo_round_trips() {
        let mut v = base();
        v["sweep"] = json!({"V": {"start": 0.5, "stop": 1.5, "num": 3}, "omega_z": [0.0, 0.5]});
        v["initial"] = json!({"kind": "region", "region": {"kind": "symmetric-class"}});
        let cfg = parse_config(&v, None).unwrap();
        assert_eq!(cfg.sweep.as_ref().unwrap().v, vec![0.5, 1.0, 1.5]);
        assert_eq!(cfg.sweep.as_ref().unwrap().gamma, vec![0.2]);
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(parse_config(&echoed, None).unwrap(), cfg);
    }

    #[test]
    fn fixed_point_names() {
        let mut v = base();
        v["initial"] = json!({"kind": "fixed-point", "name": "FP-IV"});
        assert_eq!(parse_config(&v, None).unwrap().initial, Some(InitialState::FixedPoint { name: Family::FpIV }));
        v["initial"] = json!({"kind": "fixed-point", "name": "FP-V"});
        assert!(parse_config(&v, None).unwrap_err().to_string().contains("initial.name"));
    }

    #[test]
    fn output_step_must_divide_t_max() {
        let mut v = base();
        v["run"]["output_step"] = json!(0.3);
        assert!(parse_config(&v, None).unwrap_err().to_string().contains("must divide"));
    }
}
