//! Parameter sweeps: per-point measurements and the dynamical-regime label.

use serde::{Deserialize, Serialize};

use bjj_core::classical::{decorrelator, lyapunov_exponent, DecorrelatorConfig, LyapunovConfig, Region};
use bjj_core::fit::fit_growth_rate;
use bjj_core::model::{critical_coupling, fixed_points};
use bjj_core::parallel::chunked_reduce;
use bjj_core::seeding::derive_seed;
use bjj_core::ModelParams;

use crate::artifacts::{Artifacts, Cell};
use crate::config::{ExperimentConfig, SweepAxes};

/// Long-time exponent above which the point counts as persistently chaotic.
/// Regular orbits give a finite-time bias of a few 1e-3.
pub const LYAPUNOV_THRESHOLD: f64 = 0.02;
/// Early decorrelator growth rate above which the transient counts as chaotic.
pub const EARLY_RATE_THRESHOLD: f64 = 0.05;

pub const DEFAULT_MEMBERS: usize = 8;
pub const DEFAULT_LYAPUNOV_TRANSIENT: f64 = 200.0;
pub const DEFAULT_LYAPUNOV_TIME: f64 = 1200.0;
/// Window of the early-growth fit.
pub const EARLY_WINDOW: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Oscillatory,
    SelfTrappedAttractor,
    TransientChaos,
    SteadyStateChaos,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Oscillatory => "oscillatory",
            Phase::SelfTrappedAttractor => "self-trapped-attractor",
            Phase::TransientChaos => "transient-chaos",
            Phase::SteadyStateChaos => "steady-state-chaos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub omega_z: f64,
    pub v: f64,
    pub gamma: f64,
    /// Critical coupling of the untilted model, NaN when undefined.
    pub critical_coupling: f64,
    /// Whether a linearly attracting fixed point exists.
    pub attractor: bool,
    /// Early decorrelator growth rate, zero when no exponential window exists.
    pub early_rate: f64,
    /// Ensemble-mean long-time Lyapunov exponent.
    pub lyapunov: f64,
    pub lyapunov_std: f64,
}

/// The regime label is a pure function of the stored measurements.
pub fn classify(m: &Measurement) -> Phase {
    if m.lyapunov > LYAPUNOV_THRESHOLD {
        Phase::SteadyStateChaos
    } else if m.early_rate > EARLY_RATE_THRESHOLD {
        Phase::TransientChaos
    } else if m.attractor {
        Phase::SelfTrappedAttractor
    } else {
        Phase::Oscillatory
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepSettings {
    pub members: usize,
    pub transient: f64,
    pub total_time: f64,
}

impl SweepSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            members: cfg.run.members.unwrap_or(DEFAULT_MEMBERS),
            transient: cfg.run.lyapunov_transient.unwrap_or(DEFAULT_LYAPUNOV_TRANSIENT),
            total_time: cfg.run.lyapunov_time.unwrap_or(DEFAULT_LYAPUNOV_TIME),
        }
    }
}

pub fn measure(p: &ModelParams, s: &SweepSettings, seed: u64, index: u64) -> bjj_core::Result<Measurement> {
    p.validate()?;
    let critical = if p.omega_z == 0.0 { critical_coupling(p).unwrap_or(f64::NAN) } else { f64::NAN };
    let attractor = fixed_points(p)?.has_attractor();
    let times: Vec<f64> = (0..=(2.0 * EARLY_WINDOW) as usize).map(|k| 0.5 * k as f64).collect();
    let dcfg = DecorrelatorConfig { n_members: s.members, ..DecorrelatorConfig::default() };
    let d = decorrelator(&Region::Sphere, p, &times, &dcfg, derive_seed(seed, "sweep-decorrelator", index))?.mean();
    let early_rate = fit_growth_rate(&times, &d)?.rate().unwrap_or(0.0);
    let lcfg = LyapunovConfig { n_members: s.members, transient: s.transient, total_time: s.total_time, ..LyapunovConfig::default() };
    let ly = lyapunov_exponent(&Region::Sphere, p, &lcfg, derive_seed(seed, "sweep-lyapunov", index))?;
    Ok(Measurement {
        omega_z: p.omega_z,
        v: p.v,
        gamma: p.gamma,
        critical_coupling: critical,
        attractor,
        early_rate,
        lyapunov: ly.lambda,
        lyapunov_std: ly.std,
    })
}

pub type PointOutcome = (f64, f64, f64, Result<Measurement, String>);

/// Measure every grid point; failures are kept per point.
pub fn run_sweep(base: &ModelParams, axes: &SweepAxes, s: &SweepSettings, seed: u64) -> Vec<PointOutcome> {
    let points = axes.points();
    chunked_reduce(
        points.len(),
        1,
        |range| {
            let i = range.start;
            let (w, v, g) = points[i];
            let p = ModelParams { v, gamma: g, omega_z: w, ..*base };
            Ok(vec![(w, v, g, measure(&p, s, seed, i as u64).map_err(|e| e.to_string()))])
        },
        |a, b| a.extend(b),
    )
    .expect("point failures are captured per point")
    .unwrap_or_default()
}

pub const TABLE_HEADER: [&str; 10] =
    ["omega_z", "V", "gamma", "critical_coupling", "attractor", "early_rate", "lyapunov", "lyapunov_std", "phase", "status"];

pub fn write_tables(out: &mut Artifacts, outcomes: &[PointOutcome], table_name: &str) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for (w, v, g, r) in outcomes {
        let row = match r {
            Ok(m) => vec![
                Cell::Num(*w),
                Cell::Num(*v),
                Cell::Num(*g),
                Cell::Num(m.critical_coupling),
                Cell::Num(if m.attractor { 1.0 } else { 0.0 }),
                Cell::Num(m.early_rate),
                Cell::Num(m.lyapunov),
                Cell::Num(m.lyapunov_std),
                Cell::Text(classify(m).label().into()),
                Cell::Text("ok".into()),
            ],
            Err(e) => {
                let mut row = vec![Cell::Num(*w), Cell::Num(*v), Cell::Num(*g)];
                row.extend([f64::NAN; 5].map(Cell::Num));
                row.push(Cell::Text("failed".into()));
                row.push(Cell::Text(format!("error: {e}")));
                row
            }
        };
        rows.push(row);
        let (l, ls) = r.as_ref().map(|m| (m.lyapunov, m.lyapunov_std)).unwrap_or((f64::NAN, f64::NAN));
        grid.push([*w, *v, *g, l, ls]);
    }
    out.table(table_name, &TABLE_HEADER, &rows)?;
    out.csv("lyapunov_grid.csv", &["omega_z", "V", "gamma", "lambda", "lambda_std"], &grid)?;
    Ok(())
}

pub fn seed_streams() -> Vec<String> {
    vec![
        "decorrelator at point i: stream(derive_seed(master, \"sweep-decorrelator\", i), \"decorrelator\", member)".into(),
        "Lyapunov at point i: stream(derive_seed(master, \"sweep-lyapunov\", i), \"lyapunov\", member)".into(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(lyapunov: f64, early_rate: f64, attractor: bool) -> Measurement {
        Measurement { omega_z: 0.0, v: 1.0, gamma: 0.2, critical_coupling: f64::NAN, attractor, early_rate, lyapunov, lyapunov_std: 0.0 }
    }

    #[test]
    fn rule_order() {
        assert_eq!(classify(&m(0.2, 0.5, true)), Phase::SteadyStateChaos);
        assert_eq!(classify(&m(-0.16, 0.5, true)), Phase::TransientChaos);
        assert_eq!(classify(&m(-0.3, 0.0, true)), Phase::SelfTrappedAttractor);
        assert_eq!(classify(&m(0.005, 0.0, false)), Phase::Oscillatory);
    }

    #[test]
    fn failing_points_are_recorded_not_fatal() {
        let axes = SweepAxes { v: vec![0.5, 1.0], gamma: vec![0.2], omega_z: vec![0.0] };
        let bad = ModelParams { j: -1.0, ..ModelParams::classical(0.5, 0.2) };
        let s = SweepSettings { members: 2, transient: 10.0, total_time: 30.0 };
        let outcomes = run_sweep(&bad, &axes, &s, 1);
        assert_eq!(outcomes.len(), 2);
        assert!(outcomes.iter().all(|o| o.3.as_ref().is_err_and(|e| e.contains("J must be positive"))));
        let dir = tempfile::tempdir().unwrap();
        let mut out = Artifacts::create(dir.path()).unwrap();
        write_tables(&mut out, &outcomes, "sweep.csv").unwrap();
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        let row = text.lines().nth(1).unwrap();
        assert!(row.contains(",failed,") && row.contains("J must be positive"), "{row}");
    }

    #[test]
    fn documented_points() {
        let s = SweepSettings { members: 8, transient: DEFAULT_LYAPUNOV_TRANSIENT, total_time: DEFAULT_LYAPUNOV_TIME };
        let cases = [(0.5, 0.0, Phase::Oscillatory), (1.7, 0.0, Phase::TransientChaos), (1.7, 0.5, Phase::SteadyStateChaos)];
        for (i, (v, w, want)) in cases.into_iter().enumerate() {
            let p = ModelParams::classical(v, 0.2).with_tilt(w);
            let got = measure(&p, &s, 17, i as u64).unwrap();
            assert_eq!(classify(&got), want, "{got:?}");
        }
    }
}
