//! One pipeline per scenario. Each writes plot-ready data into the result
//! directory and returns the seed lineage it used.

use anyhow::{anyhow, Context};
use serde::Serialize;

use bjj_core::classical::{
    conserved_r_series, decorrelator, evolve_classical, lyapunov_exponent, mean_current, DecorrelatorConfig, EvolveOptions, GridSpec,
    LyapunovConfig, Region,
};
use bjj_core::fit::fit_growth_rate;
use bjj_core::hilbert::{coherent_state_zphi, product_state};
use bjj_core::io::MatrixContainer;
use bjj_core::model::{fixed_points, wrap_phase};
use bjj_core::observables::{fourier_spectrum, husimi_q, phase_statistics, purity, von_neumann_entropy};
use bjj_core::seeding::{derive_seed, stream};
use bjj_core::spectra::{prepare_spectrum, sector_dimensions, sector_spectrum, spectral_statistics, GinibreSpacing};
use bjj_core::trajectories::{ensemble_evolve, TrajectoryConfig};
use bjj_core::twa::{evolve_twa, fluctuation_measure, sample_initial};
use bjj_core::ClassicalState;

use crate::artifacts::Artifacts;
use crate::config::{ExperimentConfig, InitialState, Scenario};
use crate::sweep::{run_sweep, seed_streams, write_tables, SweepSettings};

/// Output time grid `0, step, ..., t_max`.
pub fn output_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn required<T: Copy>(v: Option<T>, name: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| anyhow!("run.{name} is required"))
}

/// Mean-field point for the initial state; regions contribute one random draw.
fn initial_point(cfg: &ExperimentConfig) -> anyhow::Result<ClassicalState> {
    match cfg.initial.as_ref().ok_or_else(|| anyhow!("initial state is required"))? {
        InitialState::Coherent { z1, phi1, z2, phi2 } => Ok(ClassicalState::new(*z1, *phi1, *z2, *phi2)),
        InitialState::FixedPoint { name } => {
            let set = fixed_points(&cfg.model)?;
            let fp = set.first(*name).ok_or_else(|| anyhow!("{name} does not exist at these parameters"))?;
            Ok(fp.location)
        }
        InitialState::Region { region } => Ok(region.sample(&mut stream(cfg.run.seed, "initial", 0))),
    }
}

const INITIAL_STREAM: &str = "initial point (region draws): stream(master, \"initial\", 0)";

fn spectrum_rows(series: &[f64], times: &[f64]) -> anyhow::Result<Vec<[f64; 2]>> {
    let s = fourier_spectrum(series, times)?;
    Ok(s.omega.iter().zip(&s.magnitude).map(|(w, m)| [*w, *m]).collect())
}

pub fn run_scenario(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    match cfg.scenario {
        Scenario::Classical => classical(cfg, out),
        Scenario::Twa => twa(cfg, out),
        Scenario::QuantumTrajectory => quantum(cfg, out),
        Scenario::Liouvillian => liouvillian(cfg, out),
        Scenario::PhaseDiagram => phase_diagram(cfg, out),
    }
}

#[derive(Serialize)]
struct ClassicalSummary {
    initial: ClassicalState,
    mean_current: [f64; 2],
    fixed_points: bjj_core::FixedPointSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    decorrelator_growth_rate: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov: Option<bjj_core::classical::LyapunovResult>,
}

fn classical(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    let p = &cfg.model;
    let times = output_grid(required(cfg.run.t_max, "t_max")?, required(cfg.run.output_step, "output_step")?);
    let x0 = initial_point(cfg)?;
    let tr = evolve_classical(&x0, p, &times, &EvolveOptions::default())?;
    let states = tr.states();
    let (zp, zm) = (tr.z_plus(), tr.z_minus());
    let rows: Vec<[f64; 9]> = (0..times.len())
        .map(|k| {
            let s = &states[k];
            let c = bjj_core::classical::atomic_current(&tr.bloch[k], p);
            [times[k], s.z1, s.phi1, s.z2, s.phi2, zp[k], zm[k], c[0], c[1]]
        })
        .collect();
    out.csv("trajectory.csv", &["t", "z1", "phi1", "z2", "phi2", "z_plus", "z_minus", "current1", "current2"], &rows)?;
    out.csv("phase_portrait.csv", &["t", "z1", "phi1"], rows.iter().map(|r| [r[0], r[1], r[2]]))?;
    out.csv("spectrum.csv", &["omega", "magnitude"], spectrum_rows(&zp, &times)?)?;
    if x0.z1 == x0.z2 && x0.phi1 == x0.phi2 {
        if let Ok(r) = conserved_r_series(&tr, p) {
            out.csv("conserved_r.csv", &["t", "R"], times.iter().zip(&r).map(|(t, r)| [*t, *r]))?;
        }
    }
    let mut streams = vec![INITIAL_STREAM.to_string()];
    let mut summary = ClassicalSummary {
        initial: x0,
        mean_current: mean_current(&tr, p)?,
        fixed_points: fixed_points(p)?,
        decorrelator_growth_rate: None,
        lyapunov: None,
    };
    if let Some(members) = cfg.run.members {
        let region = match &cfg.initial {
            Some(InitialState::Region { region }) => region.clone(),
            _ => Region::Point { state: x0 },
        };
        let dcfg = DecorrelatorConfig { n_members: members, ..DecorrelatorConfig::default() };
        let d = decorrelator(&region, p, &times, &dcfg, derive_seed(cfg.run.seed, "decorrelator", 0))?;
        let mean = d.mean();
        let rows: Vec<[f64; 4]> = (0..times.len()).map(|k| [times[k], d.d1[k], d.d2[k], mean[k]]).collect();
        out.csv("decorrelator.csv", &["t", "d1", "d2", "mean"], &rows)?;
        summary.decorrelator_growth_rate = Some(fit_growth_rate(&times, &mean)?.rate());
        streams.push("decorrelator members: stream(derive_seed(master, \"decorrelator\", 0), \"decorrelator\", k)".into());
        if let Some(total_time) = cfg.run.lyapunov_time {
            let mut lcfg = LyapunovConfig { n_members: members, total_time, ..LyapunovConfig::default() };
            if let Some(t) = cfg.run.lyapunov_transient {
                lcfg.transient = t;
            }
            summary.lyapunov = Some(lyapunov_exponent(&region, p, &lcfg, derive_seed(cfg.run.seed, "lyapunov", 0))?);
            streams.push("Lyapunov members: stream(derive_seed(master, \"lyapunov\", 0), \"lyapunov\", k)".into());
        }
    }
    out.json("summary.json", &summary)?;
    Ok(streams)
}

fn twa(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    let p = &cfg.model;
    let times = output_grid(required(cfg.run.t_max, "t_max")?, required(cfg.run.output_step, "output_step")?);
    let dt = required(cfg.run.dt, "dt")?;
    let center = initial_point(cfg)?;
    let ens = sample_initial(&center, p.spin, required(cfg.run.n_samples, "n_samples")?, derive_seed(cfg.run.seed, "twa-ensemble", 0))?;
    let run = evolve_twa(&ens, p, dt, &times, derive_seed(cfg.run.seed, "twa-run", 0))?;
    let (ph1, ph2) = (run.mean_phase(0), run.mean_phase(1));
    let rows: Vec<[f64; 11]> = (0..times.len())
        .map(|k| {
            let m = run.mean[k];
            [
                times[k],
                m[0][0],
                m[0][1],
                m[0][2],
                m[1][0],
                m[1][1],
                m[1][2],
                0.5 * (m[0][2] + m[1][2]),
                run.minus_mean[k][2],
                ph1[k],
                ph2[k],
            ]
        })
        .collect();
    out.csv("twa_mean.csv", &["t", "s1x", "s1y", "s1z", "s2x", "s2y", "s2z", "z_plus", "s_minus_z", "phi1", "phi2"], &rows)?;
    let f = fluctuation_measure(&run);
    let rows: Vec<[f64; 5]> =
        (0..times.len()).map(|k| [times[k], f.f[k], f.components[k][0], f.components[k][1], f.components[k][2]]).collect();
    out.csv("fluctuation.csv", &["t", "F", "var_minus_x", "var_minus_y", "var_minus_z"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        center: ClassicalState,
        n_samples: usize,
        fluctuation_growth_rate: Option<f64>,
    }
    out.json("summary.json", &Summary { center, n_samples: run.n_samples, fluctuation_growth_rate: f.growth_rate()?.rate() })?;
    Ok(vec![
        INITIAL_STREAM.into(),
        "Gaussian samples: stream(derive_seed(master, \"twa-ensemble\", 0), \"twa-sample\", k)".into(),
        "sample noise: stream(derive_seed(master, \"twa-run\", 0), \"twa-noise\", k)".into(),
    ])
}

fn snapshot_index(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (k, s) in times.iter().enumerate() {
        if (s - t).abs() < (times[best] - t).abs() {
            best = k;
        }
    }
    best
}

fn quantum(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    let p = &cfg.model;
    let t_max = required(cfg.run.t_max, "t_max")?;
    let times = output_grid(t_max, required(cfg.run.output_step, "output_step")?);
    let x0 = initial_point(cfg)?;
    let psi0 = product_state(&coherent_state_zphi(x0.z1, x0.phi1, p.spin)?, &coherent_state_zphi(x0.z2, x0.phi2, p.spin)?);
    let tcfg = TrajectoryConfig::new(required(cfg.run.dt, "dt")?, required(cfg.run.n_traj, "n_traj")?, cfg.run.seed);
    let r = ensemble_evolve(&psi0, p, &tcfg, &times)?;

    let pops: Vec<_> = r.moments.iter().map(|m| m.populations(p)).collect();
    let zp: Vec<f64> = pops.iter().map(|o| o.z_plus).collect();
    out.csv("z_plus.csv", &["t", "z_plus", "z1", "z2"], (0..times.len()).map(|k| [times[k], zp[k], pops[k].z1, pops[k].z2]))?;
    out.csv(
        "z_minus.csv",
        &["t", "z_minus", "delta_z_minus"],
        (0..times.len()).map(|k| [times[k], pops[k].z_minus, pops[k].delta_z_minus]),
    )?;
    out.csv("spectrum.csv", &["omega", "magnitude"], spectrum_rows(&zp, &times)?)?;

    let s_max = (p.spin.dim() as f64).ln();
    let mut portrait = Vec::new();
    let mut entropy = Vec::new();
    let mut pur = Vec::new();
    let mut fluct = Vec::new();
    for k in 0..times.len() {
        let (a, b) = (&r.rho1[k], &r.rho2[k]);
        let (pa, pb) = (phase_statistics(a, p.spin)?, phase_statistics(b, p.spin)?);
        portrait.push([times[k], pops[k].z1, pa.mean, pops[k].z2, pb.mean]);
        entropy.push([times[k], von_neumann_entropy(a)?, von_neumann_entropy(b)?, s_max]);
        pur.push([times[k], purity(a)?, purity(b)?]);
        fluct.push([times[k], pa.variance, pb.variance]);
    }
    out.csv("phase_portrait.csv", &["t", "z1", "phi1", "z2", "phi2"], &portrait)?;
    out.csv("entropy.csv", &["t", "entropy1", "entropy2", "entropy_max"], &entropy)?;
    out.csv("purity.csv", &["t", "purity1", "purity2"], &pur)?;
    out.csv("phase_fluct.csv", &["t", "phase_var1", "phase_var2"], &fluct)?;

    let snaps = if cfg.run.snapshots.is_empty() { vec![0.0, t_max] } else { cfg.run.snapshots.clone() };
    for t in snaps {
        let k = snapshot_index(&times, t);
        let tag = format!("{:.3}", times[k]);
        out.json(&format!("rho_snapshots/rho1_t{tag}.json"), &MatrixContainer::from_matrix(&r.rho1[k], p.spin, Some(times[k])))?;
        out.json(&format!("rho_snapshots/rho2_t{tag}.json"), &MatrixContainer::from_matrix(&r.rho2[k], p.spin, Some(times[k])))?;
        if let Some(n) = cfg.run.husimi_grid {
            let grid = GridSpec::new(n, n)?;
            let q = husimi_q(&r.rho1[k], p.spin, grid)?;
            let mut rows = Vec::new();
            for iz in 0..n {
                for ip in 0..n {
                    rows.push([grid.z_center(iz), grid.phi_center(ip), q.get(iz, ip)]);
                }
            }
            out.csv(&format!("rho_snapshots/husimi1_t{tag}.csv"), &["z", "phi", "q"], &rows)?;
        }
    }
    #[derive(Serialize)]
    struct Summary {
        initial: ClassicalState,
        n_traj: usize,
        total_jumps: [u64; 2],
        final_phase1: f64,
    }
    let last = portrait.last().map(|r| wrap_phase(r[2])).unwrap_or(f64::NAN);
    out.json("summary.json", &Summary { initial: x0, n_traj: r.n_traj, total_jumps: r.total_jumps(), final_phase1: last })?;
    Ok(vec![INITIAL_STREAM.into(), "trajectory k: stream(master, \"trajectory\", k)".into()])
}

fn liouvillian(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    let p = &cfg.model;
    let sectors = if cfg.run.sectors.is_empty() { vec![1, -1] } else { cfg.run.sectors.clone() };
    let reference = GinibreSpacing::new();
    #[derive(Serialize)]
    struct SectorReport {
        parity: i8,
        dimension: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        statistics: Option<bjj_core::spectra::SpectralStatistics>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    let mut reports = Vec::new();
    let (plus, minus) = sector_dimensions(p.spin);
    for parity in sectors {
        let spec = sector_spectrum(p, parity).with_context(|| format!("sector {parity:+}"))?;
        let name = if parity > 0 { "eigenvalues_plus.csv" } else { "eigenvalues_minus.csv" };
        out.csv(name, &["re", "im"], spec.eigenvalues.iter().map(|z| [z.re, z.im]))?;
        let stats = spectral_statistics(&prepare_spectrum(&spec.eigenvalues), &reference);
        reports.push(SectorReport {
            parity,
            dimension: if parity > 0 { plus } else { minus },
            error: stats.as_ref().err().map(|e| e.to_string()),
            statistics: stats.ok(),
        });
    }
    out.json("statistics.json", &reports)?;
    Ok(Vec::new())
}

fn phase_diagram(cfg: &ExperimentConfig, out: &mut Artifacts) -> anyhow::Result<Vec<String>> {
    let axes = cfg.sweep.as_ref().ok_or_else(|| anyhow!("sweep axes are required"))?;
    let outcomes = run_sweep(&cfg.model, axes, &SweepSettings::from_config(cfg), cfg.run.seed);
    write_tables(out, &outcomes, "phase_diagram.csv")?;
    Ok(seed_streams())
}
