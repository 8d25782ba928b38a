//! Named configurations for the standard figures.

use serde_json::{json, Value};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Files the run must produce (directories end in `/`).
    pub files: &'static [&'static str],
    build: fn() -> Value,
}

impl Preset {
    pub fn config(&self) -> Value {
        (self.build)()
    }
}

fn fig2() -> Value {
    json!({
        "version": 1,
        "scenario": "quantum-trajectory",
        "model": {"J": 1.0, "V": 0.5, "gamma": 0.2, "omega_z": 0.0, "S": 50},
        "initial": {"kind": "coherent", "z": 0.3, "phi": 0.0},
        "run": {"seed": 2, "t_max": 50.0, "dt": 0.004, "output_step": 0.1, "n_traj": 200, "snapshots": [0.0, 50.0]},
        "output": "out/fig2"
    })
}

fn fig4_left() -> Value {
    json!({
        "version": 1,
        "scenario": "quantum-trajectory",
        "model": {"J": 1.0, "V": 1.7, "gamma": 0.2, "omega_z": 0.0, "S": 10},
        "initial": {"kind": "coherent", "z": 0.5, "phi": 0.0},
        "run": {
            "seed": 4, "t_max": 200.0, "dt": 0.01, "output_step": 1.0, "n_traj": 500,
            "snapshots": [0.0, 20.0, 100.0, 200.0], "husimi_grid": 12
        },
        "output": "out/fig4_left"
    })
}

fn fig_s3() -> Value {
    json!({
        "version": 1,
        "scenario": "phase-diagram",
        "model": {"J": 1.0, "V": 1.0, "gamma": 0.2, "omega_z": 0.0},
        "run": {"seed": 3, "members": 8, "lyapunov_transient": 200.0, "lyapunov_time": 1200.0},
        "sweep": {
            "omega_z": {"start": 0.0, "stop": 2.0, "num": 9},
            "V": {"start": 0.5, "stop": 2.5, "num": 9},
            "gamma": [0.2]
        },
        "output": "out/figS3"
    })
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "fig2",
        summary: "synchronized oscillations, S=50 quantum trajectories at V=0.5, gamma=0.2",
        files: &["z_plus.csv", "z_minus.csv", "spectrum.csv", "phase_portrait.csv"],
        build: fig2,
    },
    Preset {
        name: "fig4_left",
        summary: "transient chaos and coherence recovery, S=10 at V=1.7, gamma=0.2",
        files: &["entropy.csv", "purity.csv", "phase_fluct.csv", "rho_snapshots/"],
        build: fig4_left,
    },
    Preset {
        name: "figS3",
        summary: "mean Lyapunov exponent over the (omega_z, V) plane at gamma=0.2",
        files: &["lyapunov_grid.csv"],
        build: fig_s3,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
