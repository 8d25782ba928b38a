//! Subcommand bodies, independent of argument parsing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;

use bjj_core::acceptance::{run_checks, CriterionReport};
use bjj_core::model::oscillation_frequencies;
use bjj_core::parallel::thread_pool;

use crate::artifacts::{new_manifest, Artifacts, ResultManifest, SeedLineage};
use crate::config::{load_config, parse_config, ConfigError, ExperimentConfig};
use crate::exit;
use crate::pipelines::run_scenario;
use crate::presets::{find, PRESETS};
use crate::sweep::{run_sweep, seed_streams, write_tables, SweepSettings};

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Failed(anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Config(_) => exit::CONFIG,
            CommandError::Failed(_) => exit::FAILED,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "{e}"),
            CommandError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

pub struct Source<'a> {
    pub config: Option<&'a Path>,
    pub preset: Option<&'a str>,
    pub seed: Option<u64>,
}

pub fn resolve(src: &Source) -> Result<ExperimentConfig, ConfigError> {
    match (src.config, src.preset) {
        (Some(path), None) => load_config(path, src.seed),
        (None, Some(name)) => {
            let preset = find(name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                ConfigError::single(format!("unknown preset {name:?} (available: {})", names.join(", ")))
            })?;
            parse_config(&preset.config(), src.seed)
        }
        (Some(_), Some(_)) => Err(ConfigError::single("give either --config or --preset, not both")),
        (None, None) => Err(ConfigError::single("missing --config or --preset")),
    }
}

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf, ConfigError> {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| ConfigError::single("output: no output directory (set \"output\" or pass --out)"))
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce(usize) -> T + Send) -> anyhow::Result<T> {
    let pool = thread_pool(threads)?;
    let n = pool.current_num_threads();
    Ok(pool.install(|| f(n)))
}

/// Run `body` into a fresh result directory. A manifest is written whether
/// the body succeeds or not, so no partial output is left unlisted.
fn execute(
    mut cfg: ExperimentConfig,
    out: Option<&Path>,
    threads: usize,
    body: impl FnOnce(&ExperimentConfig, &mut Artifacts) -> anyhow::Result<Vec<String>> + Send,
) -> Result<ResultManifest, CommandError> {
    let dir = out_dir(&cfg, out)?;
    cfg.output = Some(dir.clone());
    let mut artifacts = Artifacts::create(&dir).map_err(CommandError::Failed)?;
    let echo = serde_json::to_value(&cfg).map_err(|e| CommandError::Failed(e.into()))?;
    let start = Instant::now();
    let (outcome, n_threads) = with_pool(threads, |n| (body(&cfg, &mut artifacts), n)).map_err(CommandError::Failed)?;
    let (streams, error) = match outcome {
        Ok(s) => (s, None),
        Err(e) => (Vec::new(), Some(e)),
    };
    let mut manifest = new_manifest(echo, SeedLineage { master: cfg.run.seed, streams }, n_threads);
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.files = artifacts.entries().map_err(CommandError::Failed)?;
    manifest.status = if error.is_some() { "failed" } else { "complete" }.into();
    manifest.error = error.as_ref().map(|e| format!("{e:#}"));
    artifacts.write_manifest(&manifest).map_err(CommandError::Failed)?;
    match error {
        Some(e) => Err(CommandError::Failed(e)),
        None => Ok(manifest),
    }
}

pub fn run(cfg: ExperimentConfig, out: Option<&Path>, threads: usize) -> Result<ResultManifest, CommandError> {
    execute(cfg, out, threads, run_scenario)
}

pub fn sweep(cfg: ExperimentConfig, out: Option<&Path>, threads: usize) -> Result<ResultManifest, CommandError> {
    if cfg.sweep.is_none() {
        return Err(ConfigError::single("sweep: a sweep needs a \"sweep\" section with grid axes").into());
    }
    execute(cfg, out, threads, |cfg, artifacts| {
        let axes = cfg.sweep.as_ref().ok_or_else(|| anyhow!("sweep axes missing"))?;
        let outcomes = run_sweep(&cfg.model, axes, &SweepSettings::from_config(cfg), cfg.run.seed);
        write_tables(artifacts, &outcomes, "sweep.csv")?;
        Ok(seed_streams())
    })
}

/// Run the acceptance suite, printing one line per criterion as it finishes.
pub fn verify(only: &[u8], threads: usize) -> anyhow::Result<Vec<CriterionReport>> {
    with_pool(threads, |_| run_checks(oscillation_frequencies, only, |r| println!("{r}")))
}

pub fn presets_list() -> String {
    let mut s = String::new();
    for p in &PRESETS {
        s.push_str(&format!("{:<10} {}\n{:<10} files: {}\n", p.name, p.summary, "", p.files.join(", ")));
    }
    s
}

pub fn preset_show(name: &str) -> Result<String, ConfigError> {
    let p = find(name).ok_or_else(|| ConfigError::single(format!("unknown preset {name:?}")))?;
    Ok(serde_json::to_string_pretty(&p.config()).expect("preset is valid JSON"))
}
