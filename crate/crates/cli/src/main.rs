use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bjj_cli::commands::{self, CommandError, Source};
use bjj_cli::exit;

#[derive(Parser)]
#[command(name = "bjj", version, about = "Simulations of a dissipative two-species Bose-Josephson junction")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "BJJ_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON), or a manifest from an earlier run.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `bjj presets list`).
    #[arg(long)]
    preset: Option<String>,
    /// Result directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its result directory.
    Run(RunArgs),
    /// Classify every point of the config's sweep grid.
    Sweep(RunArgs),
    /// Run the acceptance suite.
    Verify {
        /// Only these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's config, ready to edit and pass to --config.
    Show {
        name: String,
    },
}

fn report(result: Result<(), CommandError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

type Body =
    fn(bjj_cli::config::ExperimentConfig, Option<&std::path::Path>, usize) -> Result<bjj_cli::artifacts::ResultManifest, CommandError>;

fn execute(a: &RunArgs, threads: usize, body: Body) -> Result<(), CommandError> {
    let cfg = commands::resolve(&Source { config: a.config.as_deref(), preset: a.preset.as_deref(), seed: a.seed })?;
    let m = body(cfg, a.out.as_deref(), threads)?;
    println!("wrote {} file(s) in {:.1}s", m.files.len(), m.wall_seconds);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => report(execute(&a, cli.threads, commands::run)),
        Command::Sweep(a) => report(execute(&a, cli.threads, commands::sweep)),
        Command::Verify { only } => match commands::verify(&only, cli.threads) {
            Ok(reports) => {
                let failed = reports.iter().filter(|r| !r.passed).count();
                println!("{} passed, {failed} failed", reports.len() - failed);
                ExitCode::from(if failed == 0 { exit::OK } else { exit::FAILED })
            }
            Err(e) => report(Err(CommandError::Failed(e))),
        },
        Command::Presets { action: PresetAction::List } => {
            print!("{}", commands::presets_list());
            ExitCode::from(exit::OK)
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            report(commands::preset_show(&name).map(|s| println!("{s}")).map_err(Into::into))
        }
    }
}
