use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmcw_track::runspec::{export_maps, parse_runspec, run};
use fmcw_track::scenarios::builtin_scenarios;

#[derive(Parser)]
#[command(name = "fmcw-track", version, about = "FMCW radar indoor human-tracking workbench")]
struct Cli {
    /// Overrides the seed of the run spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory of the run spec.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the experiment described by a JSON run spec.
    Run { spec: PathBuf },
    /// Built-in scenes.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Re-creates the per-frame detection maps of a finished run.
    ExportMaps { run_dir: PathBuf },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Scenarios { action: ScenarioAction::List } => {
            for s in builtin_scenarios() {
                println!("{:<20} {}", s.name, s.description);
            }
            Ok(())
        }
        Command::Run { spec } => parse_runspec(&spec).and_then(|mut s| {
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(out) = cli.out {
                s.output_dir = out;
            }
            let summary = run(&s)?;
            println!("{} ({} files, config {})", summary.dir.display(), summary.files.len(), &summary.config_hash[..12]);
            Ok(())
        }),
        Command::ExportMaps { run_dir } => export_maps(&run_dir).map(|n| println!("{n} frames per pipeline written under {}", run_dir.display())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!(": {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
