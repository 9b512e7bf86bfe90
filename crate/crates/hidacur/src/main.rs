use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hidacur::config::{ExperimentConfig, Kind};
use hidacur::output;

/// Runs one experiment from a JSON config and writes a JSON result record
/// plus CSV plot data.
///
/// Exit status: 0 success, 2 config error, 3 numeric failure, 4 nonexistence
/// of the current at the requested point. HIDACUR_THREADS caps the Monte
/// Carlo worker count.
#[derive(Debug, Parser)]
#[command(name = "hidacur", version)]
struct Cli {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's "out", else ./results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn output_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(dir) = &cli.out {
        return dir.clone();
    }
    match cfg.and_then(|c| c.out.as_ref().map(|o| c.base_dir.join(o))) {
        Some(dir) => dir,
        None => PathBuf::from("results"),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stem = stem(&cli.config);
    let started = Instant::now();

    let mut loaded = None;
    let result = ExperimentConfig::load(cli.kind, &cli.config).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let cfg = loaded.insert(cfg);
        hidacur::run(cfg)
    });
    let dir = output_dir(&cli, loaded.as_ref());

    let written = match (&result, &loaded) {
        (Ok(outcome), Some(cfg)) => {
            let wall = started.elapsed().as_secs_f64();
            output::write_outcome(&dir, &stem, cfg, outcome, wall)
        }
        (Err(e), _) => {
            eprintln!("hidacur {}: {e}", cli.kind);
            output::write_error(&dir, &stem, cli.kind, e)
        }
        (Ok(_), None) => unreachable!("a run needs a loaded config"),
    };
    match (result, written) {
        (Ok(_), Ok(path)) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        (Ok(_), Err(e)) => {
            eprintln!("hidacur {}: {e}", cli.kind);
            ExitCode::from(e.exit_code() as u8)
        }
        (Err(e), record) => {
            if let Ok(path) = record {
                eprintln!("error record: {}", path.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
