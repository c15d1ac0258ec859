use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pathwise_cli::config::{load, Kind};
use pathwise_cli::execute;

/// Run one experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "pathwise", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML config; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = load(args.config.as_ref(), args.kind, args.seed, args.out).and_then(|cfg| execute(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pathwise: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
