use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use eit::config::{parse_scenario, Task};
use eit::run::{run_scenario, RunOptions};
use eit::EitError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Svd,
    CsdMap,
    MiMap,
    Wigner,
    Ndf,
    Hyperbolas,
    MonteCarlo,
    Equivalence,
}

impl From<Command> for Task {
    fn from(c: Command) -> Task {
        match c {
            Command::Svd => Task::Svd,
            Command::CsdMap => Task::CsdMap,
            Command::MiMap => Task::MiMap,
            Command::Wigner => Task::Wigner,
            Command::Ndf => Task::Ndf,
            Command::Hyperbolas => Task::Hyperbolas,
            Command::MonteCarlo => Task::MonteCarlo,
            Command::Equivalence => Task::Equivalence,
        }
    }
}

/// Degrees of freedom and coherence of fields radiated by incoherent line sources.
#[derive(Debug, Parser)]
#[command(name = "eit", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report mutual information in bits.
    #[arg(long)]
    log_bits: bool,
}

fn run(cli: Cli) -> Result<(), EitError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(EitError::Config { line: None, key: "--threads".into(), message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| EitError::Numerical(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", cli.config.display())))?;
    let mut scenario = parse_scenario(&text, cli.command.into())?;
    if let Some(out) = cli.out {
        scenario.output_dir = out;
    }
    let report = run_scenario(&scenario, RunOptions { log_bits: cli.log_bits })?;
    if let Some(text) = report.stdout {
        println!("{text}");
    }
    for f in &report.files {
        eprintln!("wrote {}", scenario.output_dir.join(f).display());
    }
    eprintln!("wrote {} (sha256 {})", scenario.output_dir.join("manifest.json").display(), report.manifest_sha256);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
