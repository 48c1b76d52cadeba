use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hyperstab_cli::{parse_config, run, CliError, Command, Format, EXIT_ERROR};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    CheckSpace,
    Envelope,
    FixedPoint,
    Solve,
    Hyperstab,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::CheckSpace => Command::CheckSpace,
            Cmd::Envelope => Command::Envelope,
            Cmd::FixedPoint => Command::FixedPoint,
            Cmd::Solve => Command::Solve,
            Cmd::Hyperstab => Command::Hyperstab,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fmt {
    Json,
    Csv,
}

/// Run one experiment from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "hyperstab", version)]
struct Args {
    /// Must match the config's `command`.
    #[arg(value_enum)]
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Fmt>,
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HYPERSTAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HYPERSTAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main_inner(args: Args) -> Result<i32, CliError> {
    threads()?;
    let text = std::fs::read(&args.config).map_err(|e| CliError::Io {
        path: args.config.clone(),
        source: e,
    })?;
    let mut cfg = parse_config(&text)?;
    let wanted = Command::from(args.command);
    if cfg.command() != wanted {
        return Err(CliError::Config(format!(
            "command {} does not match the config's {}",
            wanted.name(),
            cfg.command().name()
        )));
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            Fmt::Json => Format::Json,
            Fmt::Csv => Format::Csv,
        };
    }
    let outcome = run(&cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{}: {} ({})",
        cfg.command().name(),
        if outcome.passed { "all checks passed" } else { "completed with violations" },
        cfg.output.display()
    );
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
