use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ghost_optics::harness::{exit_code, load_config, run, Mode};

#[derive(Parser)]
#[command(name = "ghost-optics", version, about = "Ghost interference and ghost imaging simulation and fits")]
struct Cli {
    /// Configuration file, or the name of a built-in preset.
    #[arg(long, global = true, default_value = "paper-fig1")]
    config: String,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Focal-plane coincidence pattern, Poisson counts and visibility fit.
    Interference,
    /// Ghost image, Poisson counts and blur fit.
    Image,
    /// Classical correlated-gun counter-model.
    Classical,
    /// EPR-type uncertainty report from prior outputs or inline values.
    Report,
    /// Classical property sweep over random gun models.
    Sweep,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Self {
        match c {
            Command::Interference => Mode::Interference,
            Command::Image => Mode::Image,
            Command::Classical => Mode::Classical,
            Command::Report => Mode::Report,
            Command::Sweep => Mode::Sweep,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GHOST_OPTICS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("GHOST_OPTICS_THREADS must be a non-negative integer, got '{v}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(3);
    }
    let mut config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config);
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    config.mode = Some(cli.command.into());
    if let Some(seed) = cli.seed {
        config.counts.seed = seed;
    }
    match run(&config, &cli.out) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
