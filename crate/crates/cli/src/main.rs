use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hvo_cli::commands::{self, RefSpec, TableFormat};
use hvo_cli::error::EXIT_INPUT;
use hvo_cli::{io, CliError, CliResult};
use hvo_core::ScalarizationMode;

#[derive(Parser)]
#[command(
    name = "hvo",
    version,
    about = "Hypervolume reward shaping and desk-scale GRPO experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scalar rewards and group advantages for a score-matrix CSV.
    Reward {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scalarization mode of the config.
        #[arg(long)]
        mode: Option<ScalarizationMode>,
        /// Score CSV (`dim_1..dim_M`, optional `doc_len,out_len`); `-` reads stdin.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact hypervolume of a point CSV.
    Hv {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated coordinates, or `nadir-delta`.
        #[arg(long = "ref")]
        reference: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Train one run per configured seed and write logs and reports.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Table-style comparison of finished runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.99)]
        epsilon: f64,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("HVO_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Input(format!(
            "HVO_THREADS must be a positive integer, got '{value}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let output = match cli.command {
        Command::Reward {
            config,
            mode,
            input,
            out,
        } => {
            let csv = commands::cmd_reward(&input, config.as_deref(), mode)?;
            if let Some(path) = out {
                return io::write_file(&path, &csv);
            }
            csv
        }
        Command::Hv {
            input,
            reference,
            delta,
        } => commands::cmd_hv(&input, &RefSpec::parse(&reference, delta)?)?,
        Command::Train { config, out } => commands::cmd_train(&config, &out)?,
        Command::Compare {
            runs,
            format,
            delta,
            epsilon,
        } => commands::cmd_compare(&runs, format.parse::<TableFormat>()?, delta, epsilon)?,
    };
    print!("{output}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            // Usage errors follow the same one-line contract as runtime errors.
            let rendered = e.render().to_string();
            eprintln!(
                "{}",
                rendered
                    .lines()
                    .next()
                    .unwrap_or("error: invalid arguments")
            );
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = e.to_string().replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
