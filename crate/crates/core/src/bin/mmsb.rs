use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmsb::runner::{run_experiment, run_projection, validate_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "mmsb", version, about = "Multimodal utterance-level sentiment benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every configured (modality, model) cell.
    Run(RunArgs),
    /// Check a config and its data without training.
    Validate { config: PathBuf },
    /// Write a t-SNE projection of the fused features.
    Project(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MMSB_WORKERS")]
    workers: Option<usize>,
    /// Replace a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            workers: self.workers,
            overwrite: self.overwrite,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_experiment(&args.config, &args.options()).map(|s| {
            print!("{}", mmsb::eval::render_table(&s.table, mmsb::eval::TableStyle::Text));
            println!("wrote {} files to {}", s.files.len(), s.out_dir.display());
        }),
        Command::Validate { config } => validate_experiment(config).map(|msg| println!("{msg}")),
        Command::Project(args) => {
            run_projection(&args.config, &args.options()).map(|p| println!("wrote {}", p.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
