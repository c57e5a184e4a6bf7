use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sweepscope::commands;
use sweepscope::http;

#[derive(Parser)]
#[command(name = "sweepscope", version, about = "Run and inspect clustering and topic-model parameter sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Serve a run directory over HTTP.
    Serve {
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write a class attribute CSV; SPEC is inline JSON or a JSON file.
    ExportClass {
        dir: PathBuf,
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the archetype model at another threshold.
    RecomputeArchetypes {
        dir: PathBuf,
        #[arg(long)]
        threshold: usize,
    },
    /// Write a synthetic table with ground truth to CSV.
    Generate {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, workers } => commands::run_file(&config, workers).map(|m| {
            println!("{} iterations, {} failed, run hash {}", m.iteration_keys.len(), m.failures.len(), m.run_hash);
            for f in &m.failures {
                println!("failed {}: {}", f.key, f.error);
            }
        }),
        Command::Serve { dir, port, host } => {
            let addr: SocketAddr = match format!("{host}:{port}").parse() {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: bad address: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            return match runtime.block_on(http::serve(dir, addr)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
        Command::ExportClass { dir, spec, out } => commands::parse_class_spec(&spec)
            .and_then(|spec| commands::export_class(&dir, spec, out.as_deref()))
            .map(|path| println!("{}", path.display())),
        Command::RecomputeArchetypes { dir, threshold } => {
            commands::recompute_archetypes(&dir, threshold).map(|(path, s)| {
                println!(
                    "threshold {}: {} archetypes, {:.1}% noise, {} complete iterations -> {}",
                    s.threshold,
                    s.n_archetypes,
                    s.noise_pct,
                    s.model.complete_iterations.len(),
                    path.display()
                )
            })
        }
        Command::Generate { spec, out } => commands::read_synthetic_spec(&spec)
            .and_then(|spec| commands::generate_table(&spec, &out))
            .map(|n| println!("{n} items -> {}", out.display())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
