use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lgdf::harness::{self, Command, RunConfig};
use lgdf::Error;

/// Score-based diffusion and Lagrangian turbulence experiments.
#[derive(Parser)]
#[command(name = "lgdf", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a Gaussian mixture into a dataset file.
    GenMixture(Common),
    /// Run SPH and write snapshots.
    SphRun(Common),
    /// Turn SPH snapshots into a whitened dataset.
    MakeDataset(Common),
    /// Train a score network.
    Train(Common),
    /// Generate samples with the exact score or a checkpoint.
    Sample(Common),
    /// Scan U-turn diagnostics over noise times.
    UturnScan(Common),
    /// Restricted Euler or tetrad ensembles.
    Vgt(Common),
    /// Pair-dispersion estimates of the scalar correlation.
    Scalar(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; LGDF_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> lgdf::Result<()> {
    let (cmd, common) = match cli.command {
        Cmd::GenMixture(c) => (Command::GenMixture, c),
        Cmd::SphRun(c) => (Command::SphRun, c),
        Cmd::MakeDataset(c) => (Command::MakeDataset, c),
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Sample(c) => (Command::Sample, c),
        Cmd::UturnScan(c) => (Command::UturnScan, c),
        Cmd::Vgt(c) => (Command::Vgt, c),
        Cmd::Scalar(c) => (Command::Scalar, c),
    };
    let cfg = RunConfig::load(&common.config)?;
    let env = std::env::var(harness::THREADS_ENV).ok();
    let threads = harness::resolve_threads(env.as_deref(), common.threads, cfg.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let out = common
        .out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config {
            field: "out".into(),
            reason: "give --out or set `out` in the config".into(),
        })?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    log::info!("{} -> {} (seed {seed}, {threads} threads)", cmd.name(), out.display());
    let manifest = harness::run(cmd, &cfg, &out, seed)?;
    println!("{}", serde_json::to_string_pretty(&manifest.metrics).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
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
