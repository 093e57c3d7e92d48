//! Experiment plumbing behind the `lgdf` binary: JSON run configuration,
//! one function per subcommand, and hashed run manifests.

mod commands;
mod config;
mod manifest;

use std::path::Path;

pub use commands::{
    gen_mixture, make_dataset, robust_reverse_ensemble, sample, scalar, sph_run, train, uturn_scan, vgt,
    CHECKPOINT_FILE, DATASET_FILE, DATASET_INFO_FILE, SAMPLES_FILE, TRAJECTORY_FILE, WHITENING_FILE,
};
pub use config::{
    DatasetInfo, DatasetKind, GenMixtureBlock, InitialVelocity, MakeDatasetBlock, ReBlock, ReInitial, RunConfig,
    SampleBlock, SampleMode, ScalarBlock, SphRunBlock, TrainBlock, UturnScanBlock, VgtBlock, VgtModel,
};
pub use manifest::{ManifestFile, RunManifest, MANIFEST_FILE};

use crate::error::{Error, Result};
use config::block;

pub const THREADS_ENV: &str = "LGDF_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenMixture,
    SphRun,
    MakeDataset,
    Train,
    Sample,
    UturnScan,
    Vgt,
    Scalar,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenMixture => "gen-mixture",
            Command::SphRun => "sph-run",
            Command::MakeDataset => "make-dataset",
            Command::Train => "train",
            Command::Sample => "sample",
            Command::UturnScan => "uturn-scan",
            Command::Vgt => "vgt",
            Command::Scalar => "scalar",
        }
    }
}

/// Thread count: `LGDF_THREADS`, else the command line, else the config,
/// else all available cores.
pub fn resolve_threads(env: Option<&str>, cli: Option<usize>, config: Option<usize>) -> Result<usize> {
    let n = match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => s
            .parse::<usize>()
            .map_err(|_| Error::config(THREADS_ENV, format!("`{s}` is not a thread count")))?,
        None => cli
            .or(config)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(Error::config("threads", "must be >= 1"));
    }
    Ok(n)
}

/// Run `cmd` with the block it needs from `cfg`.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path, seed: u64) -> Result<RunManifest> {
    match cmd {
        Command::GenMixture => gen_mixture(block(&cfg.gen_mixture, "gen_mixture")?, out, seed),
        Command::SphRun => sph_run(block(&cfg.sph_run, "sph_run")?, out, seed),
        Command::MakeDataset => make_dataset(block(&cfg.make_dataset, "make_dataset")?, out, seed),
        Command::Train => train(block(&cfg.train, "train")?, out, seed),
        Command::Sample => sample(block(&cfg.sample, "sample")?, out, seed),
        Command::UturnScan => uturn_scan(block(&cfg.uturn_scan, "uturn_scan")?, out, seed),
        Command::Vgt => vgt(block(&cfg.vgt, "vgt")?, out, seed),
        Command::Scalar => scalar(block(&cfg.scalar, "scalar")?, out, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_precedence() {
        assert_eq!(resolve_threads(Some("3"), Some(2), Some(1)).unwrap(), 3);
        assert_eq!(resolve_threads(None, Some(2), Some(1)).unwrap(), 2);
        assert_eq!(resolve_threads(Some(""), None, Some(1)).unwrap(), 1);
        assert!(resolve_threads(None, None, None).unwrap() >= 1);
        assert_eq!(resolve_threads(Some("x"), None, None).unwrap_err().exit_code(), 2);
        assert!(resolve_threads(None, Some(0), None).is_err());
    }

    #[test]
    fn missing_block_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = run(Command::Vgt, &RunConfig::default(), dir.path(), 0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("vgt"));
    }
}
