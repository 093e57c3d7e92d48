//! The single JSON document that drives every command. Each command reads
//! its own block; unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diag::{UturnScanConfig, DEFAULT_COLLAPSE_EPSILON};
use crate::diffusion::{GaussianMixture, NoiseSchedule, ReverseConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::scalar::{EnsembleSpec, SyntheticFlowConfig};
use crate::score_net::TrainConfig;
use crate::sph::{CflPolicy, ForcingSpec, SphParams};
use crate::vgt::{ReConfig, TetradEnsembleConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub gen_mixture: Option<GenMixtureBlock>,
    #[serde(default)]
    pub sph_run: Option<SphRunBlock>,
    #[serde(default)]
    pub make_dataset: Option<MakeDatasetBlock>,
    #[serde(default)]
    pub train: Option<TrainBlock>,
    #[serde(default)]
    pub sample: Option<SampleBlock>,
    #[serde(default)]
    pub uturn_scan: Option<UturnScanBlock>,
    #[serde(default)]
    pub vgt: Option<VgtBlock>,
    #[serde(default)]
    pub scalar: Option<ScalarBlock>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

fn missing(block: &str) -> Error {
    Error::config(block, "block is required for this command")
}

pub(crate) fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T> {
    b.as_ref().ok_or_else(|| missing(name))
}

// ---------------------------------------------------------------- mixture

fn default_mixture() -> GaussianMixture {
    GaussianMixture::symmetric_pair(&[2.0, 0.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenMixtureBlock {
    #[serde(default = "default_mixture")]
    pub mixture: GaussianMixture,
    pub n_samples: usize,
}

impl GenMixtureBlock {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("gen_mixture.n_samples", "must be >= 1"));
        }
        self.mixture.validate()
    }
}

// ---------------------------------------------------------------- SPH

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialVelocity {
    #[default]
    Rest,
    /// Box-scale Taylor–Green vortex cells.
    TaylorGreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphRunBlock {
    pub dims: usize,
    pub per_side: usize,
    #[serde(default = "unit")]
    pub box_l: f64,
    /// Smoothing length in units of the lattice spacing.
    #[serde(default = "default_h_factor")]
    pub h_factor: f64,
    pub sound_c: f64,
    /// Defaults to `0.2 h / c`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub cfl_policy: CflPolicy,
    #[serde(default)]
    pub alpha_visc: Option<f64>,
    #[serde(default)]
    pub initial_velocity: InitialVelocity,
    #[serde(default)]
    pub initial_amplitude: f64,
    #[serde(default)]
    pub forcing: ForcingSpec,
    pub n_steps: usize,
    pub snapshot_every: usize,
}

fn unit() -> f64 {
    1.0
}
fn default_h_factor() -> f64 {
    1.3
}

impl SphRunBlock {
    pub fn params(&self) -> Result<SphParams> {
        if self.per_side == 0 {
            return Err(Error::config("sph_run.per_side", "must be >= 1"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::config("sph_run.snapshot_every", "must be >= 1"));
        }
        if !(self.initial_amplitude >= 0.0) {
            return Err(Error::config("sph_run.initial_amplitude", "must be >= 0"));
        }
        if !(self.h_factor > 0.0) {
            return Err(Error::config("sph_run.h_factor", "must be > 0"));
        }
        if !(self.sound_c > 0.0) {
            return Err(Error::config("sph_run.sound_c", "must be > 0"));
        }
        let mut p = SphParams::lattice(self.dims, self.per_side, self.box_l, self.h_factor, self.sound_c);
        if let Some(dt) = self.dt {
            p.dt = dt;
        }
        if let Some(a) = self.alpha_visc {
            p.alpha_visc = a;
        }
        p.cfl_policy = self.cfl_policy;
        p.validate()?;
        self.forcing.validate()?;
        Ok(p)
    }
}

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DatasetKind {
    /// Velocity patches of `patch^dims` grid points cut from a
    /// `grid_n^dims` interpolation, origins every `stride` points.
    Patches { grid_n: usize, patch: usize, stride: usize },
    /// The five invariants of the estimated velocity gradient of every
    /// `particle_stride`-th particle.
    VgtInvariants {
        #[serde(default = "one_usize")]
        particle_stride: usize,
    },
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MakeDatasetBlock {
    /// Directory holding `trajectory.json` from `sph-run`.
    pub snapshots: PathBuf,
    pub dataset: DatasetKind,
    /// Leading snapshots to drop (spin-up).
    #[serde(default)]
    pub skip_snapshots: usize,
    #[serde(default = "one_usize")]
    pub min_snapshots: usize,
}

impl MakeDatasetBlock {
    pub fn validate(&self) -> Result<()> {
        if self.min_snapshots == 0 {
            return Err(Error::config("make_dataset.min_snapshots", "must be >= 1"));
        }
        match self.dataset {
            DatasetKind::Patches { grid_n, patch, stride } => {
                if grid_n < 4 {
                    return Err(Error::config("make_dataset.dataset.grid_n", "must be >= 4"));
                }
                if patch == 0 || patch > grid_n {
                    return Err(Error::config("make_dataset.dataset.patch", "must lie in 1..=grid_n"));
                }
                if stride == 0 {
                    return Err(Error::config("make_dataset.dataset.stride", "must be >= 1"));
                }
            }
            DatasetKind::VgtInvariants { particle_stride } => {
                if particle_stride == 0 {
                    return Err(Error::config("make_dataset.dataset.particle_stride", "must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Sidecar written next to a generated dataset describing its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub kind: DatasetKind,
    pub dims: usize,
    pub box_l: f64,
    pub n_snapshots: usize,
    pub per_snapshot: usize,
    pub count: usize,
}

// ---------------------------------------------------------------- training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub dataset: PathBuf,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub train: TrainConfig,
}

impl TrainBlock {
    pub fn validate(&self) -> Result<()> {
        let s = self.schedule.validated()?;
        self.train.validate(&s)
    }
}

// ---------------------------------------------------------------- sampling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Exact score of the dataset's empirical mixture.
    ExactScore,
    Checkpoint,
}

fn default_diag_trajectories() -> usize {
    8
}
fn default_epsilon() -> f64 {
    DEFAULT_COLLAPSE_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBlock {
    pub mode: SampleMode,
    /// Whitened dataset; the training set for collapse diagnostics.
    pub dataset: PathBuf,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Defaults to `whitening.json` beside the dataset, else identity.
    #[serde(default)]
    pub whitening: Option<PathBuf>,
    /// Used in exact-score mode; checkpoints carry their own.
    #[serde(default)]
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub reverse: ReverseConfig,
    pub n_samples: usize,
    /// Noise dataset rows to this time and reverse, instead of starting
    /// from the prior.
    #[serde(default)]
    pub uturn: Option<f64>,
    /// Full trajectories kept for the collapse diagnostic.
    #[serde(default = "default_diag_trajectories")]
    pub diagnostic_trajectories: usize,
    #[serde(default = "default_epsilon")]
    pub collapse_epsilon: f64,
}

impl SampleBlock {
    pub fn validate(&self) -> Result<()> {
        if self.mode == SampleMode::Checkpoint && self.checkpoint.is_none() {
            return Err(Error::config("sample.checkpoint", "required in checkpoint mode"));
        }
        if !(self.collapse_epsilon > 0.0) {
            return Err(Error::config("sample.collapse_epsilon", "must be > 0"));
        }
        let s = self.schedule.validated()?;
        self.reverse.validate(&s)?;
        if let Some(t) = self.uturn {
            if !(t >= self.reverse.t_min && t <= s.horizon) {
                return Err(Error::config("sample.uturn", "must lie in [t_min, horizon]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UturnScanBlock {
    pub dataset: PathBuf,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub scan: UturnScanConfig,
}

impl UturnScanBlock {
    pub fn validate(&self) -> Result<()> {
        let s = self.schedule.validated()?;
        self.scan.validate()?;
        self.scan.grid(&s).map(|_| ())
    }
}

// ---------------------------------------------------------------- VGT

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VgtModel {
    Re,
    Tetrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ReInitial {
    /// Traceless Gaussian matrices with entries of this scale.
    Random { scale: f64 },
    /// `diag(a, a, -2a)`: `Q^3 + 27 R^2 / 4 = 0`, blows up at `t = 1/a`.
    VieillefosseLine { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReBlock {
    pub n_trajectories: usize,
    pub initial: ReInitial,
    #[serde(default)]
    pub config: ReConfig,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
}

fn default_bins() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VgtBlock {
    pub model: VgtModel,
    #[serde(default)]
    pub re: Option<ReBlock>,
    #[serde(default)]
    pub tetrad: Option<TetradEnsembleConfig>,
}

impl VgtBlock {
    pub fn validate(&self) -> Result<()> {
        match self.model {
            VgtModel::Re => {
                let re = block(&self.re, "vgt.re")?;
                if re.n_trajectories == 0 {
                    return Err(Error::config("vgt.re.n_trajectories", "must be >= 1"));
                }
                if re.n_bins == 0 {
                    return Err(Error::config("vgt.re.n_bins", "must be >= 1"));
                }
                match re.initial {
                    ReInitial::Random { scale } if !(scale >= 0.0) => {
                        return Err(Error::config("vgt.re.initial.scale", "must be >= 0"))
                    }
                    ReInitial::VieillefosseLine { a } if !a.is_finite() => {
                        return Err(Error::config("vgt.re.initial.a", "must be finite"))
                    }
                    _ => {}
                }
                re.config.validate()
            }
            VgtModel::Tetrad => block(&self.tetrad, "vgt.tetrad")?.validate(),
        }
    }
}

// ---------------------------------------------------------------- scalar

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarBlock {
    /// `None` runs pure diffusion.
    #[serde(default)]
    pub flow: Option<SyntheticFlowConfig>,
    pub ensemble: EnsembleSpec,
    pub r_sep: Vec<f64>,
}

impl ScalarBlock {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = &self.flow {
            f.validate()?;
        }
        if self.r_sep.is_empty() {
            return Err(Error::config("scalar.r_sep", "needs at least one separation"));
        }
        let l = self.ensemble.chi.corr_scale_l;
        if self.r_sep.iter().any(|r| !(*r > 0.0 && *r <= l)) {
            return Err(Error::config("scalar.r_sep", "separations must lie in (0, corr_scale_l]"));
        }
        if !(self.ensemble.kappa >= 0.0) {
            return Err(Error::config("scalar.ensemble.kappa", "must be >= 0"));
        }
        if !(self.ensemble.dt > 0.0) {
            return Err(Error::config("scalar.ensemble.dt", "must be > 0"));
        }
        if self.ensemble.ensemble_n == 0 {
            return Err(Error::config("scalar.ensemble.ensemble_n", "must be >= 1"));
        }
        self.ensemble.chi.validate()
    }
}
