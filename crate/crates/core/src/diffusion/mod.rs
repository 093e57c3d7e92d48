//! Forward OU noising, its closed-form Gaussian-mixture marginal, reverse
//! time sampling, and Langevin baselines.

mod dataset;
mod gmm;
mod langevin;
mod mixture;
mod schedule;
mod sde;

pub use dataset::{read_rows, write_rows, Dataset, Whitening};
pub use gmm::{GaussianMixture, MixtureOuMarginal};
pub use langevin::{
    annealed_langevin_sample, langevin_sample, AnnealSchedule, GaussianMixtureTarget,
    GaussianTarget, LangevinConfig, Target, Trajectory,
};
pub use mixture::{MarginalParams, MixtureMarginal};
pub use schedule::{NoiseSchedule, ScheduleKind};
pub use sde::{
    forward_ou_step, integrate_reverse, reverse_sde_ensemble, reverse_sde_sample,
    reverse_sde_trajectory, simulate_forward, PathState, PathStateBatch, ReverseConfig,
};

use crate::error::Result;

/// Anything that can evaluate `psi(t, x) = -grad_x log p(x | t)`.
pub trait ScoreProvider: Sync {
    fn dim(&self) -> usize;

    fn score(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Row-major batch version; `xs` and `out` are `n x dim`.
    fn score_batch(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        for (x, o) in xs.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.score(t, x, o)?;
        }
        Ok(())
    }
}
