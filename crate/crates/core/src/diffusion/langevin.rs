//! Overdamped Langevin sampling of a target with known score, plus an
//! annealed variant along the geometric path
//! `p(x | lambda) ~ N(0, I)^(1 - lambda) * p(x)^lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A target density with explicit log-density and score `psi = -grad log p`.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
    fn score(&self, x: &[f64], out: &mut [f64]);
}

/// Isotropic normal `N(mean, std^2 I)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl GaussianTarget {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: 1.0,
        }
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let v = self.std * self.std;
        let d2: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * d2 / v - 0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * v).ln()
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        let v = self.std * self.std;
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.mean) {
            *o = (a - b) / v;
        }
    }
}

/// Weighted mixture of isotropic normals sharing one standard deviation.
#[derive(Debug, Clone)]
pub struct GaussianMixtureTarget {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub std: f64,
}

impl GaussianMixtureTarget {
    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        let v = self.std * self.std;
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| {
                let d2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                w.ln() - 0.5 * d2 / v
            })
            .collect()
    }
}

impl Target for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let terms = self.log_terms(x);
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.weights.iter().sum();
        let v = self.std * self.std;
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
            - total.ln()
            - 0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * v).ln()
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        let mut w = self.log_terms(x);
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        w.iter_mut().for_each(|t| *t = (*t - max).exp());
        let z: f64 = w.iter().sum();
        let v = self.std * self.std;
        out.copy_from_slice(x);
        for (wi, m) in w.iter().zip(&self.means) {
            for (o, mi) in out.iter_mut().zip(m) {
                *o -= wi / z * mi;
            }
        }
        out.iter_mut().for_each(|o| *o /= v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    pub step_tau: f64,
    pub n_steps: usize,
    /// Any coordinate beyond this magnitude aborts the chain.
    pub divergence_bound: f64,
}

impl LangevinConfig {
    pub fn new(step_tau: f64, n_steps: usize) -> Self {
        Self {
            step_tau,
            n_steps,
            divergence_bound: 1e8,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_tau > 0.0) {
            return Err(Error::config("step_tau", "must be > 0"));
        }
        Ok(())
    }
}

/// States visited by a chain, `(n_steps + 1) x dim` row-major, starting at `x0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }
}

fn langevin_update(
    x: &mut [f64],
    psi: &[f64],
    tau: f64,
    rng: &mut rng::StreamRng,
    bound: f64,
    step: usize,
) -> Result<()> {
    let amp = (2.0 * tau).sqrt();
    for (xi, p) in x.iter_mut().zip(psi) {
        *xi += -tau * p + amp * rng::normal(rng);
    }
    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(norm <= bound) {
        return Err(Error::Divergence { step, norm });
    }
    Ok(())
}

/// `x <- x - tau psi(x) + sqrt(2 tau) z`, keeping the whole chain.
pub fn langevin_sample<T: Target + ?Sized>(
    target: &T,
    cfg: &LangevinConfig,
    x0: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let dim = target.dim();
    if x0.len() != dim {
        return Err(Error::Argument("x0 dimension does not match target".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let mut states = Vec::with_capacity((cfg.n_steps + 1) * dim);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut psi = vec![0.0; dim];
    for step in 0..cfg.n_steps {
        target.score(&x, &mut psi);
        langevin_update(&mut x, &psi, cfg.step_tau, &mut rng, cfg.divergence_bound, step)?;
        states.extend_from_slice(&x);
    }
    Ok(Trajectory { dim, states })
}

/// Interpolation parameter as a function of the step index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnnealSchedule {
    Constant { lambda: f64 },
    /// `lambda = min(1, step / ramp_steps)`.
    Linear { ramp_steps: usize },
}

impl AnnealSchedule {
    pub fn lambda(&self, step: usize) -> f64 {
        match *self {
            AnnealSchedule::Constant { lambda } => lambda,
            AnnealSchedule::Linear { ramp_steps } if ramp_steps == 0 => 1.0,
            AnnealSchedule::Linear { ramp_steps } => (step as f64 / ramp_steps as f64).min(1.0),
        }
    }
}

/// Langevin chain on the geometric path from `N(0, I)` to `target`. The
/// chain starts from a standard normal draw; the final state is returned.
pub fn annealed_langevin_sample<T: Target + ?Sized>(
    target: &T,
    schedule: &AnnealSchedule,
    cfg: &LangevinConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dim = target.dim();
    let mut rng = rng::stream(seed, 0);
    let mut x = vec![0.0; dim];
    rng::fill_normal(&mut rng, &mut x);
    let mut psi = vec![0.0; dim];
    for step in 0..cfg.n_steps {
        let lambda = schedule.lambda(step);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::config("lambda", "must lie in [0, 1]"));
        }
        if lambda > 0.0 {
            target.score(&x, &mut psi);
        } else {
            psi.fill(0.0);
        }
        for (p, xi) in psi.iter_mut().zip(&x) {
            *p = (1.0 - lambda) * xi + lambda * *p;
        }
        langevin_update(&mut x, &psi, cfg.step_tau, &mut rng, cfg.divergence_bound, step)?;
    }
    Ok(x)
}
