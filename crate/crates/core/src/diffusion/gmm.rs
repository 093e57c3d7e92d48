//! Finite Gaussian mixtures with diagonal covariances: a synthetic ground
//! truth whose forward OU marginals stay Gaussian mixtures in closed form.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, NoiseSchedule, ScoreProvider, Whitening};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixture {
    /// Unnormalized component weights.
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-coordinate variances of each component.
    pub variances: Vec<Vec<f64>>,
}

impl GaussianMixture {
    /// Equal-weight pair `N(+-center, I)`.
    pub fn symmetric_pair(center: &[f64]) -> Self {
        let d = center.len();
        Self {
            weights: vec![1.0, 1.0],
            means: vec![center.to_vec(), center.iter().map(|c| -c).collect()],
            variances: vec![vec![1.0; d]; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::config("weights", "need at least one component"));
        }
        if self.means.len() != k || self.variances.len() != k {
            return Err(Error::config("means", "weights, means and variances must have equal length"));
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().chain(&self.variances).any(|v| v.len() != d) {
            return Err(Error::config("means", "every mean and variance needs the same positive dimension"));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config("weights", "must be finite and > 0"));
        }
        if self.means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::config("means", "must be finite"));
        }
        if self.variances.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("variances", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// `n` i.i.d. samples; sample `i` draws from `rng::stream(seed, i)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let d = self.dim();
        let total: f64 = self.weights.iter().sum();
        let mut out = vec![0.0; n * d];
        for (i, x) in out.chunks_exact_mut(d).enumerate() {
            let mut r = rng::stream(seed, i as u64);
            let mut u = r.gen::<f64>() * total;
            let mut k = self.n_components() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                if u < *w {
                    k = j;
                    break;
                }
                u -= w;
            }
            for ((xi, m), v) in x.iter_mut().zip(&self.means[k]).zip(&self.variances[k]) {
                *xi = m + v.sqrt() * rng::normal(&mut r);
            }
        }
        Ok(out)
    }

    pub fn sample_dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        Dataset::new(self.dim(), self.sample(n, seed)?, format!("gaussian-mixture(K={}, seed={seed})", self.n_components()))
    }

    /// The same distribution expressed in whitened coordinates.
    pub fn whitened(&self, w: &Whitening) -> Result<Self> {
        if w.mean.len() != self.dim() {
            return Err(Error::Argument("whitening and mixture dimensions differ".into()));
        }
        let mut out = self.clone();
        for m in &mut out.means {
            w.forward_in_place(m);
        }
        for v in &mut out.variances {
            v.iter_mut().zip(&w.scale).for_each(|(vi, s)| *vi /= s * s);
        }
        Ok(out)
    }

    /// Forward marginal at time `t` under `schedule`.
    pub fn marginal(&self, schedule: NoiseSchedule) -> Result<MixtureOuMarginal> {
        self.validate()?;
        Ok(MixtureOuMarginal {
            mixture: self.clone(),
            schedule,
        })
    }
}

/// `p(x | t) = sum_k w_k N(x; a mu_k, a^2 Sigma_k + sigma^2 I)`.
#[derive(Debug, Clone)]
pub struct MixtureOuMarginal {
    mixture: GaussianMixture,
    schedule: NoiseSchedule,
}

impl MixtureOuMarginal {
    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    // Per-component means and variances at time t.
    fn components(&self, t: f64) -> Result<(f64, Vec<Vec<f64>>)> {
        let a = self.schedule.shrink(t)?;
        let s2 = self.schedule.variance(t)?;
        let vars = self
            .mixture
            .variances
            .iter()
            .map(|v| v.iter().map(|vi| a * a * vi + s2).collect())
            .collect();
        Ok((a, vars))
    }

    // Log of w_k N(x; a mu_k, var_k) per component, normalizer included.
    fn log_terms(&self, a: f64, vars: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let total: f64 = self.mixture.weights.iter().sum();
        self.mixture
            .weights
            .iter()
            .zip(&self.mixture.means)
            .zip(vars)
            .map(|((w, m), v)| {
                let mut l = (w / total).ln();
                for ((xi, mi), vi) in x.iter().zip(m).zip(v) {
                    let r = xi - a * mi;
                    l -= 0.5 * (r * r / vi + (2.0 * PI * vi).ln());
                }
                l
            })
            .collect()
    }

    pub fn log_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let (a, vars) = self.components(t)?;
        let l = self.log_terms(a, &vars, x);
        let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(max + l.iter().map(|v| (v - max).exp()).sum::<f64>().ln())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.mixture.dim() {
            return Err(Error::Argument(format!(
                "state has dimension {}, mixture has {}",
                x.len(),
                self.mixture.dim()
            )));
        }
        Ok(())
    }
}

impl ScoreProvider for MixtureOuMarginal {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn score(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(x)?;
        let (a, vars) = self.components(t)?;
        let mut w = self.log_terms(a, &vars, x);
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        w.iter_mut().for_each(|v| *v = (*v - max).exp());
        let z: f64 = w.iter().sum();
        out.iter_mut().for_each(|o| *o = 0.0);
        for ((wk, m), v) in w.iter().zip(&self.mixture.means).zip(&vars) {
            for (((o, xi), mi), vi) in out.iter_mut().zip(x).zip(m).zip(v) {
                *o += wk / z * (xi - a * mi) / vi;
            }
        }
        Ok(())
    }

    fn score_batch(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        use rayon::prelude::*;
        let d = self.dim();
        if xs.len() % d != 0 || out.len() != xs.len() {
            return Err(Error::Argument("batch shape does not match the mixture".into()));
        }
        xs.par_chunks(d)
            .zip(out.par_chunks_mut(d))
            .try_for_each(|(x, o)| self.score(t, x, o))
    }
}
