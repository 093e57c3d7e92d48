//! U-turn diagnostics: how far to noise the data before reversing, and the
//! noise-then-reverse round trip itself.
//!
//! Three curves are scanned over a time grid — the forward autocorrelation,
//! the `sigma^2`-weighted score norm and a per-coordinate KS test for
//! Gaussianity — and the recommended U-turn time is the first grid time at
//! which all three pass.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ks::ks_gaussianity;
use crate::diffusion::{
    integrate_reverse, Dataset, MixtureMarginal, NoiseSchedule, ReverseConfig, ScoreProvider,
};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

// Stream indices above this are reserved so sub-computations of one scan
// never share a stream with each other.
const PROBE_LANE: u64 = 1 << 40;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

fn mc(values: &[f64]) -> McEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    McEstimate { mean, stderr: (var / n).sqrt() }
}

/// Exact OU transitions of `n_paths` paths, each started at a uniformly
/// drawn dataset row, recorded at every time of `t_grid`. Returns the start
/// states followed by one `n_paths x dim` block per grid time.
fn forward_paths(
    dataset: &Dataset,
    schedule: &NoiseSchedule,
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = dataset.dim();
    let mut b = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        if k > 0 && t < t_grid[k - 1] {
            return Err(Error::Argument("time grid must be ascending".into()));
        }
        b.push(schedule.integral(t)?);
    }
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let s = r.gen_range(0..dataset.count());
            let mut x = dataset.sample(s).to_vec();
            let mut out = Vec::with_capacity((t_grid.len() + 1) * dim);
            out.extend_from_slice(&x);
            let mut b_prev = 0.0;
            for &bk in &b {
                let db = bk - b_prev;
                let (a, sd) = ((-0.5 * db).exp(), (-(-db).exp_m1()).sqrt());
                for xi in x.iter_mut() {
                    *xi = a * *xi + sd * rng::normal(&mut r);
                }
                out.extend_from_slice(&x);
                b_prev = bk;
            }
            out
        })
        .collect();
    let mut starts = Vec::with_capacity(n_paths * dim);
    let mut by_time = vec![Vec::with_capacity(n_paths * dim); t_grid.len()];
    for path in &per_path {
        starts.extend_from_slice(&path[..dim]);
        for (k, blk) in by_time.iter_mut().enumerate() {
            blk.extend_from_slice(&path[(k + 1) * dim..(k + 2) * dim]);
        }
    }
    Ok((starts, by_time))
}

fn correlation(starts: &[f64], states: &[f64], norm: f64) -> f64 {
    starts.iter().zip(states).map(|(a, b)| a * b).sum::<f64>() / norm
}

/// `C(t) = E[x(0) . x(t)] / E[|x(0)|^2]` along forward paths started at
/// dataset rows.
pub fn forward_autocorrelation(
    dataset: &Dataset,
    schedule: &NoiseSchedule,
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_paths < 2 {
        return Err(Error::Argument("autocorrelation needs n_paths >= 2".into()));
    }
    let (starts, by_time) = forward_paths(dataset, schedule, t_grid, n_paths, seed)?;
    let norm: f64 = starts.iter().map(|v| v * v).sum();
    if !(norm > 0.0) {
        return Err(Error::UndefinedNormalization(
            "E|x(0)|^2 vanishes: every sampled start is the origin".into(),
        ));
    }
    Ok(by_time.iter().map(|x| correlation(&starts, x, norm)).collect())
}

/// `E[sigma_t^2 |psi(t, x)|^2] / d` for `x ~ p(x | t)`, with standard error.
pub fn weighted_score_norm_estimate(
    marginal: &MixtureMarginal,
    t: f64,
    n_probe: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_probe == 0 {
        return Err(Error::Argument("n_probe must be >= 1".into()));
    }
    let p = marginal.params(t)?;
    let dim = marginal.dim();
    let ds = marginal.dataset();
    let mut xs = vec![0.0; n_probe * dim];
    let sd = p.variance.sqrt();
    xs.par_chunks_mut(dim).enumerate().for_each(|(i, x)| {
        let mut r = rng::stream(seed, i as u64);
        let s = r.gen_range(0..ds.count());
        for (xi, mu) in x.iter_mut().zip(ds.sample(s)) {
            *xi = p.shrink * mu + sd * rng::normal(&mut r);
        }
    });
    let mut psi = vec![0.0; xs.len()];
    marginal.score_batch(t, &xs, &mut psi)?;
    let vals: Vec<f64> = psi
        .chunks_exact(dim)
        .map(|g| p.variance * g.iter().map(|v| v * v).sum::<f64>() / dim as f64)
        .collect();
    Ok(mc(&vals))
}

pub fn weighted_score_norm(marginal: &MixtureMarginal, t: f64, n_probe: usize, seed: u64) -> Result<f64> {
    weighted_score_norm_estimate(marginal, t, n_probe, seed).map(|e| e.mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UturnThresholds {
    /// Pass when `|C(t)| < autocorr_max`.
    pub autocorr_max: f64,
    /// Pass when the largest per-coordinate KS distance is below this;
    /// `None` uses the 5% critical value `1.36 / sqrt(n_paths)`.
    pub ks_max: Option<f64>,
    /// Pass when `|weighted_score_norm - 1| < norm_band`.
    pub norm_band: f64,
}

impl Default for UturnThresholds {
    fn default() -> Self {
        Self {
            autocorr_max: 0.05,
            ks_max: None,
            norm_band: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UturnScanConfig {
    /// Candidate times (ascending, > 0). Empty means `n_grid` evenly spaced
    /// times ending at the horizon.
    pub t_grid: Vec<f64>,
    pub n_grid: usize,
    pub n_paths: usize,
    pub n_probe: usize,
    pub thresholds: UturnThresholds,
}

impl Default for UturnScanConfig {
    fn default() -> Self {
        Self {
            t_grid: Vec::new(),
            n_grid: 50,
            n_paths: 2000,
            n_probe: 2000,
            thresholds: UturnThresholds::default(),
        }
    }
}

impl UturnScanConfig {
    pub fn grid(&self, schedule: &NoiseSchedule) -> Result<Vec<f64>> {
        if !self.t_grid.is_empty() {
            if self.t_grid.iter().any(|t| !(*t > 0.0 && *t <= schedule.horizon)) {
                return Err(Error::config("t_grid", "times must lie in (0, horizon]"));
            }
            if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("t_grid", "times must be strictly ascending"));
            }
            return Ok(self.t_grid.clone());
        }
        if self.n_grid == 0 {
            return Err(Error::config("n_grid", "must be >= 1"));
        }
        let dt = schedule.horizon / self.n_grid as f64;
        Ok((1..=self.n_grid).map(|k| k as f64 * dt).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::config("n_paths", "must be >= 2"));
        }
        if self.n_probe == 0 {
            return Err(Error::config("n_probe", "must be >= 1"));
        }
        let th = &self.thresholds;
        if !(th.autocorr_max >= 0.0) || !(th.norm_band >= 0.0) || th.ks_max.is_some_and(|k| !(k >= 0.0)) {
            return Err(Error::config("thresholds", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UturnReport {
    pub t_candidates: Vec<f64>,
    pub autocorr: Vec<f64>,
    pub weighted_score_norm: Vec<f64>,
    pub ks_to_gaussian: Vec<f64>,
    pub recommended_t: f64,
    /// Set when no candidate passes; `recommended_t` is then the horizon.
    pub criteria_unmet: bool,
}

/// Scan the three diagnostics on `dataset` (assumed whitened) and pick the
/// earliest time where all pass.
///
/// A dataset whose rows are all zero has no correlation to lose; its
/// autocorrelation curve is reported as zero.
pub fn recommend_uturn_time(
    dataset: &Dataset,
    schedule: &NoiseSchedule,
    cfg: &UturnScanConfig,
    seed: u64,
) -> Result<UturnReport> {
    cfg.validate()?;
    let grid = cfg.grid(schedule)?;
    let dim = dataset.dim();
    let (starts, by_time) = forward_paths(dataset, schedule, &grid, cfg.n_paths, seed)?;
    let norm: f64 = starts.iter().map(|v| v * v).sum();
    let autocorr: Vec<f64> = if norm > 0.0 {
        by_time.iter().map(|x| correlation(&starts, x, norm)).collect()
    } else {
        vec![0.0; grid.len()]
    };
    let ks_to_gaussian = by_time
        .iter()
        .map(|x| {
            (0..dim).try_fold(0.0f64, |m, k| {
                let col: Vec<f64> = x.iter().skip(k).step_by(dim).copied().collect();
                Ok::<_, Error>(m.max(ks_gaussianity(&col)?))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let marginal = MixtureMarginal::new(*schedule, dataset.clone());
    let probe_seed = rng::sub_seed(seed, PROBE_LANE);
    let norms = grid
        .iter()
        .map(|&t| weighted_score_norm(&marginal, t, cfg.n_probe, probe_seed))
        .collect::<Result<Vec<_>>>()?;

    let th = cfg.thresholds;
    let ks_max = th.ks_max.unwrap_or(1.36 / (cfg.n_paths as f64).sqrt());
    let pass = (0..grid.len()).find(|&k| {
        autocorr[k].abs() < th.autocorr_max && ks_to_gaussian[k] < ks_max && (norms[k] - 1.0).abs() < th.norm_band
    });
    Ok(UturnReport {
        recommended_t: pass.map_or(schedule.horizon, |k| grid[k]),
        criteria_unmet: pass.is_none(),
        t_candidates: grid,
        autocorr,
        weighted_score_norm: norms,
        ks_to_gaussian,
    })
}

/// Output of a U-turn ensemble: final states (`n x dim`) and, per member,
/// the dataset row it started from.
#[derive(Debug, Clone)]
pub struct UturnOutput {
    pub samples: Vec<f64>,
    pub origins: Vec<usize>,
}

/// Noise `n` uniformly drawn dataset rows to `t_u` (exact OU transition),
/// then integrate the reverse dynamics from `t_u` down to `cfg.t_min` in
/// `cfg.steps` uniform steps. Member `i` uses `rng::stream(seed, i)`.
pub fn uturn_ensemble<P: ScoreProvider + ?Sized>(
    dataset: &Dataset,
    schedule: &NoiseSchedule,
    provider: &P,
    t_u: f64,
    cfg: &ReverseConfig,
    n: usize,
    seed: u64,
) -> Result<UturnOutput> {
    cfg.validate(schedule)?;
    if !(t_u >= cfg.t_min && t_u <= schedule.horizon) {
        return Err(Error::Domain {
            what: "t_u",
            value: t_u,
            lo: cfg.t_min,
            hi: schedule.horizon,
        });
    }
    if provider.dim() != dataset.dim() {
        return Err(Error::Argument("score provider and dataset dimensions differ".into()));
    }
    let dim = dataset.dim();
    let a = schedule.shrink(t_u)?;
    let sd = schedule.variance(t_u)?.sqrt();
    let mut rngs: Vec<StreamRng> = (0..n as u64).map(|i| rng::stream(seed, i)).collect();
    let mut states = vec![0.0; n * dim];
    let mut origins = Vec::with_capacity(n);
    for (x, r) in states.chunks_exact_mut(dim).zip(rngs.iter_mut()) {
        let s = r.gen_range(0..dataset.count());
        origins.push(s);
        for (xi, mu) in x.iter_mut().zip(dataset.sample(s)) {
            *xi = a * mu + sd * rng::normal(r);
        }
    }
    if n > 0 && t_u > cfg.t_min {
        integrate_reverse(provider, schedule, t_u, cfg.t_min, cfg.steps, &mut states, &mut rngs, None)?;
    }
    Ok(UturnOutput { samples: states, origins })
}

pub fn uturn_sample<P: ScoreProvider + ?Sized>(
    dataset: &Dataset,
    schedule: &NoiseSchedule,
    provider: &P,
    t_u: f64,
    cfg: &ReverseConfig,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let out = uturn_ensemble(dataset, schedule, provider, t_u, cfg, 1, seed)?;
    Ok((out.samples, out.origins[0]))
}
