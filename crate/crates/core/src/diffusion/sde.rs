//! Euler–Maruyama integration of the forward OU noising process and of its
//! time reversal.
//!
//! Sign convention: `ScoreProvider::score` returns `psi = -grad log p`. The
//! reverse-time drift (forward-time notation) is
//! `-beta x / 2 - beta grad log p = -beta x / 2 + beta psi`, so a step from
//! `t` down to `t - h` reads
//! `x <- x + h beta(t) (x / 2 - psi(t, x)) + sqrt(beta(t) h) z`.
//! With the exact mixture score this reproduces the forward marginals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NoiseSchedule, ScoreProvider};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: Vec<f64>,
}

/// One forward step `x <- x - beta x dt / 2 + sqrt(beta dt) noise`.
pub fn forward_ou_step(
    state: &PathState,
    schedule: &NoiseSchedule,
    dt: f64,
    noise: &[f64],
) -> Result<PathState> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be > 0, got {dt}")));
    }
    if noise.len() != state.x.len() {
        return Err(Error::Argument("noise and state dimensions differ".into()));
    }
    schedule.beta(state.t + dt)?;
    let beta = schedule.beta(state.t)?;
    let diff = (beta * dt).sqrt();
    let x: Vec<f64> = state
        .x
        .iter()
        .zip(noise)
        .map(|(x, z)| x - 0.5 * beta * x * dt + diff * z)
        .collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            step: 0,
            t: state.t,
            detail: "non-finite state after forward step".into(),
        });
    }
    Ok(PathState {
        t: state.t + dt,
        x,
    })
}

/// Run forward OU paths from `starts` (row-major, `n x dim`) and record the
/// state at each time in `times` (ascending, >= 0). Steps are uniform with
/// size at most `max_dt` between consecutive record times. Path `i` draws
/// from `rng::stream(seed, i)`.
pub fn simulate_forward(
    schedule: &NoiseSchedule,
    dim: usize,
    starts: &[f64],
    times: &[f64],
    max_dt: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Argument("record times must be ascending and >= 0".into()));
    }
    if !(max_dt > 0.0) {
        return Err(Error::Argument("max_dt must be > 0".into()));
    }
    let n = starts.len() / dim;
    let per_path: Vec<Result<Vec<f64>>> = starts
        .par_chunks(dim)
        .enumerate()
        .map(|(i, x0)| {
            let mut rng = rng::stream(seed, i as u64);
            let mut state = PathState { t: 0.0, x: x0.to_vec() };
            let mut noise = vec![0.0; dim];
            let mut out = Vec::with_capacity(times.len() * dim);
            let mut step = 0usize;
            for &target in times {
                let span = target - state.t;
                if span > 0.0 {
                    let k = (span / max_dt).ceil().max(1.0) as usize;
                    let dt = span / k as f64;
                    for _ in 0..k {
                        rng::fill_normal(&mut rng, &mut noise);
                        state = forward_ou_step(&state, schedule, dt, &noise).map_err(|e| match e {
                            Error::Numerical { detail, t, .. } => Error::Numerical { step, t, detail },
                            other => other,
                        })?;
                        step += 1;
                    }
                    state.t = target;
                }
                out.extend_from_slice(&state.x);
            }
            Ok(out)
        })
        .collect();
    let mut by_time = vec![Vec::with_capacity(n * dim); times.len()];
    for path in per_path {
        let path = path?;
        for (k, chunk) in path.chunks_exact(dim).enumerate() {
            by_time[k].extend_from_slice(chunk);
        }
    }
    Ok(by_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReverseConfig {
    pub steps: usize,
    /// Integration stops here; the empirical marginal is singular at t = 0.
    pub t_min: f64,
}

impl Default for ReverseConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            t_min: 1e-3,
        }
    }
}

impl ReverseConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps", "must be >= 1"));
        }
        if !(self.t_min > 0.0 && self.t_min < schedule.horizon) {
            return Err(Error::config("t_min", "must lie in (0, horizon)"));
        }
        Ok(())
    }
}

/// Integrate an ensemble backwards from `t_start` to `t_end` in `steps`
/// uniform steps. `states` is `n x dim` row-major and `rngs[i]` supplies the
/// noise for row `i`. When `record` is given, the ensemble is pushed after
/// every step.
pub fn integrate_reverse<P: ScoreProvider + ?Sized>(
    provider: &P,
    schedule: &NoiseSchedule,
    t_start: f64,
    t_end: f64,
    steps: usize,
    states: &mut [f64],
    rngs: &mut [StreamRng],
    mut record: Option<&mut Vec<PathStateBatch>>,
) -> Result<()> {
    let dim = provider.dim();
    if steps == 0 || !(t_start > t_end) {
        return Err(Error::Argument(format!(
            "reverse integration needs steps >= 1 and t_start > t_end (got {t_start} -> {t_end})"
        )));
    }
    if states.len() != rngs.len() * dim {
        return Err(Error::Argument("one rng per ensemble member is required".into()));
    }
    let h = (t_start - t_end) / steps as f64;
    let mut psi = vec![0.0; states.len()];
    for k in 0..steps {
        let t = t_start - k as f64 * h;
        let beta = schedule.beta(t)?;
        provider.score_batch(t, states, &mut psi)?;
        let diff = (beta * h).sqrt();
        let bad = states
            .par_chunks_mut(dim)
            .zip(psi.par_chunks(dim))
            .zip(rngs.par_iter_mut())
            .map(|((x, p), rng)| {
                for (xi, pi) in x.iter_mut().zip(p) {
                    let z = rng::normal(rng);
                    *xi += h * beta * (0.5 * *xi - pi) + diff * z;
                }
                x.iter().any(|v| !v.is_finite())
            })
            .any(|b| b);
        if bad {
            return Err(Error::Numerical {
                step: k,
                t,
                detail: "non-finite state in reverse integration".into(),
            });
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(PathStateBatch {
                t: t - h,
                states: states.to_vec(),
            });
        }
    }
    Ok(())
}

/// Ensemble snapshot at one time.
#[derive(Debug, Clone)]
pub struct PathStateBatch {
    pub t: f64,
    pub states: Vec<f64>,
}

fn prior_draw(dim: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<StreamRng>) {
    let mut rngs: Vec<StreamRng> = (0..n as u64).map(|i| rng::stream(seed, i)).collect();
    let mut states = vec![0.0; n * dim];
    for (x, r) in states.chunks_exact_mut(dim).zip(rngs.iter_mut()) {
        rng::fill_normal(r, x);
    }
    (states, rngs)
}

/// Draw `n` samples: `x(T) ~ N(0, I)` integrated back to `t_min`.
/// Member `i` uses `rng::stream(seed, i)` for its prior draw and noise.
pub fn reverse_sde_ensemble<P: ScoreProvider + ?Sized>(
    provider: &P,
    schedule: &NoiseSchedule,
    cfg: &ReverseConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate(schedule)?;
    let (mut states, mut rngs) = prior_draw(provider.dim(), n, seed);
    if n > 0 {
        integrate_reverse(
            provider,
            schedule,
            schedule.horizon,
            cfg.t_min,
            cfg.steps,
            &mut states,
            &mut rngs,
            None,
        )?;
    }
    Ok(states)
}

pub fn reverse_sde_sample<P: ScoreProvider + ?Sized>(
    provider: &P,
    schedule: &NoiseSchedule,
    cfg: &ReverseConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    reverse_sde_ensemble(provider, schedule, cfg, 1, seed)
}

/// Same as [`reverse_sde_sample`] but keeps every intermediate state,
/// starting with the prior draw at `t = T`.
pub fn reverse_sde_trajectory<P: ScoreProvider + ?Sized>(
    provider: &P,
    schedule: &NoiseSchedule,
    cfg: &ReverseConfig,
    seed: u64,
) -> Result<Vec<PathState>> {
    cfg.validate(schedule)?;
    let (mut states, mut rngs) = prior_draw(provider.dim(), 1, seed);
    let mut rec = vec![PathStateBatch {
        t: schedule.horizon,
        states: states.clone(),
    }];
    integrate_reverse(
        provider,
        schedule,
        schedule.horizon,
        cfg.t_min,
        cfg.steps,
        &mut states,
        &mut rngs,
        Some(&mut rec),
    )?;
    Ok(rec
        .into_iter()
        .map(|b| PathState { t: b.t, x: b.states })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{Dataset, MixtureMarginal};
    use approx::assert_relative_eq;

    struct Zero(usize);
    impl ScoreProvider for Zero {
        fn dim(&self) -> usize {
            self.0
        }
        fn score(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> Result<()> {
            out.fill(0.0);
            Ok(())
        }
    }

    /// Exact score of N(0, I) at every time: psi = x.
    struct StdNormal(usize);
    impl ScoreProvider for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn score(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
            out.copy_from_slice(x);
            Ok(())
        }
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn forward_step_arithmetic() {
        let s = NoiseSchedule::constant(1.0, 1.0).unwrap();
        let st = PathState { t: 0.2, x: vec![0.0, 0.0] };
        assert_eq!(forward_ou_step(&st, &s, 0.1, &[0.0, 0.0]).unwrap().x, vec![0.0, 0.0]);
        let st = PathState { t: 0.0, x: vec![1.0] };
        let next = forward_ou_step(&st, &s, 0.01, &[0.0]).unwrap();
        assert_relative_eq!(next.x[0], 0.995, epsilon = 1e-15);
        assert_relative_eq!(next.t, 0.01);
        assert!(forward_ou_step(&st, &s, 2.0, &[0.0]).is_err());
    }

    #[test]
    fn forward_statistics_match_closed_form() {
        let s = NoiseSchedule::constant(1.0, 2.0).unwrap();
        let n = 100_000;
        let starts = vec![2.0; n];
        let t = 2.0 * std::f64::consts::LN_2;
        let out = simulate_forward(&s, 1, &starts, &[t], 5e-3, 3).unwrap();
        let (m, v) = moments(&out[0]);
        let se_m = (0.75 / n as f64).sqrt();
        let se_v = 0.75 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se_m, "mean {m}");
        assert!((v - 0.75).abs() < 3.0 * se_v, "var {v}");
    }

    #[test]
    fn single_sample_collapses() {
        let c = 0.7;
        let m = MixtureMarginal::new(NoiseSchedule::default(), Dataset::new(1, vec![c], "c").unwrap());
        let out = reverse_sde_ensemble(&m, m.schedule(), &ReverseConfig::default(), 1000, 5).unwrap();
        let (mean, var) = moments(&out);
        assert!((mean - c).abs() < 3.0 * (var / 1000.0).sqrt() + 1e-3, "mean {mean}");
        assert!(var < 0.02);
    }

    #[test]
    fn stationary_score_preserves_standard_normal() {
        let s = NoiseSchedule::constant(1.0, 3.0).unwrap();
        let out = reverse_sde_ensemble(&StdNormal(2), &s, &ReverseConfig { steps: 600, t_min: 1e-3 }, 20_000, 9).unwrap();
        let (m, v) = moments(&out);
        assert!(m.abs() < 3.0 * (1.0 / 40_000f64).sqrt());
        assert!((v - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn zero_score_inflates_variance() {
        // With psi = 0 the reverse dynamics solve dv/ds = beta (v + 1),
        // so v = 2 e^B - 1 after integrating B from a unit-variance start.
        let s = NoiseSchedule::constant(1.0, 0.5).unwrap();
        let cfg = ReverseConfig { steps: 2000, t_min: 1e-6 };
        let out = reverse_sde_ensemble(&Zero(1), &s, &cfg, 40_000, 4).unwrap();
        let (_, v) = moments(&out);
        let expect = 2.0 * (0.5f64 - 1e-6).exp() - 1.0;
        assert!((v - expect).abs() < 0.03 * expect, "var {v} vs {expect}");
    }

    #[test]
    fn symmetric_pair_balanced() {
        let m = MixtureMarginal::new(NoiseSchedule::default(), Dataset::new(1, vec![-1.0, 1.0], "pm").unwrap());
        let n = 4000;
        let out = reverse_sde_ensemble(&m, m.schedule(), &ReverseConfig { steps: 300, t_min: 1e-3 }, n, 17).unwrap();
        let frac = out.iter().filter(|x| **x > 0.0).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "frac {frac}");
    }

    #[test]
    fn deterministic_under_seed() {
        let m = MixtureMarginal::new(NoiseSchedule::default(), Dataset::new(2, vec![1.0, 0.0, -1.0, 0.5], "x").unwrap());
        let cfg = ReverseConfig { steps: 50, t_min: 1e-3 };
        let a = reverse_sde_ensemble(&m, m.schedule(), &cfg, 16, 1).unwrap();
        let b = reverse_sde_ensemble(&m, m.schedule(), &cfg, 16, 1).unwrap();
        assert_eq!(a, b);
        let single = reverse_sde_sample(&m, m.schedule(), &cfg, 1).unwrap();
        assert_eq!(&a[..2], &single[..]);
        let traj = reverse_sde_trajectory(&m, m.schedule(), &cfg, 1).unwrap();
        assert_eq!(traj.len(), 51);
        assert_eq!(traj.last().unwrap().x, single);
    }
}
