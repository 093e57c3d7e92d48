//! Two-particle advection-diffusion, hitting times and the pair-correlation
//! estimate `chi(0) E[T(r -> L)]`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{flow_velocity, FlowState, SyntheticFlow};
use crate::error::{Error, Result};
use crate::{io, rng};

const DIMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub rho1: [f64; 2],
    pub rho2: [f64; 2],
    pub t: f64,
}

impl PairState {
    pub fn separation(&self) -> f64 {
        (self.rho1[0] - self.rho2[0]).hypot(self.rho1[1] - self.rho2[1])
    }
}

/// Euler-Maruyama step `d rho_i = v(rho_i) dt + sqrt(2 kappa) dW_i` with
/// `noise` holding four independent standard normals.
pub fn advance_pair(
    pair: &PairState,
    flow: &SyntheticFlow,
    state: &FlowState,
    kappa: f64,
    dt: f64,
    noise: &[f64; 4],
) -> PairState {
    let v1 = flow_velocity(flow, state, pair.rho1);
    let v2 = flow_velocity(flow, state, pair.rho2);
    let s = (2.0 * kappa * dt).sqrt();
    PairState {
        rho1: [
            pair.rho1[0] + v1[0] * dt + s * noise[0],
            pair.rho1[1] + v1[1] * dt + s * noise[1],
        ],
        rho2: [
            pair.rho2[0] + v2[0] * dt + s * noise[2],
            pair.rho2[1] + v2[1] * dt + s * noise[3],
        ],
        t: pair.t + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    GrowTo,
    ShrinkTo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HittingOutcome {
    Hit(f64),
    Timeout,
}

impl HittingOutcome {
    pub fn time(&self) -> Option<f64> {
        match self {
            HittingOutcome::Hit(t) => Some(*t),
            HittingOutcome::Timeout => None,
        }
    }
}

/// A pair at separation `r0`, random orientation and a random position in
/// the flow's largest-wavelength cell, with a fresh stationary flow state.
fn start_member<R: Rng + ?Sized>(flow: &SyntheticFlow, r0: f64, r: &mut R) -> (PairState, FlowState) {
    let k = flow.k_min();
    let cell = if k.is_finite() && k > 0.0 { 2.0 * std::f64::consts::PI / k } else { 1.0 };
    let c = [r.gen_range(0.0..cell), r.gen_range(0.0..cell)];
    let th = r.gen_range(0.0..2.0 * std::f64::consts::PI);
    let half = [0.5 * r0 * th.cos(), 0.5 * r0 * th.sin()];
    let pair = PairState {
        rho1: [c[0] + half[0], c[1] + half[1]],
        rho2: [c[0] - half[0], c[1] - half[1]],
        t: 0.0,
    };
    (pair, flow.initial_state(r))
}

fn crossed(sep: f64, target: f64, dir: Direction) -> bool {
    match dir {
        Direction::GrowTo => sep >= target,
        Direction::ShrinkTo => sep <= target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingSpec {
    pub r0: f64,
    pub target: f64,
    pub kappa: f64,
    pub dt: f64,
    pub max_t: f64,
    pub direction: Direction,
}

impl HittingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 >= 0.0 && self.target > 0.0) {
            return Err(Error::Argument("separations must be >= 0 and target > 0".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Argument(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.dt > 0.0 && self.max_t > 0.0) {
            return Err(Error::Argument("dt and max_t must be > 0".into()));
        }
        Ok(())
    }
}

/// First time the separation crosses `target`; member `index` uses stream
/// `index` of `seed`.
pub fn hitting_time(spec: &HittingSpec, flow: &SyntheticFlow, seed: u64, index: u64) -> Result<HittingOutcome> {
    spec.validate()?;
    // decided on r0 itself: the placed pair's separation can be off by an ulp
    if crossed(spec.r0, spec.target, spec.direction) {
        return Ok(HittingOutcome::Hit(0.0));
    }
    let mut r = rng::stream(seed, index);
    let (mut pair, mut state) = start_member(flow, spec.r0, &mut r);
    let n_max = (spec.max_t / spec.dt).ceil() as u64;
    let mut z = [0.0; 4];
    for step in 1..=n_max {
        rng::fill_normal(&mut r, &mut z);
        pair = advance_pair(&pair, flow, &state, spec.kappa, spec.dt, &z);
        flow.advance(&mut state, spec.dt, &mut r);
        if crossed(pair.separation(), spec.target, spec.direction) {
            return Ok(HittingOutcome::Hit(step as f64 * spec.dt));
        }
    }
    Ok(HittingOutcome::Timeout)
}

/// Default time limit: `100 L^2 / (4 kappa dims)` with diffusion, otherwise
/// `1000` eddy turnover times `1 / (u_rms k_min)`.
pub fn default_max_t(target: f64, kappa: f64, flow: &SyntheticFlow) -> f64 {
    if kappa > 0.0 {
        100.0 * target * target / (4.0 * kappa * DIMS as f64)
    } else {
        let u = flow.rms_velocity();
        let k = flow.k_min();
        if u > 0.0 && k.is_finite() {
            1e3 / (u * k)
        } else {
            1e3
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSpec {
    pub corr_scale_l: f64,
    pub chi0: f64,
}

impl ChiSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.corr_scale_l > 0.0) {
            return Err(Error::config("corr_scale_l", "must be > 0"));
        }
        if !(self.chi0 >= 0.0) {
            return Err(Error::config("chi0", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelationEstimate {
    pub r_sep: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub mean_hitting_time: f64,
    pub n_pairs: usize,
    pub n_timeout: usize,
    /// More than half of the pairs timed out.
    pub unreliable: bool,
    #[serde(skip)]
    pub hitting_times: Vec<HittingOutcome>,
}

impl PairCorrelationEstimate {
    pub fn hitting_times_csv(&self, max_t: f64) -> String {
        let mut s = String::from("pair,time,timeout\n");
        for (i, h) in self.hitting_times.iter().enumerate() {
            let (t, to) = match h {
                HittingOutcome::Hit(t) => (*t, 0),
                HittingOutcome::Timeout => (max_t, 1),
            };
            let _ = writeln!(s, "{i},{t:e},{to}");
        }
        s
    }

    pub fn write_hitting_times(&self, path: &Path, max_t: f64) -> Result<()> {
        io::write_text(path, &self.hitting_times_csv(max_t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kappa: f64,
    pub chi: ChiSpec,
    pub ensemble_n: usize,
    pub dt: f64,
    /// Defaults to [`default_max_t`].
    #[serde(default)]
    pub max_t: Option<f64>,
}

/// `chi0 E[T(r_sep -> L)]` over `ensemble_n` pairs. Pairs that time out
/// contribute `max_t`, which biases the estimate low; the count is reported.
pub fn pair_correlation_estimate(
    flow: &SyntheticFlow,
    ens: &EnsembleSpec,
    r_sep: f64,
    seed: u64,
) -> Result<PairCorrelationEstimate> {
    let EnsembleSpec {
        kappa,
        ref chi,
        ensemble_n,
        dt,
        max_t,
    } = *ens;
    chi.validate()?;
    if !(r_sep >= 0.0 && r_sep <= chi.corr_scale_l) {
        return Err(Error::Argument(format!(
            "r_sep = {r_sep} must lie in [0, L = {}]",
            chi.corr_scale_l
        )));
    }
    if ensemble_n == 0 {
        return Err(Error::Argument("ensemble_n must be >= 1".into()));
    }
    let max_t = max_t.unwrap_or_else(|| default_max_t(chi.corr_scale_l, kappa, flow));
    let spec = HittingSpec {
        r0: r_sep,
        target: chi.corr_scale_l,
        kappa,
        dt,
        max_t,
        direction: Direction::GrowTo,
    };
    spec.validate()?;
    let outcomes: Vec<HittingOutcome> = (0..ensemble_n as u64)
        .into_par_iter()
        .map(|i| hitting_time(&spec, flow, seed, i))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = outcomes.iter().map(|o| o.time().unwrap_or(max_t)).collect();
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = if times.len() > 1 {
        times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let n_timeout = outcomes.iter().filter(|o| o.time().is_none()).count();
    Ok(PairCorrelationEstimate {
        r_sep,
        estimate: chi.chi0 * mean,
        stderr: chi.chi0 * (var / n).sqrt(),
        mean_hitting_time: mean,
        n_pairs: ensemble_n,
        n_timeout,
        unreliable: 2 * n_timeout > ensemble_n,
        hitting_times: outcomes,
    })
}

/// Mean of `|r1 - r2|^2 - r0^2` after each of `n_steps` steps over
/// `n_pairs` independent pairs started at separation `r0`.
pub fn separation_growth(
    flow: &SyntheticFlow,
    kappa: f64,
    r0: f64,
    dt: f64,
    n_steps: usize,
    n_pairs: usize,
    seed: u64,
) -> Vec<f64> {
    let per: Vec<Vec<f64>> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let (mut pair, mut state) = start_member(flow, r0, &mut r);
            let d0 = pair.separation().powi(2);
            let mut z = [0.0; 4];
            (0..n_steps)
                .map(|_| {
                    rng::fill_normal(&mut r, &mut z);
                    pair = advance_pair(&pair, flow, &state, kappa, dt, &z);
                    flow.advance(&mut state, dt, &mut r);
                    pair.separation().powi(2) - d0
                })
                .collect()
        })
        .collect();
    let mut mean = vec![0.0; n_steps];
    for row in &per {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_pairs as f64);
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::flow::FlowMode;

    #[test]
    fn frozen_without_flow_or_diffusion() {
        let p = PairState {
            rho1: [0.1, 0.2],
            rho2: [0.3, -0.4],
            t: 0.0,
        };
        let flow = SyntheticFlow::zero();
        let st = FlowState { a: vec![], b: vec![] };
        let q = advance_pair(&p, &flow, &st, 0.0, 0.1, &[1.0, -2.0, 0.5, 0.3]);
        assert_eq!(q.rho1, p.rho1);
        assert_eq!(q.rho2, p.rho2);
        assert!((q.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn already_at_target() {
        let spec = HittingSpec {
            r0: 0.5,
            target: 0.5,
            kappa: 0.1,
            dt: 0.01,
            max_t: 1.0,
            direction: Direction::GrowTo,
        };
        assert_eq!(hitting_time(&spec, &SyntheticFlow::zero(), 0, 0).unwrap(), HittingOutcome::Hit(0.0));
    }

    #[test]
    fn closed_orbit_times_out() {
        // Frozen cellular flow without diffusion: both particles circle on
        // closed streamlines of one cell, so their separation stays bounded.
        let flow = SyntheticFlow {
            modes: vec![
                FlowMode { k: [1.0, -1.0], amplitude: 0.5 },
                FlowMode { k: [1.0, 1.0], amplitude: 0.5 },
            ],
            correlation_time: None,
        };
        let st = FlowState {
            a: vec![1.0, -1.0],
            b: vec![0.0, 0.0],
        };
        let mut pair = PairState {
            rho1: [1.2, 1.4],
            rho2: [1.6, 1.5],
            t: 0.0,
        };
        let mut max_sep: f64 = 0.0;
        for _ in 0..20_000 {
            pair = advance_pair(&pair, &flow, &st, 0.0, 1e-3, &[0.0; 4]);
            max_sep = max_sep.max(pair.separation());
        }
        // the cell is [0, pi]^2, so the separation never reaches its diagonal
        assert!(max_sep < std::f64::consts::PI * 2f64.sqrt());
    }

    #[test]
    fn diffusion_mean_exit_time() {
        // relative motion is Brownian with diffusivity 2 kappa, so
        // E[T] = (L^2 - r0^2) / (4 kappa dims)
        let chi = ChiSpec {
            corr_scale_l: 1.0,
            chi0: 1.0,
        };
        let kappa = 0.05;
        let ens = EnsembleSpec {
            kappa,
            chi,
            ensemble_n: 4000,
            dt: 1e-3,
            max_t: None,
        };
        let est = pair_correlation_estimate(&SyntheticFlow::zero(), &ens, 0.2, 1).unwrap();
        let expect = (1.0 - 0.04) / (8.0 * kappa);
        assert_eq!(est.n_timeout, 0);
        assert!((est.mean_hitting_time / expect - 1.0).abs() < 0.1, "{} vs {expect}", est.mean_hitting_time);
    }

    #[test]
    fn estimate_scales_with_chi0_and_is_seeded() {
        let flow = SyntheticFlow::zero();
        let a = ChiSpec {
            corr_scale_l: 1.0,
            chi0: 1.5,
        };
        let b = ChiSpec { chi0: 3.0, ..a };
        let ens = |chi| EnsembleSpec {
            kappa: 0.1,
            chi,
            ensemble_n: 200,
            dt: 1e-2,
            max_t: None,
        };
        let ea = pair_correlation_estimate(&flow, &ens(a), 0.5, 3).unwrap();
        let eb = pair_correlation_estimate(&flow, &ens(b), 0.5, 3).unwrap();
        assert_eq!(eb.estimate, 2.0 * ea.estimate);
        assert_eq!(ea.hitting_times, eb.hitting_times);
        let at_l = pair_correlation_estimate(&flow, &ens(a), 1.0, 3).unwrap();
        assert_eq!(at_l.estimate, 0.0);
        assert!(pair_correlation_estimate(&flow, &ens(a), 1.5, 3).is_err());
    }

    #[test]
    fn diffusive_growth_rate() {
        let g = separation_growth(&SyntheticFlow::zero(), 0.1, 0.0, 0.01, 10, 2000, 5);
        assert_eq!(g.len(), 10);
        let slope = g[9] / (10.0 * 0.01);
        assert!((slope / (4.0 * 0.1 * 2.0) - 1.0).abs() < 0.1);
    }

    #[test]
    fn common_velocity_cancels_in_separation() {
        let flow = SyntheticFlow {
            modes: vec![FlowMode { k: [0.0, 1.0], amplitude: 0.8 }],
            correlation_time: None,
        };
        let st = FlowState { a: vec![0.3], b: vec![1.1] };
        // both particles on the same line y = const see the same velocity
        let p = PairState {
            rho1: [0.2, 0.7],
            rho2: [1.9, 0.7],
            t: 0.0,
        };
        let z = [0.4, -0.2, 0.1, 0.3];
        let moved = advance_pair(&p, &flow, &st, 0.05, 0.01, &z);
        let still = advance_pair(&p, &SyntheticFlow::zero(), &FlowState { a: vec![], b: vec![] }, 0.05, 0.01, &z);
        assert!((moved.separation() - still.separation()).abs() < 1e-14);
    }
}
