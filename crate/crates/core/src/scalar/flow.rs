//! Synthetic incompressible 2D velocity fields built from a random-Fourier
//! streamfunction `psi = sum_m A_m [a_m cos(k_m.x) + b_m sin(k_m.x)]`,
//! with the coefficients `a_m, b_m` stationary OU processes in time.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMode {
    pub k: [f64; 2],
    /// Streamfunction amplitude.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFlowConfig {
    pub n_modes: usize,
    pub k_min: f64,
    pub k_max: f64,
    /// Velocity amplitude of a mode scales like `|k|^(-xi/2)`.
    #[serde(default = "default_xi")]
    pub spectrum_exponent: f64,
    /// OU correlation time of the coefficients; `None` freezes the flow.
    pub correlation_time: Option<f64>,
    pub rms_velocity: f64,
}

fn default_xi() -> f64 {
    4.0
}

impl SyntheticFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::config("n_modes", "must be >= 1"));
        }
        if !(self.k_min > 0.0 && self.k_max >= self.k_min) {
            return Err(Error::config("k_min", "need 0 < k_min <= k_max"));
        }
        if self.correlation_time.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("correlation_time", "must be > 0"));
        }
        if !(self.rms_velocity >= 0.0) {
            return Err(Error::config("rms_velocity", "must be >= 0"));
        }
        Ok(())
    }
}

/// The fixed part of a flow: wavevectors, amplitudes and correlation time.
/// The time-dependent coefficients live in [`FlowState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFlow {
    pub modes: Vec<FlowMode>,
    pub correlation_time: Option<f64>,
}

/// OU coefficients of one flow realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SyntheticFlow {
    /// Wavenumber magnitudes geometric between `k_min` and `k_max`,
    /// directions uniform, amplitudes set so `E|v|^2 = rms_velocity^2`.
    pub fn generate(cfg: &SyntheticFlowConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(seed, u64::MAX);
        let n = cfg.n_modes;
        let mut modes = Vec::with_capacity(n);
        for m in 0..n {
            let frac = if n > 1 { m as f64 / (n - 1) as f64 } else { 0.0 };
            let k = cfg.k_min * (cfg.k_max / cfg.k_min).powf(frac);
            let theta = r.gen_range(0.0..PI);
            let vel_amp = k.powf(-cfg.spectrum_exponent / 2.0);
            modes.push(FlowMode {
                k: [k * theta.cos(), k * theta.sin()],
                amplitude: vel_amp / k,
            });
        }
        // each mode contributes A^2 |k|^2 to E|v|^2
        let total: f64 = modes.iter().map(|m| m.amplitude.powi(2) * (m.k[0].powi(2) + m.k[1].powi(2))).sum();
        let scale = if total > 0.0 { cfg.rms_velocity / total.sqrt() } else { 0.0 };
        for m in &mut modes {
            m.amplitude *= scale;
        }
        Ok(Self {
            modes,
            correlation_time: cfg.correlation_time,
        })
    }

    pub fn zero() -> Self {
        Self {
            modes: Vec::new(),
            correlation_time: None,
        }
    }

    /// Draw coefficients from the stationary distribution `N(0, 1)`.
    pub fn initial_state<R: Rng + ?Sized>(&self, r: &mut R) -> FlowState {
        let n = self.modes.len();
        let mut s = FlowState {
            a: vec![0.0; n],
            b: vec![0.0; n],
        };
        rng::fill_normal(r, &mut s.a);
        rng::fill_normal(r, &mut s.b);
        s
    }

    pub fn advance<R: Rng + ?Sized>(&self, state: &mut FlowState, dt: f64, r: &mut R) {
        let Some(tau) = self.correlation_time else {
            return;
        };
        let rho = (-dt / tau).exp();
        let s = (1.0 - rho * rho).sqrt();
        for (a, b) in state.a.iter_mut().zip(state.b.iter_mut()) {
            *a = rho * *a + s * rng::normal(r);
            *b = rho * *b + s * rng::normal(r);
        }
    }

    /// Largest `|k|`, zero for the zero flow.
    pub fn k_max(&self) -> f64 {
        self.modes.iter().map(|m| m.k[0].hypot(m.k[1])).fold(0.0, f64::max)
    }

    pub fn k_min(&self) -> f64 {
        self.modes.iter().map(|m| m.k[0].hypot(m.k[1])).fold(f64::INFINITY, f64::min)
    }

    pub fn rms_velocity(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude.powi(2) * (m.k[0].powi(2) + m.k[1].powi(2)))
            .sum::<f64>()
            .sqrt()
    }
}

/// `v = (d psi/dy, -d psi/dx)`, divergence-free by construction.
pub fn flow_velocity(flow: &SyntheticFlow, state: &FlowState, r: [f64; 2]) -> [f64; 2] {
    let mut v = [0.0; 2];
    for ((m, a), b) in flow.modes.iter().zip(&state.a).zip(&state.b) {
        let (s, c) = (m.k[0] * r[0] + m.k[1] * r[1]).sin_cos();
        // d/dx_j of [a cos + b sin] = k_j (b cos - a sin)
        let g = m.amplitude * (b * c - a * s);
        v[0] += g * m.k[1];
        v[1] -= g * m.k[0];
    }
    v
}
