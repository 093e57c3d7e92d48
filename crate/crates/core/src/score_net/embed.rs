use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinusoidal features of the diffusion time. Frequencies are geometric,
/// `omega_k = (2 pi / base_period) * sqrt(2)^k`, so the slowest pair has
/// period `base_period` and the fastest is `2^((n-1)/2)` times quicker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeEmbedding {
    pub n_frequencies: usize,
    pub base_period: f64,
}

impl Default for TimeEmbedding {
    fn default() -> Self {
        Self {
            n_frequencies: 16,
            base_period: 20.0,
        }
    }
}

impl TimeEmbedding {
    pub fn validate(&self) -> Result<()> {
        if self.n_frequencies == 0 {
            return Err(Error::config("n_frequencies", "must be >= 1"));
        }
        if !(self.base_period > 0.0) {
            return Err(Error::config("base_period", "must be > 0"));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        2 * self.n_frequencies
    }

    pub fn frequency(&self, k: usize) -> f64 {
        2.0 * PI / self.base_period * SQRT_2.powi(k as i32)
    }

    /// `[sin(omega_0 t), .., sin(omega_{n-1} t), cos(omega_0 t), ..]`.
    pub fn embed_into(&self, t: f64, out: &mut [f64]) {
        let n = self.n_frequencies;
        for k in 0..n {
            let (s, c) = (self.frequency(k) * t).sin_cos();
            out[k] = s;
            out[n + k] = c;
        }
    }

    pub fn embed(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.embed_into(t, &mut out);
        out
    }
}
