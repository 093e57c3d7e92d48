use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do when `dt` exceeds the CFL limit `0.25 h / (c + |v|_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CflPolicy {
    #[default]
    Warn,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphParams {
    pub n_particles: usize,
    pub mass: f64,
    pub h: f64,
    pub rho0: f64,
    pub sound_c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha_visc: f64,
    #[serde(default = "default_beta")]
    pub beta_visc: f64,
    pub box_l: f64,
    pub dt: f64,
    pub dims: usize,
    #[serde(default)]
    pub cfl_policy: CflPolicy,
}

fn default_gamma() -> f64 {
    7.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    2.0
}

impl SphParams {
    /// A periodic lattice of `per_side^dims` particles with mass set so the
    /// mean density is `rho0`, and `h = h_factor * spacing`.
    pub fn lattice(dims: usize, per_side: usize, box_l: f64, h_factor: f64, sound_c: f64) -> Self {
        let n = per_side.pow(dims as u32);
        let spacing = box_l / per_side as f64;
        let rho0 = 1.0;
        Self {
            n_particles: n,
            mass: rho0 * box_l.powi(dims as i32) / n as f64,
            h: h_factor * spacing,
            rho0,
            sound_c,
            gamma: default_gamma(),
            alpha_visc: default_alpha(),
            beta_visc: default_beta(),
            box_l,
            dt: 0.2 * h_factor * spacing / sound_c,
            dims,
            cfl_policy: CflPolicy::Warn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dims == 2 || self.dims == 3) {
            return Err(Error::config("dims", "must be 2 or 3"));
        }
        if self.n_particles == 0 {
            return Err(Error::config("n_particles", "must be >= 1"));
        }
        if !(self.h > 0.0) {
            return Err(Error::config("h", "must be > 0"));
        }
        if !(self.box_l > 4.0 * self.h) {
            return Err(Error::config("box_l", "must exceed 4h"));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::config("gamma", "must be >= 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be > 0"));
        }
        for (name, v) in [("mass", self.mass), ("rho0", self.rho0), ("sound_c", self.sound_c)] {
            if !(v > 0.0) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if !(self.alpha_visc >= 0.0 && self.beta_visc >= 0.0) {
            return Err(Error::config("alpha_visc", "viscosity coefficients must be >= 0"));
        }
        Ok(())
    }

    pub fn cfl_limit(&self, v_max: f64) -> f64 {
        0.25 * self.h / (self.sound_c + v_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    #[default]
    None,
    /// Steady cellular body force at the box scale.
    TaylorGreen,
    /// Sum of low-wavenumber solenoidal modes with OU-in-time coefficients.
    Stochastic,
    /// Constant acceleration `amplitude` along the first axis.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub kind: ForcingKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_kmax")]
    pub k_max_forced: usize,
    #[serde(default = "default_tau")]
    pub ou_correlation_time: f64,
}

fn default_kmax() -> usize {
    2
}
fn default_tau() -> f64 {
    1.0
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl ForcingSpec {
    pub fn none() -> Self {
        Self {
            kind: ForcingKind::None,
            amplitude: 0.0,
            k_max_forced: default_kmax(),
            ou_correlation_time: default_tau(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::config("amplitude", "must be >= 0"));
        }
        if self.kind == ForcingKind::Stochastic {
            if self.k_max_forced == 0 {
                return Err(Error::config("k_max_forced", "must be >= 1"));
            }
            if !(self.ou_correlation_time > 0.0) {
                return Err(Error::config("ou_correlation_time", "must be > 0"));
            }
        }
        Ok(())
    }
}
