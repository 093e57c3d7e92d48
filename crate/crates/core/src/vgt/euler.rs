//! Restricted-Euler dynamics `dM/dt = -(M^2 - I tr(M^2)/3)`.

use serde::{Deserialize, Serialize};

use super::tensor::{q_r, Mat3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReIntegrator {
    Euler,
    #[default]
    Rk4,
}

pub fn restricted_euler_rhs(m: &Mat3) -> Mat3 {
    let m2 = m * m;
    -(m2 - Mat3::identity() * (m2.trace() / 3.0))
}

fn check_traceless(m: &Mat3) -> Result<()> {
    let scale = m.norm().max(1.0);
    if !(m.trace().abs() <= 1e-8 * scale) {
        return Err(Error::Argument(format!("M must be traceless, tr M = {:e}", m.trace())));
    }
    Ok(())
}

fn advance(m: &Mat3, dt: f64, integrator: ReIntegrator) -> Mat3 {
    match integrator {
        ReIntegrator::Euler => m + restricted_euler_rhs(m) * dt,
        ReIntegrator::Rk4 => {
            let k1 = restricted_euler_rhs(m);
            let k2 = restricted_euler_rhs(&(m + k1 * (0.5 * dt)));
            let k3 = restricted_euler_rhs(&(m + k2 * (0.5 * dt)));
            let k4 = restricted_euler_rhs(&(m + k3 * dt));
            m + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
        }
    }
}

pub fn restricted_euler_step(m: &Mat3, dt: f64, integrator: ReIntegrator) -> Result<Mat3> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be > 0, got {dt}")));
    }
    check_traceless(m)?;
    Ok(advance(m, dt, integrator))
}

/// `Q^3 + (27/4) R^2`, conserved by the dynamics; zero on the Vieillefosse line.
pub fn vieillefosse(m: &Mat3) -> f64 {
    let (q, r) = q_r(m);
    q * q * q + 6.75 * r * r
}

/// Magnitude of the two terms of [`vieillefosse`], the scale its drift is
/// measured against (the invariant itself vanishes on the Vieillefosse line).
pub fn vieillefosse_scale(m: &Mat3) -> f64 {
    let (q, r) = q_r(m);
    (q * q * q).abs().max(6.75 * r * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub t: f64,
    pub step: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReTrajectory {
    /// `(t, M)` every `record_every` steps, starting with the initial state.
    pub samples: Vec<(f64, Mat3)>,
    pub final_state: Mat3,
    pub t_final: f64,
    /// Set when the Frobenius norm first exceeds the bound.
    pub blowup: Option<BlowUp>,
    /// Largest `|V(t) - V(0)| / max(scale(0), scale(t))` seen, `V` the
    /// Vieillefosse invariant.
    pub max_invariant_drift: f64,
    pub max_abs_trace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub integrator: ReIntegrator,
    #[serde(default = "default_bound")]
    pub blowup_norm: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
}

fn default_bound() -> f64 {
    1e3
}
fn default_record() -> usize {
    100
}

impl Default for ReConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_max: 10.0,
            integrator: ReIntegrator::Rk4,
            blowup_norm: default_bound(),
            record_every: default_record(),
        }
    }
}

impl ReConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be > 0"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("t_max", "must be > 0"));
        }
        if !(self.blowup_norm > 0.0) {
            return Err(Error::config("blowup_norm", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every", "must be >= 1"));
        }
        Ok(())
    }
}

/// Integrate from `m0` until `t_max` or until `|M|_F > blowup_norm`, which
/// is reported as a singularity event rather than an error. Invariant
/// drift is tracked only while the bound holds.
pub fn integrate_restricted_euler(m0: &Mat3, cfg: &ReConfig) -> Result<ReTrajectory> {
    cfg.validate()?;
    check_traceless(m0)?;
    let n_steps = (cfg.t_max / cfg.dt).round() as usize;
    let v0 = vieillefosse(m0);
    let s0 = vieillefosse_scale(m0);
    let mut m = *m0;
    let mut out = ReTrajectory {
        samples: vec![(0.0, m)],
        final_state: m,
        t_final: 0.0,
        blowup: None,
        max_invariant_drift: 0.0,
        max_abs_trace: m.trace().abs(),
    };
    for step in 1..=n_steps {
        m = advance(&m, cfg.dt, cfg.integrator);
        let t = step as f64 * cfg.dt;
        let norm = m.norm();
        if !norm.is_finite() || norm > cfg.blowup_norm {
            out.blowup = Some(BlowUp { t, step, norm });
            out.final_state = m;
            out.t_final = t;
            return Ok(out);
        }
        let scale = s0.max(vieillefosse_scale(&m));
        if scale > 0.0 {
            out.max_invariant_drift = out.max_invariant_drift.max((vieillefosse(&m) - v0).abs() / scale);
        }
        out.max_abs_trace = out.max_abs_trace.max(m.trace().abs());
        if step % cfg.record_every == 0 {
            out.samples.push((t, m));
        }
    }
    out.final_state = m;
    out.t_final = n_steps as f64 * cfg.dt;
    Ok(out)
}
