use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Linear,
}

/// Noise rate `beta(t)` on `[0, horizon]` and its integral `B(t)`.
///
/// The constant kind uses `beta_min` as its rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub horizon: f64,
    pub kind: ScheduleKind,
}

// Slack for time grids accumulated by repeated addition.
const T_SLACK: f64 = 1e-12;

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 20.0,
            horizon: 1.0,
            kind: ScheduleKind::Linear,
        }
    }
}

impl NoiseSchedule {
    pub fn constant(beta: f64, horizon: f64) -> Result<Self> {
        Self {
            beta_min: beta,
            beta_max: beta,
            horizon,
            kind: ScheduleKind::Constant,
        }
        .validated()
    }

    pub fn linear(beta_min: f64, beta_max: f64, horizon: f64) -> Result<Self> {
        Self {
            beta_min,
            beta_max,
            horizon,
            kind: ScheduleKind::Linear,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.horizon) {
            return Err(Error::config("horizon", "must be finite and > 0"));
        }
        if !ok(self.beta_min) {
            return Err(Error::config("beta_min", "must be finite and > 0"));
        }
        if self.kind == ScheduleKind::Linear && !ok(self.beta_max) {
            return Err(Error::config("beta_max", "must be finite and > 0"));
        }
        Ok(self)
    }

    fn check(&self, t: f64) -> Result<f64> {
        let slack = T_SLACK * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        Ok(t.clamp(0.0, self.horizon))
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        Ok(match self.kind {
            ScheduleKind::Constant => self.beta_min,
            ScheduleKind::Linear => {
                self.beta_min + (self.beta_max - self.beta_min) * t / self.horizon
            }
        })
    }

    /// `B(t)`, the integral of `beta` from 0 to `t`, in closed form.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        Ok(match self.kind {
            ScheduleKind::Constant => self.beta_min * t,
            ScheduleKind::Linear => {
                self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t / self.horizon
            }
        })
    }

    /// Mean shrink factor `exp(-B/2)` of the forward marginal.
    pub fn shrink(&self, t: f64) -> Result<f64> {
        Ok((-0.5 * self.integral(t)?).exp())
    }

    /// Per-coordinate variance `1 - exp(-B)` of the forward marginal.
    pub fn variance(&self, t: f64) -> Result<f64> {
        Ok(-(-self.integral(t)?).exp_m1())
    }
}
