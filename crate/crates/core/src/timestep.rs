//! Logit-normal training-timestep density and sampler.
//!
//! A timestep is `t = sigmoid(u)` with `u ~ Normal(m, s)`. The scale `s`
//! controls how tightly mass concentrates around mid-path timesteps and the
//! location `m` biases sampling toward the data side (`m < 0`) or the noise
//! side (`m > 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::SeededRng;

const ENDPOINT_GUARD: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitNormalParams {
    pub m: f64,
    pub s: f64,
}

impl Default for LogitNormalParams {
    fn default() -> Self {
        Self { m: 0.0, s: 1.0 }
    }
}

impl LogitNormalParams {
    pub fn new(m: f64, s: f64) -> Result<Self> {
        let p = Self { m, s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) || !self.s.is_finite() || !self.m.is_finite() {
            return Err(Error::Parameter(format!(
                "logit-normal needs finite m and s > 0, got m={} s={}",
                self.m, self.s
            )));
        }
        Ok(())
    }
}

/// Timestep distribution used during training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimestepSchedule {
    LogitNormal {
        m: f64,
        s: f64,
    },
    /// Ablation baseline.
    Uniform,
}

impl Default for TimestepSchedule {
    fn default() -> Self {
        let p = LogitNormalParams::default();
        TimestepSchedule::LogitNormal { m: p.m, s: p.s }
    }
}

impl TimestepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TimestepSchedule::LogitNormal { m, s } => LogitNormalParams { m, s }.validate(),
            TimestepSchedule::Uniform => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            TimestepSchedule::LogitNormal { m, s } => {
                sample_timestep(rng, LogitNormalParams { m, s })
            }
            TimestepSchedule::Uniform => guard(rng.uniform()),
        }
    }
}

pub fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn logit_normal_pdf(t: f64, params: LogitNormalParams) -> Result<f64> {
    params.validate()?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("timestep {t} outside (0, 1)")));
    }
    let LogitNormalParams { m, s } = params;
    let z = logit(t) - m;
    let norm = 1.0 / (s * std::f64::consts::TAU.sqrt());
    Ok(norm / (t * (1.0 - t)) * (-(z * z) / (2.0 * s * s)).exp())
}

/// Maps the logit of `t` through the standard logistic function.
pub fn sample_timestep(rng: &mut SeededRng, params: LogitNormalParams) -> f64 {
    let u = rng.normal(params.m, params.s);
    timestep_from_normal(u)
}

/// Logistic transform with endpoint saturation guarded.
pub fn timestep_from_normal(u: f64) -> f64 {
    guard(sigmoid(u))
}

fn guard(t: f64) -> f64 {
    if t <= 0.0 {
        ENDPOINT_GUARD
    } else if t >= 1.0 {
        1.0 - ENDPOINT_GUARD
    } else {
        t
    }
}
