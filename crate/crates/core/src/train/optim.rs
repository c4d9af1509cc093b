use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConditionBundle, Params};
use crate::random::SeededRng;
use crate::tensor::Scalar;

/// AdamW hyperparameters (the learning rate is supplied per step).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moments mirroring the parameters, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &Params<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One decoupled-weight-decay Adam update.
///
/// Gradients are checked before anything is written, so a non-finite
/// gradient leaves parameters and moments untouched.
pub fn adamw_step<T: Scalar>(
    params: &mut Params<T>,
    grads: &Params<T>,
    state: &mut OptimizerState<T>,
    hp: &AdamW,
    lr: f64,
) -> Result<()> {
    params.ensure_same_layout(grads)?;
    params.ensure_same_layout(&state.m)?;
    if !grads.is_finite() {
        return Err(Error::Numeric {
            op: "adamw_step".into(),
            step: Some(state.step as usize),
        });
    }
    state.step += 1;
    let bc1 = 1.0 - hp.beta1.powi(state.step as i32);
    let bc2 = 1.0 - hp.beta2.powi(state.step as i32);
    let (ms, vs) = (&mut state.m, &mut state.v);
    for ((name, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
        let m = ms.get_mut(name)?.data_mut();
        let v = vs.get_mut(name)?.data_mut();
        for (i, (theta, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let g = gi.f64();
            let mi = hp.beta1 * m[i].f64() + (1.0 - hp.beta1) * g;
            let vi = hp.beta2 * v[i].f64() + (1.0 - hp.beta2) * g * g;
            m[i] = T::of(mi);
            v[i] = T::of(vi);
            let th = theta.f64();
            let update = (mi / bc1) / ((vi / bc2).sqrt() + hp.eps) + hp.weight_decay * th;
            *theta = T::of(th - lr * update);
        }
    }
    Ok(())
}

/// Exponential moving average of the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EmaState<T> {
    pub shadow: Params<T>,
    pub updates_applied: u64,
}

impl<T: Scalar> EmaState<T> {
    /// Shadow starts as a copy of `params`.
    pub fn new(params: &Params<T>) -> Self {
        Self {
            shadow: params.clone(),
            updates_applied: 0,
        }
    }

    /// `shadow <- decay * shadow + (1 - decay) * params`.
    pub fn update(&mut self, params: &Params<T>, decay: f64) -> Result<()> {
        self.shadow.ensure_same_layout(params)?;
        for ((_, s), (_, p)) in self.shadow.iter_mut().zip(params.iter()) {
            for (a, &b) in s.data_mut().iter_mut().zip(p.data()) {
                *a = T::of(decay * a.f64() + (1.0 - decay) * b.f64());
            }
        }
        self.updates_applied += 1;
        Ok(())
    }
}

/// Independently drops lyrics and style, each with probability `p`.
pub fn cfg_dropout(mut bundle: ConditionBundle, rng: &mut SeededRng, p: f64) -> ConditionBundle {
    bundle.drop_lyrics = rng.bernoulli(p);
    bundle.drop_style = rng.bernoulli(p);
    bundle
}

/// Linear warm-up followed by exponential decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub peak: f64,
    /// Fraction of all steps spent warming up.
    pub warmup_frac: f64,
    /// Learning rate at the last step as a fraction of `peak`.
    pub final_frac: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            peak: 1e-4,
            warmup_frac: 0.05,
            final_frac: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0)
            || !(0.0..1.0).contains(&self.warmup_frac)
            || !(self.final_frac > 0.0 && self.final_frac <= 1.0)
        {
            return Err(Error::Config(format!(
                "invalid learning-rate schedule {self:?}"
            )));
        }
        Ok(())
    }

    /// Rate for 0-based `step` out of `total`.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        let warm = (self.warmup_frac * total as f64).round() as usize;
        if step < warm {
            return self.peak * (step + 1) as f64 / warm as f64;
        }
        let span = total.saturating_sub(warm + 1).max(1);
        let frac = ((step - warm) as f64 / span as f64).min(1.0);
        self.peak * self.final_frac.powf(frac)
    }
}
