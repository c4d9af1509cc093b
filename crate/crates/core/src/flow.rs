//! Straight-line conditional flow matching.
//!
//! Noise `z0 ~ N(0, I)` and data `z1` are joined by `z_t = (1 - t) z0 + t z1`,
//! whose velocity is the constant `z1 - z0`. The network is trained to match
//! that velocity under mean squared error.

use crate::error::{Error, Result};
use crate::latent::LatentSequence;
use crate::random::SeededRng;
use crate::tensor::{Scalar, Tape, Var};

/// One training pair on the path.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub z0: LatentSequence,
    pub z1: LatentSequence,
    pub t: f64,
    pub z_t: LatentSequence,
    pub target_v: LatentSequence,
}

impl FlowSample {
    pub fn new(z0: LatentSequence, z1: LatentSequence, t: f64) -> Result<Self> {
        let z_t = interpolate(&z0, &z1, t)?;
        let target_v = target_velocity(&z0, &z1)?;
        Ok(Self {
            z0,
            z1,
            t,
            z_t,
            target_v,
        })
    }
}

/// Standard Gaussian latent of the given shape.
pub fn sample_noise(rng: &mut SeededRng, frames: usize, channels: usize) -> LatentSequence {
    LatentSequence::new(frames, channels, rng.normal_vec(frames * channels))
        .expect("noise shape is consistent")
}

pub fn interpolate(z0: &LatentSequence, z1: &LatentSequence, t: f64) -> Result<LatentSequence> {
    z0.ensure_same_shape(z1, "interpolate")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("path time {t} outside [0, 1]")));
    }
    z0.lincomb(1.0 - t, z1, t)
}

pub fn target_velocity(z0: &LatentSequence, z1: &LatentSequence) -> Result<LatentSequence> {
    z0.ensure_same_shape(z1, "target_velocity")?;
    z1.lincomb(1.0, z0, -1.0)
}

/// Mean over all elements of `(pred_v - (z1 - z0))^2`.
pub fn fm_loss(pred_v: &LatentSequence, z0: &LatentSequence, z1: &LatentSequence) -> Result<f64> {
    pred_v.ensure_same_shape(z0, "fm_loss")?;
    let target = target_velocity(z0, z1)?;
    let n = pred_v.data().len();
    if n == 0 {
        return Err(Error::Contract("fm_loss on an empty latent".into()));
    }
    let total: f64 = pred_v
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    Ok(total / n as f64)
}

/// Differentiable loss against a precomputed target velocity.
pub fn fm_loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    pred_v: Var,
    target_v: &LatentSequence,
) -> Result<Var> {
    let target = tape.constant(target_v.to_tensor());
    tape.squared_error(pred_v, target)
}
