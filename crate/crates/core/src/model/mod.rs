//! Toy diffusion-transformer velocity field.
//!
//! Per frame the network sees `[z_t ‖ phoneme embedding ‖ g]`, where the
//! global condition `g` is a projected recurrent summary of a style prompt
//! plus a sinusoidal timestep embedding. A stack of pre-norm bidirectional
//! attention blocks maps this to a velocity with the latent's shape.

mod forward;
mod params;

pub use forward::{embed_timestep, reference_gru_step};
pub use params::{param_shapes, Params};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentSequence;
use crate::lyrics::PhonemeGrid;
use crate::random::SeededRng;
use crate::tensor::{compare_gradients, GradCheckReport, Scalar, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub latent_channels: usize,
    pub model_width: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub phoneme_embed_dim: usize,
    pub style_hidden_dim: usize,
    /// Longest sequence the positional table covers.
    pub max_frames: usize,
    /// Token ids accepted in phoneme grids, `<pad>` included.
    pub vocab_size: usize,
    /// Hidden width of each block's MLP as a multiple of `model_width`.
    pub mlp_ratio: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            latent_channels: 16,
            model_width: 64,
            n_layers: 2,
            n_heads: 4,
            phoneme_embed_dim: 16,
            style_hidden_dim: 32,
            max_frames: 256,
            vocab_size: 40,
            mlp_ratio: 2,
        }
    }
}

impl NetConfig {
    /// Smallest useful configuration, for gradient checks and fast tests.
    pub fn tiny(latent_channels: usize, vocab_size: usize) -> Self {
        Self {
            latent_channels,
            model_width: 8,
            n_layers: 1,
            n_heads: 2,
            phoneme_embed_dim: 3,
            style_hidden_dim: 4,
            max_frames: 16,
            vocab_size,
            mlp_ratio: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("latent_channels", self.latent_channels),
            ("model_width", self.model_width),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("phoneme_embed_dim", self.phoneme_embed_dim),
            ("style_hidden_dim", self.style_hidden_dim),
            ("max_frames", self.max_frames),
            ("vocab_size", self.vocab_size),
            ("mlp_ratio", self.mlp_ratio),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be > 0")));
        }
        if !self.model_width.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "model_width {} is not divisible by n_heads {}",
                self.model_width, self.n_heads
            )));
        }
        if !self.model_width.is_multiple_of(2) {
            return Err(Error::Config("model_width must be even".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.latent_channels + self.phoneme_embed_dim + self.model_width
    }
}

/// Everything the network is conditioned on besides the noised latent.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionBundle {
    pub phoneme_grid: PhonemeGrid,
    pub style_segment: LatentSequence,
    pub t: f64,
    pub drop_lyrics: bool,
    pub drop_style: bool,
}

impl ConditionBundle {
    pub fn new(phoneme_grid: PhonemeGrid, style_segment: LatentSequence, t: f64) -> Self {
        Self {
            phoneme_grid,
            style_segment,
            t,
            drop_lyrics: false,
            drop_style: false,
        }
    }

    /// Same content with both conditions replaced by their null embeddings.
    pub fn unconditional(&self) -> Self {
        Self {
            drop_lyrics: true,
            drop_style: true,
            ..self.clone()
        }
    }

    pub fn at(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }
}

/// Network configuration plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityNet<T> {
    pub config: NetConfig,
    pub params: Params<T>,
}

impl<T: Scalar> VelocityNet<T> {
    /// Seeded initialization.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::derived(seed, 0x1A17);
        let mut params = Params::default();
        for (name, shape) in param_shapes(&config) {
            let n: usize = shape.iter().product();
            let std = match (shape.len(), name.as_str()) {
                (1, _) if name.ends_with(".g") => None,
                (1, _) if name.starts_with("null_") => Some(1.0),
                (1, _) => Some(0.0),
                (_, "pos") => Some(0.1),
                (_, "phoneme_embed") => Some(1.0),
                _ => Some(1.0 / (shape[0] as f64).sqrt()),
            };
            let data: Vec<f64> = match std {
                None => vec![1.0; n],
                Some(0.0) => vec![0.0; n],
                Some(s) => (0..n).map(|_| s * rng.standard_normal()).collect(),
            };
            params.insert(&name, Tensor::from_f64(shape, &data)?);
        }
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking every name and shape.
    pub fn from_params(config: NetConfig, params: Params<T>) -> Result<Self> {
        config.validate()?;
        params.check_layout(&param_shapes(&config))?;
        Ok(Self { config, params })
    }

    pub fn cast<U: Scalar>(&self) -> VelocityNet<U> {
        VelocityNet {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    /// Velocity prediction for one sequence.
    pub fn velocity(&self, z_t: &LatentSequence, cond: &ConditionBundle) -> Result<LatentSequence> {
        let mut tape = Tape::with_finite_checks(false);
        let vars = self.params.bind(&mut tape, false);
        let out = self.forward_on_tape(&mut tape, &vars, z_t, cond)?;
        let value = tape.value(out);
        if !value.is_finite() {
            return Err(Error::Numeric {
                op: "forward_velocity".into(),
                step: None,
            });
        }
        LatentSequence::from_tensor(value)
    }

    /// Final hidden state of the recurrent style encoder.
    pub fn encode_style(&self, segment: &LatentSequence) -> Result<Vec<f64>> {
        let mut tape = Tape::with_finite_checks(false);
        let vars = self.params.bind(&mut tape, false);
        let h = self.encode_style_on_tape(&mut tape, &vars, segment)?;
        Ok(tape.value(h).to_f64_vec())
    }

    /// Flow-matching loss against `target_v` and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        z_t: &LatentSequence,
        cond: &ConditionBundle,
        target_v: &LatentSequence,
        check_finite: bool,
    ) -> Result<(f64, Params<T>)> {
        let mut tape = Tape::with_finite_checks(check_finite);
        let vars = self.params.bind(&mut tape, true);
        let pred = self.forward_on_tape(&mut tape, &vars, z_t, cond)?;
        let loss = crate::flow::fm_loss_on_tape(&mut tape, pred, target_v)?;
        let lv = tape.value(loss).item()?.f64();
        if !lv.is_finite() {
            return Err(Error::Numeric {
                op: "fm_loss".into(),
                step: None,
            });
        }
        let grads = tape.backward(loss)?;
        Ok((lv, vars.collect_grads(&tape, &grads)))
    }
}

impl VelocityNet<f64> {
    /// Finite-difference check of [`VelocityNet::loss_and_grads`] over every
    /// parameter coordinate.
    pub fn grad_check_fm_loss(
        &self,
        z_t: &LatentSequence,
        cond: &ConditionBundle,
        target_v: &LatentSequence,
        eps: f64,
    ) -> Result<GradCheckReport> {
        let (_, grads) = self.loss_and_grads(z_t, cond, target_v, true)?;
        let names: Vec<String> = self.params.iter().map(|(k, _)| k.clone()).collect();
        let values: Vec<Tensor<f64>> = self.params.iter().map(|(_, v)| v.clone()).collect();
        let analytic: Vec<Tensor<f64>> = grads.iter().map(|(_, v)| v.clone()).collect();
        let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
            let mut params = Params::default();
            for (n, v) in names.iter().zip(ps) {
                params.insert(n, v.clone());
            }
            let net = VelocityNet {
                config: self.config.clone(),
                params,
            };
            let pred = net.velocity(z_t, cond)?;
            let target = target_v;
            crate::flow::fm_loss(
                &pred,
                &LatentSequence::zeros(target.frames(), target.channels()),
                target,
            )
        };
        compare_gradients(eval, &analytic, &values, eps)
    }
}

#[cfg(test)]
mod tests;
