//! Euler integration of a velocity field from noise (t = 0) to data (t = 1),
//! with classifier-free guidance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::sample_noise;
use crate::latent::LatentSequence;
use crate::lyrics::{build_phoneme_grid, parse_lrc, AlignMode, PhonemeGrid, PhonemeVocab};
use crate::model::{ConditionBundle, VelocityNet};
use crate::random::SeededRng;
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n_steps: usize,
    pub cfg_scale: f64,
    pub seed: u64,
    pub use_ema: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_steps: 32,
            cfg_scale: 4.0,
            seed: 0,
            use_ema: true,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        if !(self.cfg_scale >= 0.0) || !self.cfg_scale.is_finite() {
            return Err(Error::Config(format!(
                "cfg_scale {} must be >= 0",
                self.cfg_scale
            )));
        }
        Ok(())
    }
}

/// Anything that predicts a velocity for a noised latent and its conditions.
pub trait VelocityField {
    fn velocity(&self, z_t: &LatentSequence, cond: &ConditionBundle) -> Result<LatentSequence>;
}

impl<T: Scalar> VelocityField for VelocityNet<T> {
    fn velocity(&self, z_t: &LatentSequence, cond: &ConditionBundle) -> Result<LatentSequence> {
        VelocityNet::velocity(self, z_t, cond)
    }
}

/// Adapts a closure into a [`VelocityField`].
pub struct FnField<F>(pub F);

impl<F> VelocityField for FnField<F>
where
    F: Fn(&LatentSequence, &ConditionBundle) -> Result<LatentSequence>,
{
    fn velocity(&self, z_t: &LatentSequence, cond: &ConditionBundle) -> Result<LatentSequence> {
        (self.0)(z_t, cond)
    }
}

/// `v_uncond + scale * (v_cond - v_uncond)`.
pub fn cfg_velocity(
    v_cond: &LatentSequence,
    v_uncond: &LatentSequence,
    scale: f64,
) -> Result<LatentSequence> {
    v_cond.ensure_same_shape(v_uncond, "cfg_velocity")?;
    let data = v_cond
        .data()
        .iter()
        .zip(v_uncond.data())
        .map(|(&c, &u)| u + scale * (c - u))
        .collect();
    LatentSequence::new(v_cond.frames(), v_cond.channels(), data)
}

/// Explicit Euler from `z0` at t = 0 to t = 1 in `n_steps` equal steps,
/// evaluating the field at each step's left endpoint.
///
/// At scale 1 only the conditional branch is evaluated and at scale 0 only
/// the unconditional one, so those cases match unguided integration exactly.
pub fn euler_integrate<F: VelocityField + ?Sized>(
    field: &F,
    z0: &LatentSequence,
    cond: &ConditionBundle,
    n_steps: usize,
    cfg_scale: f64,
) -> Result<LatentSequence> {
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be >= 1".into()));
    }
    let uncond = cond.unconditional();
    let dt = 1.0 / n_steps as f64;
    let mut z = z0.clone();
    for k in 0..n_steps {
        let t = k as f64 / n_steps as f64;
        let v = if cfg_scale == 1.0 {
            field.velocity(&z, &cond.at(t))?
        } else if cfg_scale == 0.0 {
            field.velocity(&z, &uncond.at(t))?
        } else {
            let vc = field.velocity(&z, &cond.at(t))?;
            let vu = field.velocity(&z, &uncond.at(t))?;
            cfg_velocity(&vc, &vu, cfg_scale)?
        };
        z = z.lincomb(1.0, &v, dt)?;
        if !z.is_finite() {
            return Err(Error::Numeric {
                op: "euler_sample".into(),
                step: Some(k),
            });
        }
    }
    Ok(z)
}

/// Draws `z0 ~ N(0, I)` from `config.seed` and integrates.
pub fn euler_sample<F: VelocityField + ?Sized>(
    field: &F,
    cond: &ConditionBundle,
    channels: usize,
    config: &SampleConfig,
) -> Result<LatentSequence> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let z0 = sample_noise(&mut rng, cond.phoneme_grid.len(), channels);
    euler_integrate(field, &z0, cond, config.n_steps, config.cfg_scale)
}

/// Lyrics text plus style prompt to a generated latent of `l_out` frames.
///
/// Returns the latent and the phoneme grid it was conditioned on. Lyrics
/// are parsed and placed leniently: lines past `l_out` are dropped with a
/// warning.
pub fn generate_song<T: Scalar>(
    net: &VelocityNet<T>,
    vocab: &PhonemeVocab,
    lrc_text: &str,
    style_prompt: &LatentSequence,
    l_out: usize,
    frame_rate: f64,
    config: &SampleConfig,
) -> Result<(LatentSequence, PhonemeGrid)> {
    if l_out == 0 || l_out > net.config.max_frames {
        return Err(Error::Contract(format!(
            "output length {l_out} outside 1..={}",
            net.config.max_frames
        )));
    }
    let sheet = parse_lrc(lrc_text, AlignMode::Lenient)?;
    let grid = build_phoneme_grid(&sheet, vocab, l_out, frame_rate, AlignMode::Lenient)?;
    let cond = ConditionBundle::new(grid.clone(), style_prompt.clone(), 0.0);
    let z = euler_sample(net, &cond, net.config.latent_channels, config)?;
    Ok((z, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetConfig;

    fn cond(l: usize) -> ConditionBundle {
        ConditionBundle::new(
            PhonemeGrid::empty(l, 21.5),
            LatentSequence::zeros(1, 1),
            0.0,
        )
    }

    #[test]
    fn cfg_formula() {
        let vu = LatentSequence::filled(2, 1, 1.0);
        let vc = LatentSequence::filled(2, 1, 2.0);
        assert_eq!(
            cfg_velocity(&vc, &vu, 4.0).unwrap(),
            LatentSequence::filled(2, 1, 5.0)
        );
        assert_eq!(cfg_velocity(&vc, &vu, 1.0).unwrap(), vc);
        assert_eq!(cfg_velocity(&vc, &vu, 0.0).unwrap(), vu);
        assert!(cfg_velocity(&vc, &LatentSequence::zeros(3, 1), 1.0).is_err());
    }

    #[test]
    fn constant_field_is_exact() {
        let field = FnField(|z: &LatentSequence, _: &ConditionBundle| {
            Ok(LatentSequence::filled(z.frames(), z.channels(), 1.0))
        });
        for n in [1, 3, 32, 100] {
            let z =
                euler_integrate(&field, &LatentSequence::zeros(2, 2), &cond(2), n, 4.0).unwrap();
            for &x in z.data() {
                assert!((x - 1.0).abs() < 1e-12, "{n}: {x}");
            }
        }
    }

    #[test]
    fn decay_field_converges_at_first_order() {
        let field =
            FnField(|z: &LatentSequence, _: &ConditionBundle| Ok(z.lincomb(-1.0, z, 0.0).unwrap()));
        let err = |n: usize| {
            let z = euler_integrate(&field, &LatentSequence::filled(1, 1, 1.0), &cond(1), n, 1.0)
                .unwrap();
            assert!((z.data()[0] - (1.0 - 1.0 / n as f64).powi(n as i32)).abs() < 1e-12);
            (z.data()[0] - (-1f64).exp()).abs()
        };
        for n in [32, 64] {
            let ratio = err(n) / err(2 * n);
            assert!((ratio - 2.0).abs() < 0.4, "{n}: {ratio}");
        }
    }

    #[test]
    fn nan_reports_the_step() {
        let field = FnField(|z: &LatentSequence, c: &ConditionBundle| {
            let v = if c.t > 0.4 { f64::NAN } else { 0.0 };
            Ok(LatentSequence::filled(z.frames(), z.channels(), v))
        });
        match euler_integrate(&field, &LatentSequence::zeros(1, 1), &cond(1), 4, 1.0) {
            Err(Error::Numeric { step: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_lyrics_still_generate() {
        let net = VelocityNet::<f32>::new(NetConfig::tiny(16, 40), 1).unwrap();
        let prompt = LatentSequence::filled(3, 16, 0.1);
        let cfg = SampleConfig {
            n_steps: 4,
            ..SampleConfig::default()
        };
        let vocab = PhonemeVocab::default();
        let (z, grid) = generate_song(&net, &vocab, "", &prompt, 10, 21.5, &cfg).unwrap();
        assert_eq!(z.shape(), [10, 16]);
        assert_eq!(grid.non_pad_count(), 0);
        let (z2, _) = generate_song(&net, &vocab, "", &prompt, 10, 21.5, &cfg).unwrap();
        assert_eq!(z, z2);
        assert!(generate_song(&net, &vocab, "", &prompt, 17, 21.5, &cfg).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(SampleConfig {
            n_steps: 0,
            ..SampleConfig::default()
        }
        .validate()
        .is_err());
        assert!(SampleConfig {
            cfg_scale: -1.0,
            ..SampleConfig::default()
        }
        .validate()
        .is_err());
    }
}
