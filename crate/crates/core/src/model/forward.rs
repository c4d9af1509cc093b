use super::params::BoundParams;
use super::{ConditionBundle, Params, VelocityNet};
use crate::error::{Error, Result};
use crate::latent::LatentSequence;
use crate::tensor::{Scalar, Tape, Tensor, Var};

const LN_EPS: f64 = 1e-5;

/// Sinusoidal embedding: `sin(t w_k)` then `cos(t w_k)` with `w_k` geometric
/// from 1 to 10^4 over `width / 2` frequencies.
pub fn embed_timestep(t: f64, width: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("timestep {t} outside [0, 1]")));
    }
    let half = width / 2;
    let omega = |k: usize| {
        if half <= 1 {
            1.0
        } else {
            10f64.powf(4.0 * k as f64 / (half - 1) as f64)
        }
    };
    let mut out: Vec<f64> = (0..half).map(|k| (t * omega(k)).sin()).collect();
    out.extend((0..half).map(|k| (t * omega(k)).cos()));
    Ok(out)
}

/// Plain scalar GRU step, used as an independent oracle for the tape version.
pub fn reference_gru_step(params: &Params<f64>, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let affine = |w: &str, u: &str, b: &str, hh: &[f64]| -> Result<Vec<f64>> {
        let (w, u, b) = (params.get(w)?, params.get(u)?, params.get(b)?);
        let (cin, dh) = w.dims2()?;
        Ok((0..dh)
            .map(|j| {
                let xs: f64 = (0..cin).map(|i| x[i] * w.at2(i, j)).sum();
                let hs: f64 = (0..dh).map(|i| hh[i] * u.at2(i, j)).sum();
                xs + hs + b.data()[j]
            })
            .collect())
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let z: Vec<f64> = affine("style.wz", "style.uz", "style.z_b", h)?
        .into_iter()
        .map(sig)
        .collect();
    let r: Vec<f64> = affine("style.wr", "style.ur", "style.r_b", h)?
        .into_iter()
        .map(sig)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n: Vec<f64> = affine("style.wn", "style.un", "style.n_b", &rh)?
        .into_iter()
        .map(f64::tanh)
        .collect();
    Ok((0..h.len()).map(|j| n[j] + z[j] * (h[j] - n[j])).collect())
}

/// `[1 × d]` row repeated `rows` times, via an embedding lookup so gradients
/// flow back to the row.
fn broadcast_rows<T: Scalar>(tape: &mut Tape<T>, row: Var, rows: usize) -> Result<Var> {
    let d = tape.value(row).len();
    let r = tape.reshape(row, &[1, d])?;
    tape.embedding(r, &vec![0; rows])
}

impl<T: Scalar> VelocityNet<T> {
    pub(crate) fn encode_style_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        segment: &LatentSequence,
    ) -> Result<Var> {
        if segment.frames() == 0 {
            return Err(Error::Contract("style segment is empty".into()));
        }
        if segment.channels() != self.config.latent_channels {
            return Err(Error::dim(
                "encode_style",
                &segment.shape(),
                &[segment.frames(), self.config.latent_channels],
            ));
        }
        let x = tape.constant(segment.to_tensor());
        let mut proj = Vec::new();
        for gate in ["z", "r", "n"] {
            let xw = tape.matmul(x, p.var(&format!("style.w{gate}"))?)?;
            proj.push(tape.add(xw, p.var(&format!("style.{gate}_b"))?)?);
        }
        let (uz, ur, un) = (p.var("style.uz")?, p.var("style.ur")?, p.var("style.un")?);
        let mut h = tape.constant(Tensor::zeros([1, self.config.style_hidden_dim]));
        for j in 0..segment.frames() {
            let xz = tape.slice(proj[0], 0, j, 1)?;
            let xr = tape.slice(proj[1], 0, j, 1)?;
            let xn = tape.slice(proj[2], 0, j, 1)?;
            let hz = tape.matmul(h, uz)?;
            let z = tape.add(xz, hz)?;
            let z = tape.sigmoid(z)?;
            let hr = tape.matmul(h, ur)?;
            let r = tape.add(xr, hr)?;
            let r = tape.sigmoid(r)?;
            let rh = tape.mul(r, h)?;
            let rhu = tape.matmul(rh, un)?;
            let n = tape.add(xn, rhu)?;
            let n = tape.tanh(n)?;
            let diff = tape.sub(h, n)?;
            let zd = tape.mul(z, diff)?;
            h = tape.add(n, zd)?;
        }
        Ok(h)
    }

    /// Projected style (or the null-style vector) plus the timestep embedding.
    pub(crate) fn global_condition_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        cond: &ConditionBundle,
    ) -> Result<Var> {
        let w = self.config.model_width;
        let style = if cond.drop_style {
            p.var("null_style")?
        } else {
            let h = self.encode_style_on_tape(tape, p, &cond.style_segment)?;
            let s = tape.affine(h, p.var("style.proj")?, p.var("style.proj_b")?)?;
            tape.reshape(s, &[w])?
        };
        let temb = Tensor::from_f64([w], &embed_timestep(cond.t, w)?)?;
        let temb = tape.constant(temb);
        tape.add(style, temb)
    }

    /// `[L × (C + E + W)]` per-frame input `[z_t ‖ lyric ‖ g]`.
    pub(crate) fn assemble_input_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        z_t: &LatentSequence,
        cond: &ConditionBundle,
    ) -> Result<Var> {
        let cfg = &self.config;
        let l = z_t.frames();
        if cond.phoneme_grid.len() != l {
            return Err(Error::dim(
                "assemble_input",
                &z_t.shape(),
                &[cond.phoneme_grid.len()],
            ));
        }
        if z_t.channels() != cfg.latent_channels {
            return Err(Error::dim(
                "assemble_input",
                &z_t.shape(),
                &[l, cfg.latent_channels],
            ));
        }
        let lyrics = if cond.drop_lyrics {
            broadcast_rows(tape, p.var("null_lyrics")?, l)?
        } else {
            tape.embedding(p.var("phoneme_embed")?, &cond.phoneme_grid.tokens)?
        };
        let g = self.global_condition_on_tape(tape, p, cond)?;
        let g = broadcast_rows(tape, g, l)?;
        let z = tape.constant(z_t.to_tensor());
        tape.concat(&[z, lyrics, g], 1)
    }

    /// Full forward pass giving a `[L × C]` velocity.
    pub(crate) fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        z_t: &LatentSequence,
        cond: &ConditionBundle,
    ) -> Result<Var> {
        let cfg = &self.config;
        let l = z_t.frames();
        if l == 0 || l > cfg.max_frames {
            return Err(Error::Contract(format!(
                "sequence of {l} frames outside 1..={}",
                cfg.max_frames
            )));
        }
        let x = self.assemble_input_on_tape(tape, p, z_t, cond)?;
        let mut h = tape.affine(x, p.var("in.w")?, p.var("in.b")?)?;
        let pos = tape.slice(p.var("pos")?, 0, 0, l)?;
        h = tape.add(h, pos)?;

        let dh = cfg.model_width / cfg.n_heads;
        let inv_sqrt = T::of(1.0 / (dh as f64).sqrt());
        for i in 0..cfg.n_layers {
            let name = |s: &str| format!("blocks.{i}.{s}");
            let a = tape.layer_norm(h, p.var(&name("ln1.g"))?, p.var(&name("ln1.b"))?, LN_EPS)?;
            let q = tape.matmul(a, p.var(&name("attn.wq"))?)?;
            let k = tape.matmul(a, p.var(&name("attn.wk"))?)?;
            let v = tape.matmul(a, p.var(&name("attn.wv"))?)?;
            let mut heads = Vec::with_capacity(cfg.n_heads);
            for hd in 0..cfg.n_heads {
                let qh = tape.slice(q, 1, hd * dh, dh)?;
                let kh = tape.slice(k, 1, hd * dh, dh)?;
                let vh = tape.slice(v, 1, hd * dh, dh)?;
                let kt = tape.transpose(kh)?;
                let scores = tape.matmul(qh, kt)?;
                let scores = tape.scale(scores, inv_sqrt)?;
                let attn = tape.softmax(scores, 1)?;
                heads.push(tape.matmul(attn, vh)?);
            }
            let o = tape.concat(&heads, 1)?;
            let o = tape.affine(o, p.var(&name("attn.wo"))?, p.var(&name("attn.bo"))?)?;
            h = tape.add(h, o)?;

            let m = tape.layer_norm(h, p.var(&name("ln2.g"))?, p.var(&name("ln2.b"))?, LN_EPS)?;
            let m = tape.affine(m, p.var(&name("mlp.w1"))?, p.var(&name("mlp.b1"))?)?;
            let m = tape.gelu(m)?;
            let m = tape.affine(m, p.var(&name("mlp.w2"))?, p.var(&name("mlp.b2"))?)?;
            h = tape.add(h, m)?;
        }
        let h = tape.layer_norm(h, p.var("ln_f.g")?, p.var("ln_f.b")?, LN_EPS)?;
        tape.affine(h, p.var("out.w")?, p.var("out.b")?)
    }

    /// The assembled `[L × (C + E + W)]` network input, for inspection.
    pub fn assemble_input(
        &self,
        z_t: &LatentSequence,
        cond: &ConditionBundle,
    ) -> Result<Tensor<T>> {
        let mut tape = Tape::with_finite_checks(false);
        let p = self.params.bind(&mut tape, false);
        let x = self.assemble_input_on_tape(&mut tape, &p, z_t, cond)?;
        Ok(tape.value(x).clone())
    }

    /// The global condition vector `g`, for inspection.
    pub fn global_condition(&self, cond: &ConditionBundle) -> Result<Vec<f64>> {
        let mut tape = Tape::with_finite_checks(false);
        let p = self.params.bind(&mut tape, false);
        let g = self.global_condition_on_tape(&mut tape, &p, cond)?;
        Ok(tape.value(g).to_f64_vec())
    }
}
