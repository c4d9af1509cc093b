use std::collections::BTreeMap;

use super::NetConfig;
use crate::error::{Error, Result};
use crate::tensor::{Gradients, Scalar, Tape, Tensor, Var};

/// Named parameter tensors in a deterministic (sorted) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T> Default for Params<T> {
    fn default() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }
}

/// Expected name and shape of every parameter for `cfg`.
pub fn param_shapes(cfg: &NetConfig) -> Vec<(String, Vec<usize>)> {
    let c = cfg.latent_channels;
    let w = cfg.model_width;
    let e = cfg.phoneme_embed_dim;
    let h = cfg.style_hidden_dim;
    let hidden = cfg.mlp_ratio * w;
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    let mut add = |name: String, shape: &[usize]| out.push((name, shape.to_vec()));
    for gate in ["z", "r", "n"] {
        add(format!("style.w{gate}"), &[c, h]);
        add(format!("style.u{gate}"), &[h, h]);
        add(format!("style.{gate}_b"), &[h]);
    }
    add("style.proj".into(), &[h, w]);
    add("style.proj_b".into(), &[w]);
    add("null_style".into(), &[w]);
    add("phoneme_embed".into(), &[cfg.vocab_size, e]);
    add("null_lyrics".into(), &[e]);
    add("in.w".into(), &[cfg.input_width(), w]);
    add("in.b".into(), &[w]);
    add("pos".into(), &[cfg.max_frames, w]);
    for i in 0..cfg.n_layers {
        let p = format!("blocks.{i}");
        add(format!("{p}.ln1.g"), &[w]);
        add(format!("{p}.ln1.b"), &[w]);
        for m in ["wq", "wk", "wv", "wo"] {
            add(format!("{p}.attn.{m}"), &[w, w]);
        }
        add(format!("{p}.attn.bo"), &[w]);
        add(format!("{p}.ln2.g"), &[w]);
        add(format!("{p}.ln2.b"), &[w]);
        add(format!("{p}.mlp.w1"), &[w, hidden]);
        add(format!("{p}.mlp.b1"), &[hidden]);
        add(format!("{p}.mlp.w2"), &[hidden, w]);
        add(format!("{p}.mlp.b2"), &[w]);
    }
    add("ln_f.g".into(), &[w]);
    add("ln_f.b".into(), &[w]);
    add("out.w".into(), &[w, c]);
    add("out.b".into(), &[c]);
    out
}

impl<T: Scalar> Params<T> {
    pub fn insert(&mut self, name: &str, value: Tensor<T>) {
        self.tensors.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape().to_vec())))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Errors unless names and shapes match `expected` exactly.
    pub fn check_layout(&self, expected: &[(String, Vec<usize>)]) -> Result<()> {
        if expected.len() != self.tensors.len() {
            return Err(Error::Contract(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (name, shape) in expected {
            let t = self.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Contract(format!(
                    "parameter {name:?} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    /// Same names and shapes as `other`.
    pub fn ensure_same_layout(&self, other: &Self) -> Result<()> {
        let layout: Vec<(String, Vec<usize>)> = other
            .tensors
            .iter()
            .map(|(k, v)| (k.clone(), v.shape().to_vec()))
            .collect();
        self.check_layout(&layout)
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.ensure_same_layout(other)?;
        for (k, v) in self.tensors.iter_mut() {
            let o = &other.tensors[k];
            for (a, &b) in v.data_mut().iter_mut().zip(o.data()) {
                *a = *a + b;
            }
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, c: T) {
        for v in self.tensors.values_mut() {
            for a in v.data_mut() {
                *a = *a * c;
            }
        }
    }

    /// Records every tensor on `tape`, as trainable leaves or constants.
    pub(crate) fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(k, v)| {
                let var = if trainable {
                    tape.param(v.clone())
                } else {
                    tape.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        BoundParams { vars }
    }
}

/// Parameter handles on one tape.
pub(crate) struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub(crate) fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name:?}")))
    }

    pub(crate) fn collect_grads<T: Scalar>(
        &self,
        tape: &Tape<T>,
        grads: &Gradients<T>,
    ) -> Params<T> {
        Params {
            tensors: self
                .vars
                .iter()
                .map(|(k, &v)| (k.clone(), grads.wrt(tape, v)))
                .collect(),
        }
    }
}
