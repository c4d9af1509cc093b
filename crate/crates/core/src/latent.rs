//! Latent frame grids and their on-disk format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Latent frame rate of the reference audio autoencoder, in Hz.
pub const DEFAULT_FRAME_RATE: f64 = 21.5;

/// `frames × channels` grid of latent values, row-major by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSequence {
    frames: usize,
    channels: usize,
    data: Vec<f64>,
}

impl LatentSequence {
    pub fn new(frames: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if frames * channels != data.len() {
            return Err(Error::dim("latent", &[frames, channels], &[data.len()]));
        }
        Ok(Self {
            frames,
            channels,
            data,
        })
    }

    pub fn zeros(frames: usize, channels: usize) -> Self {
        Self::filled(frames, channels, 0.0)
    }

    pub fn filled(frames: usize, channels: usize, value: f64) -> Self {
        Self {
            frames,
            channels,
            data: vec![value; frames * channels],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.frames, self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frame(&self, j: usize) -> &[f64] {
        &self.data[j * self.channels..(j + 1) * self.channels]
    }

    pub fn frame_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.channels..(j + 1) * self.channels]
    }

    /// Frames `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.frames {
            return Err(Error::Contract(format!(
                "window {start}..{} exceeds {} frames",
                start + len,
                self.frames
            )));
        }
        let c = self.channels;
        Self::new(len, c, self.data[start * c..(start + len) * c].to_vec())
    }

    pub fn ensure_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(op, &self.shape(), &other.shape()));
        }
        Ok(())
    }

    /// Element-wise `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.ensure_same_shape(other, "lincomb")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self::new(self.frames, self.channels, data)
    }

    pub fn mean_abs_diff(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other, "mean_abs_diff")?;
        let n = self.data.len().max(1) as f64;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rounds every value to the nearest 32-bit float.
    pub fn quantized_f32(mut self) -> Self {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
        self
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::new(
            vec![self.frames, self.channels],
            self.data.iter().map(|&v| T::of(v)).collect(),
        )
        .expect("latent shape is consistent")
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let (frames, channels) = t.dims2()?;
        Self::new(frames, channels, t.to_f64_vec())
    }

    /// Writes `<base>.f32` (raw little-endian f32) and `<base>.json` (sidecar).
    pub fn write(&self, base: &Path, frame_rate: f64) -> Result<()> {
        let (raw, meta) = latent_paths(base);
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
        let sidecar = LatentSidecar {
            shape: self.shape(),
            frame_rate,
            dtype: "f32le".into(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::json(&meta, e))?;
        fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
    }

    /// Reads a latent written by [`LatentSequence::write`], returning it and its frame rate.
    pub fn read(base: &Path) -> Result<(Self, f64)> {
        let (raw, meta) = latent_paths(base);
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let sidecar: LatentSidecar =
            serde_json::from_str(&text).map_err(|e| Error::json(&meta, e))?;
        if sidecar.dtype != "f32le" {
            return Err(Error::Config(format!(
                "{}: unsupported latent dtype {}",
                meta.display(),
                sidecar.dtype
            )));
        }
        let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        let [frames, channels] = sidecar.shape;
        if bytes.len() != frames * channels * 4 {
            return Err(Error::Config(format!(
                "{}: {} bytes for shape {:?}",
                raw.display(),
                bytes.len(),
                sidecar.shape
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok((Self::new(frames, channels, data)?, sidecar.frame_rate))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatentSidecar {
    shape: [usize; 2],
    frame_rate: f64,
    dtype: String,
}

fn latent_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("f32"), base.with_extension("json"))
}
