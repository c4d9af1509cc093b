#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod flow;
pub mod latent;
pub mod lyrics;
pub mod model;
pub mod random;
pub mod sample;
pub mod synth;
pub mod tensor;
pub mod timestep;
pub mod train;

pub use error::{Error, Result};
