//! Invariant-encoding generative adversarial networks (IVE-GAN) at desk
//! scale.
//!
//! The crate carries its own reverse-mode autodiff ([`autodiff`]), dense
//! networks with Adam ([`nn`]), the invariant transformations
//! ([`transforms`]), data sources ([`data`]), the model and its training loop
//! ([`model`]), evaluation metrics ([`eval`]), and the file formats and
//! commands behind the `ivegan` binary ([`cli`]).

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod eval;
pub mod model;
pub mod nn;
pub mod transforms;

pub use autodiff::{Tape, Tensor};
pub use model::{Architecture, IveGanModel, TrainConfig, VanillaGan};
