//! A small reverse-mode automatic differentiation engine for convolutional
//! networks on the CPU, with the backbones used by the emotion classifier.
//!
//! Tensors are dense `f32` in NCHW order. A [`Graph`] records the forward
//! pass of one batch and is consumed by [`Graph::backward`].

mod error;
mod graph;
mod kernels;
pub mod models;
mod optim;
mod params;
mod tensor;

pub use error::{NnError, Result};
pub use graph::{BnParams, Gradients, Graph, Mode, StatUpdate, Var};
pub use models::{Arch, Model};
pub use optim::Adam;
pub use params::{ParamId, ParamKind, ParamStore};
pub use tensor::{softmax_rows, Tensor};
