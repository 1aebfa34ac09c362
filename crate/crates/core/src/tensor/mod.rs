//! Minimal dense-array engine with reverse-mode differentiation and Adam.

pub mod checkpoint;
mod dense;
mod graph;
pub mod kernels;
mod optim;

pub use dense::Tensor;
pub use graph::{sigmoid, Graph, Pointwise, Var};
pub use optim::{AdamConfig, ParamStore};
