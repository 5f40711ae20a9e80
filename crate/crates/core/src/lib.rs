//! Soft unification engine: a trainable mechanism that learns which symbols
//! of an example act as variables, lifts the example into an invariant, and
//! unifies it with new examples through differentiable attention. Includes
//! the numeric substrate (tensors, reverse-mode differentiation, Adam),
//! four task architectures built on soft unification, dataset generators
//! with certifying oracles, a training harness, and invariant analysis.

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod harness;
pub mod layers;
pub mod models;
pub mod ops_nn;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod unify;

pub use error::{Error, Result};
pub use graph::{Graph, Var};
pub use params::{InitSpec, ParamId, ParamSet};
pub use rng::{Stream, StreamRng};
pub use tensor::Tensor;
