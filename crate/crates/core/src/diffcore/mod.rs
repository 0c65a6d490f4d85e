//! Reverse-mode differentiation, feedforward networks and Adam.
//!
//! Two routes to every derivative are provided: the scalar [`CompGraph`]
//! (general, slow, supports differentiating its own gradient nodes) and the
//! layer-level passes on [`Mlp`] (fast, used for training). All arithmetic is
//! `f64`.

mod adam;
mod checkpoint;
mod graph;
mod mlp;

pub use adam::{clip_grad_norm, AdamState};
pub use checkpoint::{NetworkCheckpoint, NETWORK_FORMAT_VERSION};
pub(crate) use checkpoint::check_version;
pub use graph::{sign, CompGraph, NodeId, Op, Values};
pub use mlp::{param_count, Activation, ForwardCache, Mlp};
