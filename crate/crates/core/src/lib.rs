#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::too_many_arguments)]
pub mod cli;
pub mod diffcore;
pub mod envs;
pub mod error;
pub mod eval;
pub mod io;
pub mod ppo;
pub mod rng;
pub mod wcve;

pub use error::{Error, Result};
