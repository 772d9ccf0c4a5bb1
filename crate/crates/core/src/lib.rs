//! Level-set topology optimization driven by nonlinear diffusion.

// `!(x > 0.0)` deliberately rejects NaN; element kernels index small arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarks;
pub mod error;
pub mod evolve;
pub mod fem;
pub mod io;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod physics;

pub use error::{Error, Result};
