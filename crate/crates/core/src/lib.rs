//! Plan-and-act control in a deterministic 2D bin-sorting world.
//!
//! The loop: observations are encoded into a visual latent, a flow-matching
//! world model imagines `k` candidate futures in that latent space, a frozen
//! reward model scores each candidate for progress, risk and completion, and
//! a flow-matching action head executes the selected plan as fixed-horizon
//! action chunks.
//!
//! Everything is built on a small f64 MLP engine ([`nn`]) with exact analytic
//! gradients and a finite-difference oracle, so every learned component in
//! the stack is checkable to tight tolerances. All randomness is seeded; the
//! simulator, training pipeline and evaluation protocol are bitwise
//! reproducible on a given platform.

pub mod error;
pub mod flow;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod repr;
pub mod reward;
pub mod stats;
pub mod util;
pub mod world;
pub mod worldmodel;

pub use error::{Error, Result};
