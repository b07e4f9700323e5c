//! Minimal f64 MLP engine: dense layers with exact analytic gradients, an
//! adaptive-moment optimizer and a central finite-difference gradient oracle.
//!
//! The oracle ([`finite_diff_grad`]) deliberately goes through loss
//! evaluation only — it shares no code with the backward pass it checks.

mod adam;
mod fd;
mod mlp;
pub mod snapshot;
mod tensor;

pub use adam::{opt_step, OptState};
pub use fd::{finite_diff_grad, grad_rel_error};
pub use mlp::{loss_and_grad, mlp_apply, Activation, LossKind, Mlp, MlpGrad, MlpTrace};
pub use tensor::Tensor;
