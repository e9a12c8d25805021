//! Minimal differentiable-model core.
//!
//! Small feed-forward scorers, weighted binary cross-entropy, analytic
//! gradients, Adam, and a finite-difference checker. Everything is `f64` and
//! allocation is not optimised: the networks here have tens to hundreds of
//! parameters.

mod adam;
pub mod gradcheck;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use loss::{backward, bce, bce_logit_grads, sample_bce, Batch, BCE_CLAMP};
pub use mlp::{logistic, Dense, ForwardPass, GradSet, Mlp, Scorer, Trace};
