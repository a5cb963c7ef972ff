//! Phase-type multi-state models for recurrent events.
//!
//! A subject moves through a small number of observable *stages* (disease
//! episodes, remission, post-transplant, ...) until death.  Within each stage
//! the subject occupies one of `n` latent phases, so the whole history is a
//! continuous-time Markov chain on `k * n` transient states plus one absorbing
//! state.  This crate provides
//!
//! * validated sub-intensity matrices and a dense matrix exponential,
//! * phase-type distribution primitives (survival, density, moments, sampling),
//! * the staged model with conditioned sojourn and stage-transition formulas,
//! * the transition-count distribution `P[N(t) = l]` computed by integrating a
//!   coupled system of linear matrix ODEs over the tree of stage sequences,
//! * a Monte Carlo simulator used as an independent cross-check,
//! * the Stanford heart transplant model and its maximum-likelihood fitter
//!   with nonparametric bootstrap, and
//! * a six-stage cancer progression example.

pub mod cancer;
pub mod counting;
pub mod fit;
pub mod heart;
pub mod matrix;
pub mod ode;
pub mod phase;
pub mod quad;
pub mod sim;
pub mod stage;

pub use matrix::{expm, solve, validate_subintensity, MatrixError, SubIntensity};
pub use stage::{Destination, ModelDocument, StageError, StageModel};
