//! Kernel-based online learning for repeated sequential games against
//! unknown opponents.
//!
//! A learner repeatedly plays actions against an opponent whose response
//! function is unknown but assumed smooth under a known kernel. The crate
//! provides:
//!
//! - [`kernels`]: positive-definite kernels over joint (action, type) inputs;
//! - [`gp`]: online kernel ridge regression with confidence bounds;
//! - [`policies`]: the optimistic multiplicative-weights learner, its
//!   single-opponent bilevel specialization, and classical baselines
//!   (Hedge, Exp3, GP-UCB, Max-Min, Best-offline);
//! - [`games`]: the repeated-game protocol, regret accounting, and the
//!   simplex discretization for Stackelberg leaders;
//! - [`traffic`]: a congestion-routing environment with BPR travel times;
//! - [`wildlife`]: a patrol-vs-poacher environment with the Subjective
//!   Utility response model;
//! - [`synthetic`]: small RKHS-sampled environments for calibration;
//! - [`harness`]: config-driven experiment runner with CSV output.

pub mod games;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod policies;
pub mod synthetic;
pub mod traffic;
pub mod wildlife;
