//! Tabular two-player zero-sum Markov games.
//!
//! The crate houses the numerical side of the laboratory:
//!
//! - [`game`]: the game model, payoff matrices of the minimax Bellman operator, induced chains
//!   and a seeded generator of games whose uniform policy mixes.
//! - [`tsallis`]: the Tsallis-½ smoothed best response (closed form with a bracketed
//!   normalization root), its entropy, and a softmax baseline.
//! - [`learner`]: the single time-scale best-response / value-iteration learner with its
//!   step-size schedule and the constants of its convergence theory ([`theory`]).
//! - [`oracle`]: exact ground truth (matrix-game LP, Shapley iteration, policy evaluation,
//!   best responses, Nash gap).
//! - [`chain`]: stationary distributions, mixing times, `r_b`, and Lyapunov diagnostics.
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration and the CLI live in
//! the companion `tbrvi-lab` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod chain;
mod error;
pub mod game;
pub mod learner;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod theory;
pub mod tsallis;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use game::{JointPolicy, MarkovGame, PayoffMatrix, Player};
pub use linalg::Matrix;
pub use tsallis::{Distribution, SmoothingParams};
