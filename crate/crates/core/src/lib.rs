//! Simon's hidden-shift problem with the oracle split across `2^t` nodes:
//! exact simulation of the quantum solver, plus classical baselines.
//!
//! * [`gf2`]: bit strings and incremental GF(2) elimination.
//! * [`instance`]: Simon functions, node oracles, `G(u)` and `S(u)`.
//! * [`circuit`]: exact outcome laws, circuit sampling, cost accounting and a
//!   full state-vector cross-check.
//! * [`solver`]: distributed, centralized and classical solvers.
//! * [`cli`]: benchmark sweeps and verification reports behind the binary.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod gf2;
pub mod instance;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use gf2::{BitString, Gf2Basis, LongBits};
