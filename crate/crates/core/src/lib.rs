//! Batch-mode reinforcement learning from logged one-step transitions.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: the light-controlled generalised repressilator, an RK4
//!   integrator and randomized transition generation.
//! - [`regression`]: an Extremely Randomized Trees regression ensemble.
//! - [`fqi`]: Fitted Q Iteration over a fixed transition set plus greedy
//!   policy extraction.
//! - [`tracking`]: periodic reference tracking, with one Q regressor per
//!   reference phase.
//! - [`harness`]: the repressilator tracking cost, reference builders,
//!   closed-loop evaluation and the experiment recipes driven by the CLI.

pub mod dynamics;
pub mod error;
pub mod features;
pub mod fqi;
pub mod harness;
pub mod regression;
pub mod seed;
pub mod tracking;

pub use error::{Error, Result};
pub use features::Features;
