//! Filter stability laboratory for hidden Markov models.
//!
//! Grid filters for finite and one-dimensional continuous state spaces, the total
//! variation distance between filters started from different initial laws,
//! pathwise forgetting bounds built from local Doeblin sets, exact finite-state
//! verification of the bound ingredients, and seeded experiment drivers.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod math;
pub mod model;
pub mod report;
pub mod rng;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
