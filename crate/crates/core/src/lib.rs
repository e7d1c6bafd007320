//! Fair division of multi-copy indivisible items among groups of agents.
//!
//! Groups of identical agents share a pool of item types, each available in
//! several copies. The crate provides closed-form fractional mechanisms, a
//! max-min gap program, a rounding step that turns fractional shares into
//! complete integral allocations, exact fairness verdicts, and the
//! sufficient conditions under which envy-free or proportional allocations
//! are guaranteed to exist.

pub mod app;
pub mod cake;
pub mod conditions;
pub mod divergence;
pub mod error;
pub mod fairness;
pub mod frobenius;
pub mod greedy;
pub mod lp;
pub mod mechanisms;
pub mod model;
pub mod norms;
pub mod rounding;

pub use error::{Error, Result};
pub use model::{FractionalAllocation, Instance, IntegralAllocation, Kind, Rational};
