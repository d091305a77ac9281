//! QoS and antenna-placement workbench for multi-priority uplink traffic in
//! distributed antenna systems.
//!
//! The crate has two halves that meet through the per-attempt outage
//! probability `p`:
//!
//! * queueing: [`traffic`] moments, [`energy`] functions, [`priority`]
//!   delay-bound violation probabilities and the slot-level [`sim`]ulator
//!   that validates them;
//! * radio: cluster [`geometry`], closed-form and Monte-Carlo [`outage`]
//!   analysis and antenna [`placement`] by stochastic approximation.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod outage;
pub mod placement;
pub mod priority;
pub mod rng;
pub mod root;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
