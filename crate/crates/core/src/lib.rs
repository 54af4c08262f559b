//! Numerical laboratory for a duopoly of AI products that compete on price,
//! quality and the level of explanation (XAI) they offer.
//!
//! * [`market`] – primitives and pointwise utility, cost and profit.
//! * [`demand`] – exact demand and surplus by piecewise-linear integration.
//! * [`solver`] – backward induction over XAI, quality and price stages with
//!   epsilon-Nash certification.
//! * [`policy`] – regulator objectives, optimal mandated levels, regime
//!   comparison, fairness and claim witness searches.

pub mod demand;
pub mod market;
pub mod policy;
pub mod solver;

pub use demand::{DemandProfile, SurplusReport};
pub use market::{Firm, FirmStrategy, MarketParams, XaiMode};
