//! truthlab: a verification laboratory for auction mechanisms with online
//! supply.
//!
//! Two unit-demand bidders bid on two item types; item 1 always arrives,
//! item 2 may not, and item 1 must be allocated before that is known. The
//! crate implements the mechanism catalog for this model over exact rational
//! arithmetic and provides the machinery to interrogate it:
//!
//! - [`model`]: domain types, welfare, and the offline optimum;
//! - [`mechanisms`]: the mechanism catalog;
//! - [`payments`]: does *any* payment scheme make a given allocation rule
//!   truthful on a grid? Decided by bundle-price difference constraints;
//! - [`verify`]: brute-force truthfulness, rationality, consistency, and
//!   approximation-ratio checks with concrete witnesses;
//! - [`characterize`]: threshold extraction and the machine-checked
//!   structure lemmas, including the constancy probe;
//! - [`impossibility`]: exhaustive pruned search over threshold-form
//!   mechanisms, certifying that none is simultaneously truthful, rational,
//!   and H-approximate on a grid.

pub mod characterize;
pub mod fixtures;
pub mod impossibility;
pub mod io;
pub mod mechanisms;
pub mod model;
pub mod payments;
pub mod rational;
pub mod verify;

pub use mechanisms::MechanismSpec;
pub use model::{
    offline_opt, utility, welfare, Allocation, Bidder, Bundle, Grid, Item, Outcome, ProfileSpace,
    Scenario, Valuation,
};
pub use rational::Rat;
