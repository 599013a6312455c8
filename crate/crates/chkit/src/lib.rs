//! Exact consensus-halving toolkit.
//!
//! Everything here works over arbitrary-precision rationals. The crate covers
//! the full pipeline: arithmetic circuits and their conversion to a restricted
//! gate set, embedding circuits as consensus-halving instances, the reduction
//! to Borsuk-Ulam search with a Tucker-lemma solver, exact LP rounding of
//! approximate solutions, first-order (ETR) sentence emission, and reductions
//! from polynomial feasibility and strategic games.

pub mod bu;
pub mod ch;
pub mod circuit;
pub mod embed;
pub mod etr;
pub mod lp;
pub mod piecewise;
pub mod rat;
pub mod reductions;

pub use rat::Rat;
