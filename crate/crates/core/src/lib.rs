//! Exact verification kernel for germs at +∞ of line homeomorphisms, leaf
//! spaces with one-sided branching, the induced germ homomorphism and the
//! blow-up action.

// Errors carry full branch names and coordinates so reports can be replayed;
// they sit on cold paths.
#![allow(clippy::result_large_err, clippy::large_enum_variant)]

pub mod rational;

pub mod action;
pub mod blowup;
pub mod germ;
pub mod harness;
pub mod leafspace;
pub mod plmap;
pub mod word;

pub use rational::Q;
