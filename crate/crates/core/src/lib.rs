//! Generating-function analysis of probabilistic while-programs.

pub mod algebra;
pub mod closedform;
pub mod error;
pub mod fps;
pub mod hb;
pub mod invariants;
pub mod semantics;
pub mod stats;
pub mod syntax;
#[cfg(any(test, feature = "test-util"))]
pub mod testing;

pub use error::{Error, Result};
