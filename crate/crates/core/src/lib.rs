//! Relaxed optimal control for semilinear parabolic equations.

pub mod cli;
pub mod control_space;
pub mod error;
pub mod optimizer;
pub mod pde;
pub mod presets;
pub mod young_measures;

pub use error::{Error, Result};
