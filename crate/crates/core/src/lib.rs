//! Splitting Gibbs measures for nearest-neighbour models with spin space [0,1]
//! on Cayley trees.
//!
//! The measures are parametrized by positive solutions `f(t,x)` of a nonlinear
//! integral equation on the tree; this crate discretizes that equation on a
//! quadrature [`grid::Grid`], finds translation-invariant solutions, builds the
//! three families of non-translation-invariant solutions (ART lift,
//! Bleher-Ganikhodjaev path fields, Zachary level sequences), and turns any
//! solution into finite-volume distributions that can be checked and sampled.

pub mod cli;
pub mod constructions;
pub mod error;
pub mod expr;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod ti_solver;
pub mod tree;

pub use constructions::{Provenance, VertexField};
pub use error::{Error, Result};
pub use field::Field;
pub use grid::{Grid, Rule};
pub use kernel::{Kernel, Preset};
pub use tree::{Mode, Path, TreeShape, VertexAddr};

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
