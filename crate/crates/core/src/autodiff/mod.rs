//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Values are evaluated eagerly as operations are recorded on a [`Graph`];
//! [`Graph::backward`] walks the tape in reverse and returns adjoints for
//! every node and every parameter leaf.

mod graph;
mod matrix;
pub mod gradcheck;

pub use graph::{Gradients, Graph, ParamId, Var};
pub use matrix::{Mat, Real};

#[cfg(test)]
mod tests;
