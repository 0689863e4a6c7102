//! Dense linear algebra and reverse-mode differentiation.
//!
//! Matrices use row-major storage and column-stacking `vec`, so that
//! `vec(B X Aᵀ) = (A ⊗ B) vec(X)`.

mod grad;
mod matrix;
mod tape;

pub(crate) use grad::check_finite_in;
pub use grad::{finite_difference_gradient, gradient, GradientReport, ParamGroup, ParamLayout, ParamVector};
pub use matrix::{Matrix, DEFAULT_MAX_CONDITION};
pub use tape::{Tape, Var};
