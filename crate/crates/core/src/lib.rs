//! Numerical toolkit for λ-type operator space tensor products on matrix
//! algebras.
//!
//! * [`matcore`]: dense complex matrices, products, norms, positivity.
//! * [`lambda`]: λ-sequences, their unit expansions and witness matrices.
//! * [`axioms`]: bounded machine verification of the structural conditions.
//! * [`tensorspace`]: tensor elements, decompositions, norm bounds.
//! * [`order`]: cone certificates, the Λ-norm bound, order units, cp maps.
//! * [`algebra`]: the λ-tensor algebra product and involution.
//! * [`cli`]: the `lt` command-line front end.

pub mod algebra;
pub mod axioms;
pub mod cli;
pub mod error;
pub mod lambda;
pub mod matcore;
pub mod order;
pub mod sampling;
pub mod tensorspace;

pub use error::{LtError, Result};
pub use lambda::{LambdaKind, LambdaSequence, LambdaSpec};
pub use matcore::{CMatrix, C64};
