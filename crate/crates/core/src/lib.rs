//! Low-rank tensor completion regularized by dynamic graphs, built on the
//! transformed t-SVD.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod config;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod run;
pub mod solver;
pub mod theory;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor, RealTensor, Scalar, Tensor3};
pub use transform::{Transform, TransformKind};
