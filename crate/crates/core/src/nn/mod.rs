//! Numeric kernels: dense and sparse matrices, a reverse-mode tape, Adam, a
//! finite-difference gradient checker and the parameter checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod matrix;
pub mod real;
pub mod sparse;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, TensorRecord};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use matrix::DenseMatrix;
pub use real::{sigmoid, Precision, Real};
pub use sparse::CsrMatrix;
pub use tape::{row_softmax, Gradients, Parameter, Tape, Var, PROB_CLAMP};
