//! Reverse-mode differentiation over dense rank-2 tensors, with the ragged
//! gather/scatter primitives the mesh layers are assembled from.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
