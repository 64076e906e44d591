//! Fully convolutional mesh autoencoders built from variant-coefficient
//! convolutions and variant-density pooling over topology-driven graph
//! hierarchies.

mod binio;
pub mod autodiff;
pub mod error;
pub mod layers;
pub mod mesh;
pub mod model;
pub mod sampling;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
