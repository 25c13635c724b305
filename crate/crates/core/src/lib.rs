//! Numerical core for descrambling the inner-layer signalling of small fully
//! connected networks.
//!
//! A descrambler is a rotation `P ∈ SO(n)` inserted as `P⁻¹P` at a layer
//! boundary. It leaves the network function unchanged and is chosen to
//! optimize an interpretability functional of the rotated signals. Rotations
//! are parameterized through the Cayley map of an antisymmetric matrix, which
//! makes the search an unconstrained L-BFGS problem.
//!
//! The crate is `no_std` + `alloc`; file formats and the command-line front
//! end live in the companion `descrambler` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod cayley;
pub mod complex;
pub mod dataset;
pub mod deer;
pub mod descramble;
pub mod error;
pub mod lbfgs;
pub mod linalg;
pub mod matrix;
pub mod netlab;
pub mod network;
pub mod quadrature;
pub mod replica;
pub mod spectral;

pub use complex::ComplexMatrix;
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use network::{Activation, FeedForwardNet, Layer};
