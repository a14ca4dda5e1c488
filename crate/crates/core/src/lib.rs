//! Gaussian mixture fitting by Riemannian optimization over SPD matrices.
//!
//! Each component's mean and covariance are lifted into one augmented SPD
//! matrix, which makes the per-component log-likelihood geodesically concave.
//! The crate provides the SPD and product geometry, the lifted objective with
//! conjugate-prior penalties, a strong-Wolfe line search, LBFGS, CG and SGD
//! solvers, a penalized EM baseline, data generation and k-means++
//! initialization, and the run harness behind the `riemmix` binary.

pub mod checks;
pub mod data;
pub mod em;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linesearch;
pub mod manifold;
pub mod meancov;
pub mod objective;
pub mod optim;
pub mod product;
pub mod random;
pub mod spd;

pub use error::{Error, Result};
