//! Multi-stage cascading-failure simulation with DC-OPF corrective control
//! and value-based reinforcement learning.
//!
//! The numerical kernels ([`linalg`], the simplex in [`dc_opf`], and
//! [`neural`]) are generic over [`Scalar`]; the grid model and everything
//! built on it run in `f64`. The aliases below name the `f64` instances.

pub mod agent;
pub mod cascade_env;
pub mod case_io;
pub mod dc_opf;
pub mod fixtures;
pub mod harness;
pub mod linalg;
pub mod neural;
pub mod power_flow;
pub mod scalar;

pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type LinearProgram = dc_opf::LinearProgram<f64>;
pub type LpSolution = dc_opf::LpSolution<f64>;
pub type QNet = neural::QNetwork<f64>;
