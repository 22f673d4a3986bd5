//! Jointly sparse signal recovery in multiple-measurement-vector (MMV) models.
//!
//! * [`signal`]: sparse complex signals and `Y = AX + Z` measurements.
//! * [`solvers`]: GROUP LASSO via block (BCD-MMV) and parallel (PCD-MMV)
//!   coordinate descent, and a simplified AMP baseline.
//! * [`net`]: an auto-encoder whose decoder unrolls PCD-MMV and adds
//!   row-wise correction layers.
//! * [`training`]: loss, manual reverse-mode gradients and ADAM.
//! * [`experiments`]: reproducible studies and CSV reports.
//! * [`cli`]: the `mmv` command line.

pub mod cli;
pub mod complex;
pub mod error;
pub mod parallel;
pub mod rng;
pub mod net;
pub mod signal;
pub mod solvers;
pub mod training;
pub mod experiments;

pub use complex::{complex_matmul, ComplexMatrix};
pub use error::{Error, Result};
