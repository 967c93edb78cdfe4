//! Simulation of two parametric downconverters whose idler beams are
//! continuously coupled.
//!
//! The crate builds the Bogoliubov transfer matrix of the device, computes
//! the vacuum-input moments and the mutual coherence of the two signal
//! beams, decomposes the device into two equivalent cascades of discrete
//! elements, and analyses the which-way information carried by the idlers.
//! A truncated Fock-space evolution provides an independent check of the
//! Gaussian results.
//!
//! Mode order is fixed everywhere as `(s1, s2, i1, i2)` for matrices acting
//! on `(A_s1, A_s2, A_i1†, A_i2†)`; Fock kets use `|n_s1 n_i1 n_s2 n_i2⟩`.

// NaN must fail the `!(x <= limit)` checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod decompose;
pub mod device;
pub mod error;
pub mod fock_oracle;
pub mod moments;
pub mod numerics;
pub mod whichway;

pub use config::Tolerances;
pub use device::{ContinuousDevice, Regime, TransferMatrix, ZouDevice};
pub use error::{Error, Result};
pub use numerics::ComplexMatrix;
