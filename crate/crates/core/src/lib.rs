//! Bernstein-weighted Lasso estimation of multivariate Hawkes processes.
//!
//! The pipeline is: simulate or load marked point data
//! ([`point_process`]), build the exact Gram matrix and statistics over a
//! histogram dictionary ([`dictionary`], [`design`]), compute data-driven
//! penalty weights ([`weights`]), solve the weighted Lasso by coordinate
//! descent ([`solver`]), and score support recovery ([`metrics`]).
//! [`bernstein_lab`] checks the martingale tail inequality behind the weights
//! by Monte Carlo, and [`experiments`] drives replicated runs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein_lab;
pub mod design;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod point_process;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
