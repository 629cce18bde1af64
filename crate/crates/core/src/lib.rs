//! Received-SNR-optimal pilot design for FDD massive MISO channel estimation.
//!
//! The channel is tracked by a Kalman filter in the reduced eigen-domain of
//! its spatial covariance. Each block's pilot matrix is chosen greedily to
//! maximise the expected training-based received SNR of the following data
//! period. For the block Gauss-Markov channel this is a trace-of-inverse
//! semidefinite relaxation followed by factor extraction; for the block
//! i.i.d. channel the optimum is a water-filling over the dominant
//! eigen-directions.
//!
//! Module map:
//! - [`channel`]: spatial correlation, the reduced subspace and Jakes' coefficient
//! - [`kalman`]: measurement and time updates plus a batch MMSE oracle
//! - [`snr`]: received SNR and the `(A, B)` design objective
//! - [`sdp`]: projected-gradient solver with KKT certificate
//! - [`pilot`]: relaxation-based designs, water-filling and baselines
//! - [`experiment`]: Monte Carlo harness with CSV output
//! - [`validation`]: oracle suites run by `mimo-pilot validate`

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod kalman;
pub mod linalg;
pub mod pilot;
pub mod sdp;
pub mod snr;
pub mod validation;

pub use error::{Error, Result};
