//! Provably certified local tensor-train surrogates of expensive black-box
//! functions.
//!
//! The pipeline: extract Taylor coefficients on a patch (finite differences
//! or exact oracles), embed them as a box tensor with the factorial feature
//! map carrying the factorials, compress by TT-SVD under a rank cap, bound
//! the pointwise error deterministically (truncation + K^N · compression),
//! and optionally refine by alternating-least-squares empirical risk
//! minimization warm-started from the certificate predictor. Calculators
//! for pseudo-dimension, uniform deviation, risk, and sample complexity
//! quantify the statistical side; a 6-qubit statevector oracle and seven
//! analytic function families drive the built-in studies.

pub mod certificate;
pub mod derivatives;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod families;
pub mod features;
pub mod quantum;
pub mod seed;
pub mod surrogate;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
