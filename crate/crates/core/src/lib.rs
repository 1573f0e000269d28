//! Spiked sparse random matrices: instance generation, matrix-free
//! eigensolvers, population dynamics for the cavity equations, and
//! closed-form predictions for the top eigenpair.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ensembles;
pub mod error;
pub mod farm;
pub mod graphgen;
pub mod observables;
pub mod popdyn;
pub mod seeding;
pub mod spectral;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
