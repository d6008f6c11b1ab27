//! Estimation of the w-madogram and the Pickands dependence function of
//! extreme-value copulas from data with entries missing completely at
//! random, together with the closed-form asymptotic variances of the
//! estimators, Monte Carlo experiments that check them, and an
//! equal-size clustering pipeline reporting extremal coefficients.

pub mod data;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod clusters;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod simplex;
pub mod special;
pub mod variance;

pub use error::{Error, Result};
pub use models::{ModelSpec, PickandsModel};
pub use simplex::Weights;
