//! Loop soups, layering fields and tilted imaginary Gaussian multiplicative chaos.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos_convergence;
pub mod cli;
pub mod error;
pub mod gaussian_gmc;
pub mod geometry;
pub mod hull;
pub mod integrability_checks;
pub mod layering_fields;
pub mod loop_measures;
pub mod numerics;
pub mod rng;
pub mod sobolev;
pub mod special;

pub use error::{Error, Result};
