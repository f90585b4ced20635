//! Simulation and estimation laboratory for selective-mortality bias in
//! sibling fixed-effects designs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! piece: famine exposure construction, a structural data generating
//! process with gender-specific selection, a multi-way fixed-effects least
//! squares engine with cluster-robust inference, analytic and brute-force
//! oracles for the selection-bias results, and the regression battery that
//! ties them together. File formats, configuration parsing and the command
//! line live in the `gsfe` companion crate.

#![no_std]

extern crate alloc;

pub mod dgp;
pub mod error;
pub mod exposure;
pub mod fe;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod panel;
pub mod quad;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
