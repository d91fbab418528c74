//! Numerical laboratory for unbounded spin systems: Young-function calculus,
//! nearest-neighbour Gibbs specifications on the integer lattice, sweeping
//! operators, functional-inequality constants and concentration bounds, all
//! wired into reproducible command-line experiments.

pub mod concentration;
pub mod config;
pub mod error;
pub mod functionals;
pub mod gaussian;
pub mod grid_fn;
pub mod guide;
pub mod lattice;
pub mod measure;
pub mod model;
pub mod orlicz;
pub mod perturbation;
pub mod report;
pub mod sampler;
pub mod scenarios;
pub mod sweep;

pub use error::{Error, Result};
