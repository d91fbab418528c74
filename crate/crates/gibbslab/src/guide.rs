//! The book chapters from `book/src`, included verbatim so every code
//! block in the guide compiles and runs as a doc-test. If a chapter
//! drifts from the library, `cargo test` breaks.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/young-functions.md")]
pub mod young_functions {}

#[doc = include_str!("../../../book/src/lattice.md")]
pub mod lattice_geometry {}

#[doc = include_str!("../../../book/src/local-specification.md")]
pub mod local_specification {}

#[doc = include_str!("../../../book/src/functional-inequalities.md")]
pub mod functional_inequalities {}

#[doc = include_str!("../../../book/src/sweeping.md")]
pub mod sweeping {}

#[doc = include_str!("../../../book/src/concentration.md")]
pub mod concentration_bounds {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
