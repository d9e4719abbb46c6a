//! The user guide, compiled as doc-tests. Each chapter of `book/` is
//! included as a module's documentation so every fenced example in the book
//! is built and run by `cargo test --doc`, keeping the guide honest.
//!
//! Render the browsable version with `mdbook build book/`; read it straight
//! from `book/src/` otherwise. The modules below are empty on purpose — they
//! exist to carry the chapter text.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
