//! The chapters of the guide in `book/src`, included as module docs so that
//! `cargo test` runs every code block against the current API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/mean-field.md")]
pub mod mean_field {}

#[doc = include_str!("../../../book/src/lindblad.md")]
pub mod lindblad {}

#[doc = include_str!("../../../book/src/observables.md")]
pub mod observables {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
