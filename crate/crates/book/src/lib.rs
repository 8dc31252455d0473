//! The guide's chapters as doc modules, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}
#[doc = include_str!("../../../book/src/connectivity.md")]
pub mod connectivity {}
#[doc = include_str!("../../../book/src/nmf.md")]
pub mod nmf {}
#[doc = include_str!("../../../book/src/boosting.md")]
pub mod boosting {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
