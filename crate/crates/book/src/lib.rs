//! The guide's chapters, compiled as doc comments so `cargo test` runs every listing.
//!
//! One module per chapter keeps failures traceable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/liouville.md")]
pub mod liouville {}

#[doc = include_str!("../../../book/src/frames.md")]
pub mod frames {}

#[doc = include_str!("../../../book/src/spin.md")]
pub mod spin {}

#[doc = include_str!("../../../book/src/estimation.md")]
pub mod estimation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
