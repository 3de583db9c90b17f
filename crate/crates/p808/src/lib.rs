//! File formats, pipeline stages and platform plumbing on top of `p808-core`.

pub mod io;
pub mod ledger;
pub mod pipeline;

pub use p808_core as core;
