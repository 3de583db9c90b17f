//! Core of a crowdsourced speech-quality testing toolkit (ACR, DCR and CCR
//! listening tests run as crowd tasks).
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std`; file formats, the CLI and the platform transport live in
//! the companion `p808` crate.

#![no_std]

extern crate alloc;

pub mod builder;
pub mod certificate;
pub mod cleansing;
pub mod config;
pub mod dist;
pub mod error;
pub mod ingest;
pub mod model;
pub mod platform;
pub mod simulator;
pub mod stats;
pub mod table;

pub use error::{ConfigError, IngestError, ModelError, PlanError, SimError, StatsError};
