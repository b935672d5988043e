//! Batch runner, run manifests and HTTP job API for the geoseg toolkit.
//!
//! A run is described by a TOML [`config::RunConfig`]: an input volume, an
//! optional ROI and a chain of stages. [`manifest::run`] executes it and
//! writes a manifest with content digests of the inputs and of every stage
//! product; [`manifest::replay`] repeats it and reports any digest that
//! changed. The HTTP API in [`api`] drives the same stages as queued jobs.

pub mod api;
pub mod config;
pub mod error;
pub mod hash;
pub mod jobs;
pub mod manifest;
pub mod render;
pub mod runner;
pub mod session;

pub use config::{RunConfig, Source, Stage};
pub use error::{Result, ServiceError};
pub use manifest::{replay, run, Manifest, Replay};
pub use session::Registry;
