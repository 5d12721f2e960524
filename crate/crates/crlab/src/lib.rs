//! Batch driver for the `crlab-core` identity suites.
//!
//! A run is described by a [`config::RunConfig`], evaluates the selected
//! suites in dependency order and produces one [`record::ReportRecord`] per
//! family and sample, written as JSON lines.

pub mod cli;
pub mod config;
pub mod record;
pub mod sampling;
pub mod suites;
pub mod summary;
