//! Experiment harness for `glassflow_core`: configuration, file formats,
//! parallel drivers and the desk-scale experiment suite.

pub mod config;
pub mod experiments;
pub mod io;
pub mod parallel;

pub use glassflow_core as core;
