//! Command-line front end for the planner: configuration, pipeline stages,
//! benchmarking and figures.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod stages;
pub mod study;
pub mod svg;
