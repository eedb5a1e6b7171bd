//! Command-line front end: configuration, commands, result files and the
//! operator cache.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;
