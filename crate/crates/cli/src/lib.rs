//! Command-line front end and live stream server for the headzoom engine.

pub mod commands;
pub mod config;
pub mod protocol;
pub mod serve;
