//! Library side of the experiment runner: configuration schema, the
//! subcommand runners, and the acceptance suite shared between the
//! `verify` subcommand and the integration tests.

pub mod acceptance;
pub mod config;
pub mod runner;
