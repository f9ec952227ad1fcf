//! Command-line verbs and the local scenario service.

pub mod cli;
pub mod service;
