//! Command-line entry points and the annotation service.

pub mod commands;
pub mod error;
pub mod service;
