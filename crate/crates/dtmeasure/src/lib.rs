//! Text-based digital-transformation indicators from annual reports:
//! file formats, staged pipeline with provenance, annotation service,
//! remote classifier client and the command-line front end's library.

pub mod config;
pub mod error;
pub mod eventlog;
pub mod formats;
pub mod montecarlo;
pub mod pipeline;
pub mod provenance;
pub mod remote;
pub mod report;
pub mod service;

pub use error::{Error, Result};
