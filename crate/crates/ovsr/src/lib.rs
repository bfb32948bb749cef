//! Files, frame directories and the command-line driver around
//! [`ovsr_core`].

pub mod bench;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod frames;
pub mod report;

pub use commands::{run, Command, Outcome};
pub use config::RunConfig;
pub use error::{Error, Result};
