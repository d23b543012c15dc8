//! File formats, URDF import, parallel suite evaluation and the command
//! line for `articflow-core`.

pub use articflow_core as core;

pub mod cli;
pub mod cloud_io;
pub mod config;
pub mod depth_io;
pub mod error;
pub mod native;
pub mod records;
pub mod suite;
pub mod urdf;
pub mod validate;

pub use error::{Error, Result};
