//! File formats, model clients, the annotation service and the `cre`
//! command line on top of [`cre_core`].
//!
//! Record layouts and the HTTP protocols are described in `docs/formats.md`.

pub mod annotation;
pub mod cli;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod predictors;
pub mod remote;
pub mod report;
pub mod schema_file;

pub use cre_core;
pub use error::{Error, Result};
