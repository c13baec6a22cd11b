//! Filesystem formats, lookup caching, parallel drivers, reports and the
//! command line around `descsel-core`.

pub mod cache;
pub mod cli;
pub mod error;
pub mod export;
pub mod parallel;
pub mod report;
pub mod storefs;

pub use error::{Error, Result};
pub use storefs::{load_store, save_store};
