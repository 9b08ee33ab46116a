//! Storage and solar investment sizing for a household on a two-period
//! time-of-use tariff with net metering, and a per-day billing simulator for
//! checking the resulting costs against interval meter data.
//!
//! The crate is organised bottom-up:
//!
//! - [`tariff`]: prices, amortized capital costs, the peak/off-peak split and
//!   the panel conversion, plus the storage fractile.
//! - [`ingest`]: interval CSV parsing, daily aggregation and a synthetic
//!   dataset generator.
//! - [`dist`]: ECDF and Gaussian-KDE distributions of daily quantities.
//! - [`sizing`]: closed-form storage and solar rules and brute-force scans.
//! - [`billing`]: realized daily costs and monthly/annual reports.
//! - [`config`]: the key/value run configuration.

pub mod billing;
pub mod config;
pub mod dist;
pub mod error;
pub mod ingest;
pub mod sizing;
pub mod tariff;

pub use error::{Error, ErrorKind, Result};
