//! Second-life battery state-of-health estimation toolkit.
//!
//! The pipeline runs from raw telemetry to capacity estimates:
//!
//! 1. [`data`] parses telemetry, integrates current and power, and segments
//!    aging cycles and RPT sessions.
//! 2. [`sim`] generates synthetic telemetry with known ground-truth capacity.
//! 3. [`features`] extracts the six snapshot features and aligns them with
//!    C/20 capacity labels.
//! 4. [`selection`] ranks features by mRMR.
//! 5. [`regression`] fits and evaluates the elastic-net capacity model.
//! 6. [`adaptive`] corrects offline estimates online with a bounded clip.
//! 7. [`pipeline`] ties the stages to files for the command-line tool.

pub mod adaptive;
pub mod data;
pub mod error;
pub mod features;
mod fsutil;
pub mod pipeline;
pub mod regression;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
