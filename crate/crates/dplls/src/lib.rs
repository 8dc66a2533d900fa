//! Simulation studies, the CMAPSS turbofan case study and the `dplls`
//! command-line tool, built on [`dplls_core`].
//!
//! ```no_run
//! use dplls::simgen::{sweep, Factor, SimConfig};
//! use dplls_core::Family;
//!
//! let config = SimConfig::new(Family::sev(), 10_000, 25, 0.5, 30, 0).unwrap();
//! let records = sweep(Factor::Epsilon, &config, &[0.3, 1.0, 2.0]).unwrap();
//! for r in &records {
//!     println!("{} {:?}", r.factor_value, r.dp_summary().map(|s| s.median));
//! }
//! ```

pub mod cli;
pub mod cmapss;
pub mod error;
pub mod record;
pub mod report;
pub mod simgen;

pub use dplls_core;
pub use error::{Error, Result};
pub use record::{ArmPool, ExperimentRecord, TrialOutcome};
