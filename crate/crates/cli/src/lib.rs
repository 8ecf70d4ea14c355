//! Command-line front end for `coopmud`: TOML run configurations, figure
//! presets, CSV/JSON emission and analytic calculators.
//!
//! Exit codes: `0` success, `2` invalid configuration or arguments, `3`
//! domain, capacity, solver or output errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
