//! Cooperative uplink CDMA with multiuser detection and network-coded
//! relaying.
//!
//! * [`sysmodel`]: geometry, amplitudes, signatures, matched-filter outputs.
//! * [`detectors`]: matched filter, successive cancellation, exhaustive ML and
//!   their analytic BER approximations.
//! * [`protocols`]: two-stage relay frames, relay selection and bounds.
//! * [`analysis`]: asymptotic efficiency, coding-set size, large-system limits.
//! * [`harness`]: reproducible Monte Carlo estimation and figure sweeps.

// Range checks are written `!(x >= 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod protocols;
pub mod sysmodel;

pub use error::{Error, Result};
