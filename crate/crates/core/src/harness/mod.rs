//! Monte Carlo experiment engine: BER estimates with confidence intervals,
//! reproducible parallel execution, and parameter sweeps.

mod estimate;
mod stats;
mod sweep;

pub use estimate::{
    derive_seed, estimate_ber, estimate_ber_with, frame_seed, BerEstimate, RelayTally, RunOptions,
    StoppingRule, UserTally,
};
pub use stats::{binomial_std_error, wilson_interval, Z95};
pub use sweep::{
    draw_user_positions, nearest_users, run_coding_size_sweep, run_power_sweep,
    run_relay_location_sweep, run_sweep, run_user_count_sweep, special_case_params,
    DetectorSetting, Placement, SweepParameter, SweepRow, SweepSpec, SweepTable, Variant,
};
