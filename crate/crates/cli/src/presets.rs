//! Figure presets: two users at 4 and 6, base station at 0, path-loss
//! exponent 3, 0 dB noise, spreading gain 16.

use coopmud::detectors::DetectorKind;
use coopmud::harness::{DetectorSetting, StoppingRule, SweepParameter, SweepSpec, Variant};

use crate::config::RunConfig;

pub const PRESET_IDS: [&str; 9] = [
    "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "fig7",
];

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n)
        .map(|i| start + step * i as f64)
        .map(round9)
        .collect()
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn setting(kind: DetectorKind, powers: &[f64]) -> DetectorSetting {
    DetectorSetting {
        kind,
        tx_power_db: powers.to_vec(),
    }
}

fn power_sweep(kind: DetectorKind, grid: Vec<f64>) -> SweepSpec {
    let mut s = SweepSpec::new(SweepParameter::TxPowerDb, grid, vec![setting(kind, &[])]);
    s.bounds = true;
    s.analytic = true;
    s.stop_below = Some(1e-4);
    s.stopping = StoppingRule {
        min_errors: 1000,
        max_bits: 10_000_000,
    };
    s
}

fn location_sweep(kind: DetectorKind, power: f64) -> SweepSpec {
    let mut s = SweepSpec::new(
        SweepParameter::RelayPosition,
        grid(0.5, 3.5, 0.1),
        vec![setting(kind, &[power])],
    );
    s.analytic = true;
    s.stopping = StoppingRule {
        min_errors: 1000,
        max_bits: 2_000_000,
    };
    s
}

fn user_count_sweep(kind: DetectorKind, powers: &[f64]) -> SweepSpec {
    let mut s = SweepSpec::new(
        SweepParameter::UserCount,
        grid(2.0, 6.0, 1.0),
        vec![setting(kind, powers)],
    );
    s.variants = vec![Variant::NoRelay, Variant::RelayXor];
    s.stopping = StoppingRule {
        min_errors: 500,
        max_bits: 2_000_000,
    };
    s
}

fn coding_size_sweep() -> SweepSpec {
    let mut s = SweepSpec::new(
        SweepParameter::CodedSetSize,
        grid(1.0, 6.0, 1.0),
        vec![
            setting(DetectorKind::Sic, &[30.0, 40.0]),
            setting(DetectorKind::Optimal, &[16.7, 23.3]),
        ],
    );
    s.coding_users = 6;
    s.variants = vec![Variant::RelayXor];
    s.analytic = true;
    s.stopping = StoppingRule {
        min_errors: 500,
        max_bits: 1_000_000,
    };
    s
}

/// The run configuration of a figure, or `None` for an unknown id.
pub fn preset(id: &str) -> Option<RunConfig> {
    use DetectorKind::{Optimal, Sic};
    let sweep = match id {
        "fig3a" => power_sweep(Sic, grid(0.0, 50.0, 1.0)),
        "fig3b" => power_sweep(Optimal, grid(16.0, 32.0, 0.25)),
        "fig4a" => location_sweep(Sic, 40.0),
        "fig4b" => location_sweep(Optimal, 30.0),
        "fig5a" => location_sweep(Sic, 30.0),
        "fig5b" => location_sweep(Optimal, 20.0),
        "fig6a" => user_count_sweep(Sic, &[20.0, 30.0, 40.0, 50.0]),
        "fig6b" => user_count_sweep(Optimal, &[10.0, 16.7, 23.3, 30.0]),
        "fig7" => coding_size_sweep(),
        _ => return None,
    };
    Some(RunConfig::new(id, sweep))
}
