//! Monte Carlo BER estimation with reproducible parallel batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{wilson_interval, Z95};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::protocols::{FrameSimulator, RelayAssignment, Scenario};

/// Stop at `min_errors` errors or `max_bits` bits, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
}

fn default_min_errors() -> u64 {
    200
}

fn default_max_bits() -> u64 {
    100_000_000
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_errors: default_min_errors(),
            max_bits: default_max_bits(),
        }
    }
}

impl StoppingRule {
    pub fn new(min_errors: u64, max_bits: u64) -> Result<Self> {
        let rule = Self {
            min_errors,
            max_bits,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 || self.max_bits == 0 {
            return Err(Error::Config(
                "stopping rule needs min_errors >= 1 and max_bits >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Execution settings. Results depend on `batch_frames` but never on
/// `workers`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub workers: usize,
    pub batch_frames: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            batch_frames: 1024,
        }
    }
}

impl RunOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Per-user counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTally {
    pub user: usize,
    pub bits: u64,
    /// Errors after combining.
    pub errors: u64,
    /// Errors of the first-stage base-station decision alone.
    pub stage1_errors: u64,
}

impl UserTally {
    pub fn ber(&self) -> f64 {
        ratio(self.errors, self.bits)
    }

    pub fn stage1_ber(&self) -> f64 {
        ratio(self.stage1_errors, self.bits)
    }
}

/// Per-relay counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayTally {
    pub relay: usize,
    pub frames: u64,
    /// Frames in which the relay sent in the second stage.
    pub transmitted: u64,
    /// Base-station errors on the relayed bit.
    pub relayed_errors: u64,
    /// Relay decisions and their errors, indexed by terminal.
    pub decode_bits: Vec<u64>,
    pub decode_errors: Vec<u64>,
}

impl RelayTally {
    /// Error rate of the relay's decision on `user`.
    pub fn decode_ber(&self, user: usize) -> f64 {
        ratio(self.decode_errors[user], self.decode_bits[user])
    }

    pub fn relayed_ber(&self) -> f64 {
        ratio(self.relayed_errors, self.transmitted)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Aggregate BER over all source bits of the simulated frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub frames: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// No errors were seen; `ci_high` is the meaningful figure.
    pub censored: bool,
    pub per_user: Vec<UserTally>,
    pub relays: Vec<RelayTally>,
}

impl BerEstimate {
    fn from_tally(t: Tally) -> Self {
        let errors: u64 = t.users.iter().map(|u| u.errors).sum();
        let bits: u64 = t.users.iter().map(|u| u.bits).sum();
        let (ci_low, ci_high) = wilson_interval(errors, bits, Z95);
        Self {
            errors,
            bits,
            frames: t.frames,
            ber: ratio(errors, bits),
            ci_low,
            ci_high,
            censored: errors == 0,
            per_user: t.users,
            relays: t.relays,
        }
    }

    /// `ber`, or the upper confidence limit when censored.
    pub fn reported(&self) -> f64 {
        if self.censored {
            self.ci_high
        } else {
            self.ber
        }
    }

    pub fn user(&self, user: usize) -> Option<&UserTally> {
        self.per_user.iter().find(|u| u.user == user)
    }

    pub fn relay(&self, relay: usize) -> Option<&RelayTally> {
        self.relays.iter().find(|r| r.relay == relay)
    }
}

#[derive(Debug, Clone)]
struct Tally {
    frames: u64,
    users: Vec<UserTally>,
    relays: Vec<RelayTally>,
}

impl Tally {
    fn new(sources: &[usize], assignments: &[RelayAssignment], k: usize) -> Self {
        Self {
            frames: 0,
            users: sources
                .iter()
                .map(|&user| UserTally {
                    user,
                    bits: 0,
                    errors: 0,
                    stage1_errors: 0,
                })
                .collect(),
            relays: assignments
                .iter()
                .map(|a| RelayTally {
                    relay: a.relay,
                    frames: 0,
                    transmitted: 0,
                    relayed_errors: 0,
                    decode_bits: vec![0; k],
                    decode_errors: vec![0; k],
                })
                .collect(),
        }
    }

    fn errors(&self) -> u64 {
        self.users.iter().map(|u| u.errors).sum()
    }

    fn bits(&self) -> u64 {
        self.users.iter().map(|u| u.bits).sum()
    }

    fn merge(&mut self, o: &Tally) {
        self.frames += o.frames;
        for (a, b) in self.users.iter_mut().zip(&o.users) {
            a.bits += b.bits;
            a.errors += b.errors;
            a.stage1_errors += b.stage1_errors;
        }
        for (a, b) in self.relays.iter_mut().zip(&o.relays) {
            a.frames += b.frames;
            a.transmitted += b.transmitted;
            a.relayed_errors += b.relayed_errors;
            for (x, y) in a.decode_bits.iter_mut().zip(&b.decode_bits) {
                *x += y;
            }
            for (x, y) in a.decode_errors.iter_mut().zip(&b.decode_errors) {
                *x += y;
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a sub-experiment identified by `path` under `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of frame `index`.
pub fn frame_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

fn run_batch(
    scenario: &Scenario,
    assignments: &[RelayAssignment],
    detector: DetectorKind,
    seed: u64,
    frames: std::ops::Range<u64>,
) -> Result<Tally> {
    let mut sim = FrameSimulator::new(scenario, assignments, detector)?;
    let mut out = sim.new_outcome();
    let mut t = Tally::new(sim.sources(), assignments, scenario.topology.terminals());
    for f in frames {
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, f));
        sim.run(&mut rng, &mut out)?;
        t.frames += 1;
        for u in t.users.iter_mut() {
            u.bits += 1;
            u.errors += u64::from(!out.correct[u.user]);
            u.stage1_errors += u64::from(!out.stage1_correct[u.user]);
        }
        for (slot, r) in t.relays.iter_mut().enumerate() {
            r.frames += 1;
            r.transmitted += u64::from(out.relay_transmitted[slot]);
            r.relayed_errors += u64::from(out.relayed_bit_correct[slot] == Some(false));
            for (m, d) in out.relay_decoded[slot].iter().enumerate() {
                if let Some(ok) = d {
                    r.decode_bits[m] += 1;
                    r.decode_errors[m] += u64::from(!ok);
                }
            }
        }
    }
    Ok(t)
}

/// BER of the scenario's sources with the default execution settings.
pub fn estimate_ber(
    scenario: &Scenario,
    assignments: &[RelayAssignment],
    detector: DetectorKind,
    rule: StoppingRule,
    seed: u64,
) -> Result<BerEstimate> {
    estimate_ber_with(
        scenario,
        assignments,
        detector,
        rule,
        seed,
        &RunOptions::default(),
    )
}

/// Simulates fixed-size batches of frames, each frame seeded from
/// `(seed, frame index)`, and checks the stopping rule after every batch in
/// batch order. Batches are computed `workers` at a time; surplus batches
/// past the stopping point are discarded.
pub fn estimate_ber_with(
    scenario: &Scenario,
    assignments: &[RelayAssignment],
    detector: DetectorKind,
    rule: StoppingRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<BerEstimate> {
    rule.validate()?;
    if opts.workers == 0 || opts.batch_frames == 0 {
        return Err(Error::Config(
            "workers and batch_frames must be positive".into(),
        ));
    }
    // Validates the assignments once up front.
    let probe = FrameSimulator::new(scenario, assignments, detector)?;
    let bpf = probe.bits_per_frame() as u64;
    let k = scenario.topology.terminals();
    let mut total = Tally::new(probe.sources(), assignments, k);
    drop(probe);
    if bpf == 0 {
        return Err(Error::Config("scenario has no sources".into()));
    }
    let max_frames = rule.max_bits.div_ceil(bpf);
    let batches = max_frames.div_ceil(opts.batch_frames);
    let range = |b: u64| b * opts.batch_frames..((b + 1) * opts.batch_frames).min(max_frames);
    let done = |t: &Tally| t.errors() >= rule.min_errors || t.bits() >= rule.max_bits;

    if opts.workers == 1 {
        for b in 0..batches {
            total.merge(&run_batch(scenario, assignments, detector, seed, range(b))?);
            if done(&total) {
                break;
            }
        }
        return Ok(BerEstimate::from_tally(total));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let group = opts.workers as u64;
    pool.install(|| -> Result<()> {
        let mut b0 = 0;
        while b0 < batches {
            let b1 = (b0 + group).min(batches);
            let tallies: Vec<Result<Tally>> = (b0..b1)
                .into_par_iter()
                .map(|b| run_batch(scenario, assignments, detector, seed, range(b)))
                .collect();
            for t in tallies {
                total.merge(&t?);
                if done(&total) {
                    return Ok(());
                }
            }
            b0 = b1;
        }
        Ok(())
    })?;
    Ok(BerEstimate::from_tally(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::q_function;
    use crate::protocols::Schedule;
    use crate::sysmodel::{LinkGains, Topology};

    fn single_user(amp: f64, sigma: f64) -> Scenario {
        let topo = Topology::new(0.0, vec![1.0], vec![], 3.0).unwrap();
        let gains = LinkGains::from_amplitudes(vec![amp], vec![], vec![], sigma).unwrap();
        Scenario::with_gains(topo, gains, 16).unwrap()
    }

    #[test]
    fn noiseless_run_is_censored() {
        let sc = single_user(1.0, 1e-9);
        let est = estimate_ber_with(
            &sc,
            &[],
            DetectorKind::MatchedFilter,
            StoppingRule::new(10, 5000).unwrap(),
            1,
            &RunOptions::default().with_workers(1),
        )
        .unwrap();
        assert_eq!(est.errors, 0);
        assert_eq!(est.bits, 5000);
        assert!(est.censored);
        assert_eq!(est.reported(), est.ci_high);
        assert!(est.ci_high > 0.0 && est.ci_high < 1e-3);
    }

    #[test]
    fn single_user_matches_q() {
        let sc = single_user(1.0, 0.8);
        let p = q_function(1.0 / 0.8);
        let est = estimate_ber_with(
            &sc,
            &[],
            DetectorKind::MatchedFilter,
            StoppingRule::new(u64::MAX, 200_000).unwrap(),
            9,
            &RunOptions::default().with_workers(1),
        )
        .unwrap();
        assert_eq!(est.bits, 200_000);
        let se = (p * (1.0 - p) / est.bits as f64).sqrt();
        assert!((est.ber - p).abs() <= 3.0 * se, "{} vs {p}", est.ber);
        assert!(est.ci_low <= est.ber && est.ber <= est.ci_high);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let topo = Topology::new(0.0, vec![4.0, 6.0, 1.6], vec![2], 3.0).unwrap();
        let sc = Scenario::new(topo, 22.0, 1.0, 16).unwrap();
        let xor = [RelayAssignment::xor(2, vec![0, 1]).unwrap()];
        let rule = StoppingRule::new(50, 400_000).unwrap();
        let opts = RunOptions {
            workers: 1,
            batch_frames: 256,
        };
        let a = estimate_ber_with(&sc, &xor, DetectorKind::Sic, rule, 4, &opts).unwrap();
        for w in [2, 3, 8] {
            let b = estimate_ber_with(&sc, &xor, DetectorKind::Sic, rule, 4, &opts.with_workers(w))
                .unwrap();
            assert_eq!(a, b);
        }
        assert!(a.errors >= 50);
        assert_eq!(a.bits % 2, 0);
        let c = estimate_ber_with(&sc, &xor, DetectorKind::Sic, rule, 5, &opts).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn relay_tallies_are_consistent() {
        let topo = Topology::new(0.0, vec![4.0, 6.0, 1.6], vec![2], 3.0).unwrap();
        let sc = Scenario::new(topo, 15.0, 1.0, 16)
            .unwrap()
            .with_schedule(Schedule::Isolated);
        let xor = [RelayAssignment::xor(2, vec![0, 1]).unwrap()];
        let est = estimate_ber_with(
            &sc,
            &xor,
            DetectorKind::Optimal,
            StoppingRule::new(u64::MAX, 20_000).unwrap(),
            2,
            &RunOptions::default().with_workers(1),
        )
        .unwrap();
        let r = est.relay(2).unwrap();
        assert_eq!(r.frames, est.frames);
        assert_eq!(r.decode_bits[0], est.frames);
        assert_eq!(r.decode_bits[2], 0);
        assert!(r.transmitted <= r.frames);
        for u in &est.per_user {
            assert!(u.errors <= u.stage1_errors);
        }
    }

    #[test]
    fn seeds_are_spread() {
        assert_ne!(frame_seed(1, 0), frame_seed(1, 1));
        assert_ne!(frame_seed(1, 0), frame_seed(2, 0));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }
}
