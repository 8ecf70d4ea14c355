//! Parameter sweeps over transmit power, relay position, user count and
//! coded-set size.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::estimate::{derive_seed, estimate_ber_with, BerEstimate, RunOptions, StoppingRule};
use crate::analysis::{special_case_avg_ber, SpecialCaseParams};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::protocols::{
    bound_perfect_source_relay, bound_perfect_source_relay_optimal,
    bound_perfect_source_relay_optimal_random, link_profile, user_ber, CodeModel, Protocol,
    RelayAssignment, Scenario, Schedule,
};
use crate::sysmodel::{CorrelationMatrix, Topology};

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    TxPowerDb,
    RelayPosition,
    UserCount,
    CodedSetSize,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::TxPowerDb => "tx-power-db",
            Self::RelayPosition => "relay-position",
            Self::UserCount => "user-count",
            Self::CodedSetSize => "coded-set-size",
        }
    }
}

/// Simulated protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    NoRelay,
    /// Protocol 1 forwarding user `n` (1-based).
    RelayUser(usize),
    /// Protocol 2 forwarding the XOR of the sweep's coded set.
    RelayXor,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoRelay => f.write_str("no-relay"),
            Self::RelayUser(n) => write!(f, "relay-user-{n}"),
            Self::RelayXor => f.write_str("relay-xor"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-relay" => Ok(Self::NoRelay),
            "relay-xor" => Ok(Self::RelayXor),
            _ => s
                .strip_prefix("relay-user-")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .map(Self::RelayUser)
                .ok_or_else(|| Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> Self {
        v.to_string()
    }
}

impl Variant {
    fn code(self) -> u64 {
        match self {
            Self::NoRelay => 0,
            Self::RelayXor => 1,
            Self::RelayUser(n) => 100 + n as u64,
        }
    }
}

/// A detector and the transmit powers it is run at. Powers are ignored by
/// power sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSetting {
    pub kind: DetectorKind,
    #[serde(default)]
    pub tx_power_db: Vec<f64>,
}

fn default_users() -> Vec<f64> {
    vec![4.0, 6.0]
}
fn default_relay() -> f64 {
    1.6
}
fn default_gamma() -> f64 {
    3.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_gain() -> usize {
    16
}
fn default_schedule() -> Schedule {
    Schedule::Pipelined
}
fn default_variants() -> Vec<Variant> {
    vec![
        Variant::NoRelay,
        Variant::RelayUser(1),
        Variant::RelayUser(2),
        Variant::RelayXor,
    ]
}
fn default_seed() -> u64 {
    1
}
fn default_range() -> [f64; 2] {
    [4.0, 8.0]
}
fn default_coding_users() -> usize {
    6
}
fn default_xor_users() -> usize {
    2
}
fn default_draws() -> usize {
    200
}

/// Full description of a sweep. Positions are distances from the base
/// station at `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    #[serde(default = "default_users")]
    pub user_positions: Vec<f64>,
    #[serde(default = "default_relay")]
    pub relay_position: f64,
    #[serde(default = "default_gamma")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_gain")]
    pub spreading_gain: usize,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default)]
    pub orthogonal_codes: bool,
    pub detectors: Vec<DetectorSetting>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    /// Adds `bound-1` and `bound-2` rows; needs the relay-XOR variant.
    #[serde(default)]
    pub bounds: bool,
    /// Adds `analytic-*` rows from the link-level formulas.
    #[serde(default)]
    pub analytic: bool,
    #[serde(default)]
    pub stopping: StoppingRule,
    /// A simulated series stops once its BER falls below this value.
    #[serde(default)]
    pub stop_below: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seed of the random user placements of user-count and coded-set-size
    /// sweeps.
    #[serde(default = "default_seed")]
    pub placement_seed: u64,
    #[serde(default = "default_range")]
    pub placement_range: [f64; 2],
    /// Number of users of a coded-set-size sweep.
    #[serde(default = "default_coding_users")]
    pub coding_users: usize,
    /// Size of the nearest-user XOR set in user-count sweeps.
    #[serde(default = "default_xor_users")]
    pub xor_users: usize,
    /// Signature draws for the ML bound with more than two users.
    #[serde(default = "default_draws")]
    pub bound_draws: usize,
}

impl SweepSpec {
    /// Two users at 4 and 6, relay at 1.6, default stopping rule.
    pub fn new(parameter: SweepParameter, grid: Vec<f64>, detectors: Vec<DetectorSetting>) -> Self {
        Self {
            parameter,
            grid,
            user_positions: default_users(),
            relay_position: default_relay(),
            path_loss_exponent: default_gamma(),
            noise_std: default_noise(),
            spreading_gain: default_gain(),
            schedule: default_schedule(),
            orthogonal_codes: false,
            detectors,
            variants: default_variants(),
            bounds: false,
            analytic: false,
            stopping: StoppingRule::default(),
            stop_below: None,
            seed: default_seed(),
            placement_seed: default_seed(),
            placement_range: default_range(),
            coding_users: default_coding_users(),
            xor_users: default_xor_users(),
            bound_draws: default_draws(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return bad("grid values must be finite".into());
        }
        self.stopping.validate()?;
        if self.detectors.is_empty() {
            return bad("at least one detector is needed".into());
        }
        if self.parameter != SweepParameter::TxPowerDb {
            if let Some(d) = self.detectors.iter().find(|d| d.tx_power_db.is_empty()) {
                return bad(format!(
                    "detector {} needs at least one tx_power_db",
                    d.kind
                ));
            }
        }
        if self.variants.is_empty() && !self.analytic {
            return bad("no variants to evaluate".into());
        }
        if self.bounds && !self.variants.contains(&Variant::RelayXor) {
            return bad("bounds need the relay-xor variant".into());
        }
        let [lo, hi] = self.placement_range;
        if !(0.0 < lo && lo <= hi) {
            return bad("placement_range must satisfy 0 < low <= high".into());
        }
        let counts: Vec<usize> = match self.parameter {
            SweepParameter::UserCount => self.grid_as_counts()?,
            SweepParameter::CodedSetSize => {
                let sizes = self.grid_as_counts()?;
                if let Some(&m) = sizes.iter().find(|&&m| m > self.coding_users) {
                    return bad(format!(
                        "coded-set size {m} exceeds {} users",
                        self.coding_users
                    ));
                }
                vec![self.coding_users]
            }
            _ => vec![self.user_positions.len()],
        };
        for n in counts {
            if let Some(Variant::RelayUser(u)) = self
                .variants
                .iter()
                .find(|v| matches!(v, Variant::RelayUser(u) if *u > n))
            {
                return bad(format!("variant relay-user-{u} needs at least {u} users"));
            }
            if n == 0 {
                return bad("at least one user is needed".into());
            }
        }
        if self.parameter == SweepParameter::UserCount && self.xor_users == 0 {
            return bad("xor_users must be at least 1".into());
        }
        Ok(())
    }

    fn grid_as_counts(&self) -> Result<Vec<usize>> {
        self.grid
            .iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::Config(format!(
                        "{} grid values must be positive integers, got {v}",
                        self.parameter.name()
                    )))
                }
            })
            .collect()
    }

    fn code_model(&self) -> CodeModel {
        if self.orthogonal_codes {
            CodeModel::Orthogonal
        } else {
            CodeModel::Random
        }
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    /// Series label: variant name, with `@<power>dB` when a detector runs at
    /// several powers in a non-power sweep.
    pub variant: String,
    pub detector: DetectorKind,
    pub tx_power_db: f64,
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored: bool,
    /// Simulation details; absent for bound and analytic rows.
    #[serde(skip)]
    pub estimate: Option<BerEstimate>,
}

impl SweepRow {
    fn value(
        sweep_value: f64,
        variant: String,
        detector: DetectorKind,
        tx_power_db: f64,
        v: f64,
    ) -> Self {
        Self {
            sweep_value,
            variant,
            detector,
            tx_power_db,
            ber: v,
            errors: 0,
            bits: 0,
            ci_low: v,
            ci_high: v,
            censored: false,
            estimate: None,
        }
    }

    fn simulated(
        sweep_value: f64,
        variant: String,
        detector: DetectorKind,
        tx_power_db: f64,
        e: BerEstimate,
    ) -> Self {
        Self {
            sweep_value,
            variant,
            detector,
            tx_power_db,
            ber: e.ber,
            errors: e.errors,
            bits: e.bits,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            censored: e.censored,
            estimate: Some(e),
        }
    }

    pub fn is_simulated(&self) -> bool {
        self.estimate.is_some()
    }
}

/// User positions drawn for one user count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub users: usize,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub placements: Vec<Placement>,
}

impl SweepTable {
    /// Rows of one series, in grid order.
    pub fn series<'a>(
        &'a self,
        variant: &'a str,
        detector: DetectorKind,
    ) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.variant == variant && r.detector == detector)
    }

    /// Distinct series labels in first-appearance order.
    pub fn labels(&self) -> Vec<(String, DetectorKind)> {
        let mut out: Vec<(String, DetectorKind)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(v, d)| *v == r.variant && *d == r.detector) {
                out.push((r.variant.clone(), r.detector));
            }
        }
        out
    }
}

/// `n` positions uniform on the placement range, reproducible from
/// `(placement_seed, n)`.
pub fn draw_user_positions(placement_seed: u64, n: usize, range: [f64; 2]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(placement_seed, &[n as u64]));
    (0..n)
        .map(|_| {
            if range[0] == range[1] {
                range[0]
            } else {
                rng.random_range(range[0]..range[1])
            }
        })
        .collect()
}

/// The `count` users closest to the relay; ties go to the lower index.
pub fn nearest_users(positions: &[f64], relay_position: f64, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..positions.len()).collect();
    idx.sort_by(|&a, &b| {
        let da = (positions[a] - relay_position).abs();
        let db = (positions[b] - relay_position).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

struct Point {
    index: usize,
    value: f64,
    users: Vec<f64>,
    relay: f64,
    coded: Vec<usize>,
}

struct Runner<'a> {
    spec: &'a SweepSpec,
    opts: &'a RunOptions,
    finished: HashSet<(String, usize)>,
    rows: Vec<SweepRow>,
}

impl Runner<'_> {
    fn scenario(&self, users: &[f64], relay: Option<f64>, power_db: f64) -> Result<Scenario> {
        let mut positions = users.to_vec();
        let relays = match relay {
            Some(r) => {
                positions.push(r);
                vec![users.len()]
            }
            None => vec![],
        };
        let topo = Topology::new(0.0, positions, relays, self.spec.path_loss_exponent)?;
        Ok(Scenario::new(
            topo,
            power_db,
            self.spec.noise_std,
            self.spec.spreading_gain,
        )?
        .with_schedule(self.spec.schedule)
        .with_code_model(self.spec.code_model()))
    }

    fn point(&mut self, p: &Point) -> Result<()> {
        let spec = self.spec;
        for (di, setting) in spec.detectors.iter().enumerate() {
            let powers = if spec.parameter == SweepParameter::TxPowerDb {
                vec![p.value]
            } else {
                setting.tx_power_db.clone()
            };
            let tag = spec.parameter != SweepParameter::TxPowerDb && powers.len() > 1;
            for (pi, &power) in powers.iter().enumerate() {
                let label = |name: &str| {
                    if tag {
                        format!("{name}@{power}dB")
                    } else {
                        name.to_string()
                    }
                };
                self.detector_point(p, di, setting.kind, pi, power, &label)?;
            }
        }
        Ok(())
    }

    fn detector_point(
        &mut self,
        p: &Point,
        di: usize,
        kind: DetectorKind,
        pi: usize,
        power: f64,
        label: &dyn Fn(&str) -> String,
    ) -> Result<()> {
        let spec = self.spec;
        let relay = p.users.len();
        let with_relay = self.scenario(&p.users, Some(p.relay), power)?;
        let without = self.scenario(&p.users, None, power)?;
        let series = di * 1000 + pi;
        let mut sims: Vec<(Variant, BerEstimate)> = Vec::new();
        for &v in &spec.variants {
            let name = label(&v.to_string());
            if self.finished.contains(&(name.clone(), series)) {
                continue;
            }
            let (scenario, assignment) = match v {
                Variant::NoRelay => (&without, None),
                Variant::RelayUser(n) => {
                    (&with_relay, Some(RelayAssignment::single(relay, n - 1)?))
                }
                Variant::RelayXor => (
                    &with_relay,
                    Some(RelayAssignment::xor(relay, p.coded.clone())?),
                ),
            };
            let seed = derive_seed(spec.seed, &[p.index as u64, di as u64, pi as u64, v.code()]);
            let est = estimate_ber_with(
                scenario,
                assignment.as_slice(),
                kind,
                spec.stopping,
                seed,
                self.opts,
            )?;
            if spec.stop_below.is_some_and(|t| est.ber < t) {
                self.finished.insert((name.clone(), series));
            }
            sims.push((v, est.clone()));
            self.rows
                .push(SweepRow::simulated(p.value, name, kind, power, est));
        }

        if spec.bounds {
            let find = |v: Variant| sims.iter().find(|(x, _)| *x == v).map(|(_, e)| e);
            // Both factors come from the relay-XOR frames, so the bound sees
            // the same first-stage interference as the protocol.
            if let Some(xor) = find(Variant::RelayXor) {
                let relay_tally = xor.relay(relay).expect("relay tally");
                let n = p.users.len() as f64;
                let b1 = (0..p.users.len())
                    .map(|j| {
                        let pd = xor.user(j).map_or(0.0, |u| u.stage1_ber());
                        if p.coded.contains(&j) {
                            pd * relay_tally.decode_ber(j)
                        } else {
                            pd
                        }
                    })
                    .sum::<f64>()
                    / n;
                self.rows
                    .push(SweepRow::value(p.value, label("bound-1"), kind, power, b1));
            }
            if let Some(b2) = self.bound2(
                p,
                kind,
                &with_relay,
                derive_seed(spec.seed, &[p.index as u64, di as u64, pi as u64, 7]),
            )? {
                self.rows
                    .push(SweepRow::value(p.value, label("bound-2"), kind, power, b2));
            }
        }

        if spec.analytic {
            for &v in &spec.variants {
                let (scenario, protocol, assignment) = match v {
                    Variant::NoRelay => (&without, Protocol::P2, None),
                    Variant::RelayUser(n) => (
                        &with_relay,
                        Protocol::P1,
                        Some(RelayAssignment::single(relay, n - 1)?),
                    ),
                    Variant::RelayXor => (
                        &with_relay,
                        Protocol::P2,
                        Some(RelayAssignment::xor(relay, p.coded.clone())?),
                    ),
                };
                let profile = link_profile(scenario, kind, protocol)?;
                let users = scenario.topology.sources();
                let mut total = 0.0;
                for &j in &users {
                    total += user_ber(j, assignment.as_ref(), &profile)?;
                }
                let name = label(&format!("analytic-{v}"));
                self.rows.push(SweepRow::value(
                    p.value,
                    name,
                    kind,
                    power,
                    total / users.len() as f64,
                ));
            }
            if spec.parameter == SweepParameter::CodedSetSize {
                let sc = special_case_params(&with_relay, kind, spec.coding_users, p.coded.len())?;
                let name = label("analytic-special-case");
                self.rows.push(SweepRow::value(
                    p.value,
                    name,
                    kind,
                    power,
                    special_case_avg_ber(&sc),
                ));
            }
        }
        Ok(())
    }

    /// Perfect source-relay bound, averaged over users. Coded users get the
    /// relay amplitude added to their own.
    fn bound2(
        &self,
        p: &Point,
        kind: DetectorKind,
        sc: &Scenario,
        seed: u64,
    ) -> Result<Option<f64>> {
        let spec = self.spec;
        let n = p.users.len();
        let to_bs = sc.gains.to_bs();
        let a = &to_bs[..n];
        let relay_amp = [to_bs[n]];
        let sigma = sc.sigma();
        let m = spec.spreading_gain;
        let mut total = 0.0;
        for j in 0..n {
            let relay: &[f64] = if p.coded.contains(&j) {
                &relay_amp
            } else {
                &[]
            };
            total += match kind {
                DetectorKind::MatchedFilter => return Ok(None),
                DetectorKind::Sic if spec.orthogonal_codes => {
                    crate::detectors::q_function((a[j] + relay.iter().sum::<f64>()) / sigma)
                }
                DetectorKind::Sic => bound_perfect_source_relay(a, relay, sigma, m, j)?[j],
                DetectorKind::Optimal if spec.orthogonal_codes => {
                    bound_perfect_source_relay_optimal(
                        a,
                        relay,
                        &CorrelationMatrix::identity(n),
                        sigma,
                        j,
                    )?
                }
                DetectorKind::Optimal => bound_perfect_source_relay_optimal_random(
                    a,
                    relay,
                    sigma,
                    m,
                    j,
                    spec.bound_draws,
                    seed,
                )?,
            };
        }
        Ok(Some(total / n as f64))
    }
}

/// Symmetric special-case parameters from the mean link error rates of a
/// one-relay scenario.
pub fn special_case_params(
    scenario: &Scenario,
    detector: DetectorKind,
    users: usize,
    coded: usize,
) -> Result<SpecialCaseParams> {
    let profile = link_profile(scenario, detector, Protocol::P2)?;
    let sources = scenario.topology.sources();
    let relay = *scenario
        .topology
        .relays()
        .first()
        .ok_or_else(|| Error::Config("special-case parameters need a relay".into()))?;
    let n = sources.len() as f64;
    let p_sd = sources.iter().map(|&j| profile.p_direct(j)).sum::<f64>() / n;
    let mut p_sr = 0.0;
    for &j in &sources {
        p_sr += profile.p_source_relay(j, relay)?;
    }
    SpecialCaseParams::new(p_sd, p_sr / n, profile.p_relay_bs(relay)?, users, coded)
}

fn run(spec: &SweepSpec, expected: SweepParameter, opts: &RunOptions) -> Result<SweepTable> {
    if spec.parameter != expected {
        return Err(Error::Config(format!(
            "expected a {} sweep, got {}",
            expected.name(),
            spec.parameter.name()
        )));
    }
    spec.validate()?;
    let mut runner = Runner {
        spec,
        opts,
        finished: HashSet::new(),
        rows: Vec::new(),
    };
    let mut placements = Vec::new();
    let all: Vec<usize> = (0..spec.user_positions.len()).collect();
    for (index, &value) in spec.grid.iter().enumerate() {
        let point = match spec.parameter {
            SweepParameter::TxPowerDb => Point {
                index,
                value,
                users: spec.user_positions.clone(),
                relay: spec.relay_position,
                coded: all.clone(),
            },
            SweepParameter::RelayPosition => Point {
                index,
                value,
                users: spec.user_positions.clone(),
                relay: value,
                coded: all.clone(),
            },
            SweepParameter::UserCount => {
                let n = value as usize;
                let users = draw_user_positions(spec.placement_seed, n, spec.placement_range);
                let coded = nearest_users(&users, spec.relay_position, spec.xor_users.min(n));
                placements.push(Placement {
                    users: n,
                    positions: users.clone(),
                });
                Point {
                    index,
                    value,
                    users,
                    relay: spec.relay_position,
                    coded,
                }
            }
            SweepParameter::CodedSetSize => {
                let n = spec.coding_users;
                let users = draw_user_positions(spec.placement_seed, n, spec.placement_range);
                if placements.is_empty() {
                    placements.push(Placement {
                        users: n,
                        positions: users.clone(),
                    });
                }
                let coded = nearest_users(&users, spec.relay_position, value as usize);
                Point {
                    index,
                    value,
                    users,
                    relay: spec.relay_position,
                    coded,
                }
            }
        };
        runner.point(&point)?;
    }
    Ok(SweepTable {
        parameter: spec.parameter,
        rows: runner.rows,
        placements,
    })
}

/// Average BER against transmit power (dB) for a fixed relay position.
pub fn run_power_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable> {
    run(spec, SweepParameter::TxPowerDb, opts)
}

/// Average BER against relay position at fixed powers.
pub fn run_relay_location_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable> {
    run(spec, SweepParameter::RelayPosition, opts)
}

/// Average BER against the number of users, placed at random; the relay
/// codes the users nearest to it.
pub fn run_user_count_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable> {
    run(spec, SweepParameter::UserCount, opts)
}

/// Average BER against the number of users in the XOR set, nearest first.
pub fn run_coding_size_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable> {
    run(spec, SweepParameter::CodedSetSize, opts)
}

/// Dispatches on `spec.parameter`.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable> {
    run(spec, spec.parameter, opts)
}
