//! Geometry, link amplitudes, spreading signatures and matched-filter-bank
//! observations for a synchronous CDMA uplink.
//!
//! Waveforms are represented by their chip sequences: the symbol interval is
//! normalized to one and each terminal's signature is a unit-energy vector of
//! `M` chips. The matched-filter bank output for a symbol vector `b` is
//! `y = R A b + n` with `n ~ N(0, sigma^2 R)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Antipodal symbol (`-1`, `+1`), or `0` for a silent/listening terminal.
pub type Symbol = i8;

/// Line geometry of the base station and the terminals.
///
/// Terminals are indexed `0..K`. The ones listed in `relay_indices` act as
/// relays; the rest are sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    bs_position: f64,
    user_positions: Vec<f64>,
    relay_indices: Vec<usize>,
    path_loss_exponent: f64,
}

impl Topology {
    pub fn new(
        bs_position: f64,
        user_positions: Vec<f64>,
        relay_indices: Vec<usize>,
        path_loss_exponent: f64,
    ) -> Result<Self> {
        let k = user_positions.len();
        if k == 0 {
            return domain("topology needs at least one terminal");
        }
        if !(path_loss_exponent > 0.0) || !path_loss_exponent.is_finite() {
            return domain(format!(
                "path-loss exponent must be positive, got {path_loss_exponent}"
            ));
        }
        if let Some(p) = user_positions
            .iter()
            .find(|p| !p.is_finite() || (**p - bs_position).abs() == 0.0)
        {
            return domain(format!(
                "terminal position {p} coincides with the base station"
            ));
        }
        let mut sorted = relay_indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != relay_indices.len() {
            return domain("duplicate relay index");
        }
        if let Some(&i) = sorted.iter().find(|&&i| i >= k) {
            return domain(format!("relay index {i} out of range for {k} terminals"));
        }
        if sorted.len() >= k {
            return domain(format!(
                "{} relays leave no source among {k} terminals",
                sorted.len()
            ));
        }
        Ok(Self {
            bs_position,
            user_positions,
            relay_indices: sorted,
            path_loss_exponent,
        })
    }

    /// Number of terminals `K` (sources and relays).
    pub fn terminals(&self) -> usize {
        self.user_positions.len()
    }

    pub fn bs_position(&self) -> f64 {
        self.bs_position
    }

    pub fn positions(&self) -> &[f64] {
        &self.user_positions
    }

    pub fn relays(&self) -> &[usize] {
        &self.relay_indices
    }

    pub fn is_relay(&self, terminal: usize) -> bool {
        self.relay_indices.binary_search(&terminal).is_ok()
    }

    /// Terminals that are not relays, ascending.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.terminals())
            .filter(|&k| !self.is_relay(k))
            .collect()
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn distance_to_bs(&self, terminal: usize) -> f64 {
        (self.user_positions[terminal] - self.bs_position).abs()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.user_positions[a] - self.user_positions[b]).abs()
    }
}

/// Received amplitude `sqrt(P * d^-gamma)` for transmit power `P` (linear).
pub fn amplitude_from_distance(distance: f64, tx_power: f64, gamma: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return domain(format!("distance must be positive, got {distance}"));
    }
    if !(tx_power >= 0.0) || !(gamma > 0.0) {
        return domain(format!("invalid power {tx_power} or exponent {gamma}"));
    }
    Ok((tx_power * distance.powf(-gamma)).sqrt())
}

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Received amplitudes at the base station and at each relay, plus the
/// common noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    to_bs: Vec<f64>,
    /// One amplitude vector per relay, in `Topology::relays()` order. A
    /// relay's own entry is zero.
    to_relay: Vec<Vec<f64>>,
    relays: Vec<usize>,
    noise_std: f64,
}

impl LinkGains {
    /// Equal transmit power for every terminal, no power control.
    pub fn from_topology(topology: &Topology, tx_power: f64, noise_std: f64) -> Result<Self> {
        if !(noise_std > 0.0) {
            return domain(format!("noise std must be positive, got {noise_std}"));
        }
        let gamma = topology.path_loss_exponent();
        let to_bs = (0..topology.terminals())
            .map(|k| amplitude_from_distance(topology.distance_to_bs(k), tx_power, gamma))
            .collect::<Result<Vec<_>>>()?;
        let mut to_relay = Vec::with_capacity(topology.relays().len());
        for &i in topology.relays() {
            let amps = (0..topology.terminals())
                .map(|k| {
                    if k == i {
                        return Ok(0.0);
                    }
                    let d = topology.distance(k, i);
                    if d == 0.0 {
                        // Zero distance has no finite path loss.
                        return domain(format!("terminal {k} is co-located with relay {i}"));
                    }
                    amplitude_from_distance(d, tx_power, gamma)
                })
                .collect::<Result<Vec<_>>>()?;
            to_relay.push(amps);
        }
        Ok(Self {
            to_bs,
            to_relay,
            relays: topology.relays().to_vec(),
            noise_std,
        })
    }

    /// Builds gains from explicit amplitude vectors.
    pub fn from_amplitudes(
        to_bs: Vec<f64>,
        relays: Vec<usize>,
        to_relay: Vec<Vec<f64>>,
        noise_std: f64,
    ) -> Result<Self> {
        if !(noise_std > 0.0) {
            return domain(format!("noise std must be positive, got {noise_std}"));
        }
        if relays.len() != to_relay.len() {
            return domain("one amplitude vector is needed per relay");
        }
        let k = to_bs.len();
        let all = to_bs.iter().chain(to_relay.iter().flatten());
        if all.clone().any(|a| !(*a >= 0.0)) {
            return domain("amplitudes must be nonnegative");
        }
        if to_relay.iter().any(|v| v.len() != k) {
            return domain("relay amplitude vectors must have one entry per terminal");
        }
        Ok(Self {
            to_bs,
            to_relay,
            relays,
            noise_std,
        })
    }

    pub fn to_bs(&self) -> &[f64] {
        &self.to_bs
    }

    /// Amplitudes as received at relay terminal `relay`.
    pub fn at_relay(&self, relay: usize) -> Option<&[f64]> {
        self.relays
            .iter()
            .position(|&r| r == relay)
            .map(|p| self.to_relay[p].as_slice())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Relay terminal indices, in the order amplitudes are stored.
    pub fn relays(&self) -> &[usize] {
        &self.relays
    }
}

/// `K` unit-energy binary spreading signatures of length `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSet {
    spreading_gain: usize,
    chips: Vec<f64>,
    seed: u64,
}

impl SignatureSet {
    /// Wraps explicit chip vectors, normalizing each to unit energy.
    pub fn from_chips(signatures: Vec<Vec<f64>>) -> Result<Self> {
        let m = signatures.first().map_or(0, Vec::len);
        if m == 0 {
            return domain("signatures must be nonempty");
        }
        let mut chips = Vec::with_capacity(m * signatures.len());
        for s in &signatures {
            if s.len() != m {
                return domain("all signatures must have the same length");
            }
            let energy: f64 = s.iter().map(|c| c * c).sum();
            if !(energy > 0.0) {
                return domain("signature has zero energy");
            }
            let scale = energy.sqrt().recip();
            chips.extend(s.iter().map(|c| c * scale));
        }
        Ok(Self {
            spreading_gain: m,
            chips,
            seed: 0,
        })
    }

    /// Rows `1..=K` of the Sylvester-Hadamard matrix of order `n >= M`
    /// (the all-ones row is skipped). Mutually orthogonal, so `R = I`.
    pub fn orthogonal(users: usize, spreading_gain: usize) -> Result<Self> {
        let n = spreading_gain.max(users + 1).next_power_of_two();
        let rows = (1..=users)
            .map(|row| {
                (0..n)
                    .map(|col| {
                        if (row & col).count_ones() % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self::from_chips(rows)
    }

    pub fn users(&self) -> usize {
        self.chips.len() / self.spreading_gain
    }

    pub fn spreading_gain(&self) -> usize {
        self.spreading_gain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signature(&self, k: usize) -> &[f64] {
        &self.chips[k * self.spreading_gain..(k + 1) * self.spreading_gain]
    }
}

/// Draws `K` signatures with iid chips uniform over `{+1/sqrt(M), -1/sqrt(M)}`.
/// Deterministic in `seed`.
pub fn generate_signatures(users: usize, spreading_gain: usize, seed: u64) -> Result<SignatureSet> {
    if users == 0 || spreading_gain == 0 {
        return domain("need at least one user and one chip");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = random_signatures(users, spreading_gain, &mut rng);
    set.seed = seed;
    Ok(set)
}

/// Same chip law as [`generate_signatures`], drawn from a caller stream.
pub fn random_signatures<R: Rng + ?Sized>(
    users: usize,
    spreading_gain: usize,
    rng: &mut R,
) -> SignatureSet {
    let amp = (spreading_gain as f64).sqrt().recip();
    let total = users * spreading_gain;
    let mut chips = Vec::with_capacity(total);
    // 64 chips per draw.
    while chips.len() < total {
        let mut word: u64 = rng.random();
        for _ in 0..(total - chips.len()).min(64) {
            chips.push(if word & 1 == 0 { amp } else { -amp });
            word >>= 1;
        }
    }
    SignatureSet {
        spreading_gain,
        chips,
        seed: 0,
    }
}

/// Symmetric `K x K` cross-correlation matrix of unit-energy signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    k: usize,
    entries: Vec<f64>,
}

const CORR_TOL: f64 = 1e-12;

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and `|R_ij| <= 1`. Positive
    /// semidefiniteness is checked on factorization.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return domain("correlation matrix must be square and nonempty");
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Self { k, entries };
        for i in 0..k {
            if (m.get(i, i) - 1.0).abs() > CORR_TOL {
                return domain(format!("diagonal entry {i} is {} (must be 1)", m.get(i, i)));
            }
            for j in 0..k {
                let v = m.get(i, j);
                if !v.is_finite() || v.abs() > 1.0 + CORR_TOL {
                    return domain(format!("entry ({i},{j}) = {v} outside [-1, 1]"));
                }
                if (v - m.get(j, i)).abs() > CORR_TOL {
                    return domain(format!("matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Self {
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            entries[i * k + i] = 1.0;
        }
        Self { k, entries }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    /// Row `i` (equal to column `i`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Lower-triangular `L` with `L L^T = R`, row-major.
    ///
    /// Zero pivots (linearly dependent signatures) are accepted and produce
    /// a zero column; negative pivots are rejected.
    pub fn cholesky(&self) -> Result<NoiseFactor> {
        let n = self.k;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for p in 0..j {
                d -= l[j * n + p] * l[j * n + p];
            }
            if d < -1e-10 {
                return Err(Error::Factorization(format!(
                    "correlation matrix is not positive semidefinite (pivot {j} = {d:e})"
                )));
            }
            if d <= 1e-12 {
                for i in j + 1..n {
                    let mut s = self.get(i, j);
                    for p in 0..j {
                        s -= l[i * n + p] * l[j * n + p];
                    }
                    if s.abs() > 1e-8 {
                        return Err(Error::Factorization(format!(
                            "correlation matrix is not positive semidefinite (column {j})"
                        )));
                    }
                }
                continue;
            }
            let ljj = d.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(NoiseFactor { n, l })
    }
}

/// Cholesky-type factor used to draw `N(0, sigma^2 R)` noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFactor {
    n: usize,
    l: Vec<f64>,
}

impl NoiseFactor {
    pub fn identity(n: usize) -> Self {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            l[i * n + i] = 1.0;
        }
        Self { n, l }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Writes `sigma * L w` for iid standard normal `w` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        let mut w = [0.0f64; 32];
        let mut heap;
        let w: &mut [f64] = if n <= w.len() {
            &mut w[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for v in w.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.l[i * n..i * n + i + 1];
            *o = sigma * row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Gram matrix of the signature set.
pub fn cross_correlation(signatures: &SignatureSet) -> CorrelationMatrix {
    let k = signatures.users();
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        entries[i * k + i] = 1.0;
        for j in i + 1..k {
            let v: f64 = signatures
                .signature(i)
                .iter()
                .zip(signatures.signature(j))
                .map(|(a, b)| a * b)
                .sum();
            entries[i * k + j] = v;
            entries[j * k + i] = v;
        }
    }
    CorrelationMatrix { k, entries }
}

/// `[[1, rho], [rho, 1]]`.
pub fn correlation_two_user(rho: f64) -> Result<CorrelationMatrix> {
    if !(rho.abs() <= 1.0) {
        return domain(format!("cross-correlation must lie in [-1, 1], got {rho}"));
    }
    Ok(CorrelationMatrix {
        k: 2,
        entries: vec![1.0, rho, rho, 1.0],
    })
}

fn check_dims(r: &CorrelationMatrix, amplitudes: &[f64], symbols: &[Symbol]) -> Result<()> {
    if amplitudes.len() != r.dim() || symbols.len() != r.dim() {
        return domain(format!(
            "dimension mismatch: R is {0}x{0}, {1} amplitudes, {2} symbols",
            r.dim(),
            amplitudes.len(),
            symbols.len()
        ));
    }
    if symbols.iter().any(|b| !(-1..=1).contains(b)) {
        return domain("symbols must be -1, 0 or +1");
    }
    Ok(())
}

/// Noise-free matched-filter output `R A b`, written into `out`.
pub fn signal_into(r: &CorrelationMatrix, amplitudes: &[f64], symbols: &[Symbol], out: &mut [f64]) {
    let k = r.dim();
    for (i, o) in out.iter_mut().enumerate().take(k) {
        let row = r.row(i);
        let mut s = 0.0;
        for j in 0..k {
            if symbols[j] != 0 {
                s += row[j] * amplitudes[j] * f64::from(symbols[j]);
            }
        }
        *o = s;
    }
}

/// Matched-filter-bank observation `y = R A b + n`, `n ~ N(0, sigma^2 R)`.
pub fn received_vector<R: Rng + ?Sized>(
    r: &CorrelationMatrix,
    amplitudes: &[f64],
    symbols: &[Symbol],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(r, amplitudes, symbols)?;
    if !(sigma >= 0.0) {
        return domain(format!("noise std must be nonnegative, got {sigma}"));
    }
    let factor = r.cholesky()?;
    let mut y = vec![0.0; r.dim()];
    let mut n = vec![0.0; r.dim()];
    signal_into(r, amplitudes, symbols, &mut y);
    if sigma > 0.0 {
        factor.sample_into(sigma, rng, &mut n);
        y.iter_mut().zip(&n).for_each(|(a, b)| *a += b);
    }
    Ok(y)
}

/// Builds the chip-rate waveform `sum_k A_k b_k s_k + sigma w` and passes it
/// through the matched-filter bank. Same law as [`received_vector`].
pub fn chip_level_observation<R: Rng + ?Sized>(
    signatures: &SignatureSet,
    amplitudes: &[f64],
    symbols: &[Symbol],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let k = signatures.users();
    if amplitudes.len() != k || symbols.len() != k {
        return domain("dimension mismatch between signatures, amplitudes and symbols");
    }
    let m = signatures.spreading_gain();
    let mut waveform = vec![0.0; m];
    for user in 0..k {
        let a = amplitudes[user] * f64::from(symbols[user]);
        if a != 0.0 {
            for (w, c) in waveform.iter_mut().zip(signatures.signature(user)) {
                *w += a * c;
            }
        }
    }
    for w in waveform.iter_mut() {
        *w += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    Ok((0..k)
        .map(|user| {
            signatures
                .signature(user)
                .iter()
                .zip(&waveform)
                .map(|(c, w)| c * w)
                .sum()
        })
        .collect())
}
