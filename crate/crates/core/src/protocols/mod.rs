//! Two-stage cooperative transmission: single-user relaying (protocol 1) and
//! network-coded relaying (protocol 2), relay selection, and performance
//! bounds.

mod bounds;
mod frame;
mod selection;

pub use bounds::{
    bound_mimo_mud, bound_perfect_source_relay, bound_perfect_source_relay_optimal,
    bound_perfect_source_relay_optimal_random, cooperative_mud_gain,
};
pub use frame::{simulate_two_stage, CodeModel, FrameOutcome, FrameSimulator, Scenario, Schedule};
pub use selection::{
    candidate_assignments, link_ber, link_profile, select_assignment, total_ber, user_ber,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relaying protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// The relay forwards one user's bit, decoded with a matched filter.
    P1,
    /// The relay forwards the XOR of a user set, decoded jointly.
    P2,
}

/// XOR of all bits. Bits are `0` or `1`.
pub fn xor_encode(bits: &[u8]) -> Result<u8> {
    if bits.is_empty() {
        return domain("cannot encode an empty bit list");
    }
    if bits.iter().any(|&b| b > 1) {
        return domain("bits must be 0 or 1");
    }
    Ok(bits.iter().fold(0, |acc, b| acc ^ b))
}

/// Antipodal mapping used on the air: `0 -> +1`, `1 -> -1`.
pub fn bit_to_symbol(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

pub fn symbol_to_bit(symbol: i8) -> u8 {
    u8::from(symbol < 0)
}

/// Error probability with one relay forwarding the user's bit: wrong only if
/// the direct copy and the relay path both fail.
pub fn protocol1_ber(p_m0: f64, p_mi: f64, p_i0: f64) -> f64 {
    p_m0 * (1.0 - (1.0 - p_mi) * (1.0 - p_i0))
}

/// Which relay forwards what.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelayAssignment {
    pub relay: usize,
    /// Ascending user indices whose bits are combined at the relay.
    pub coded_set: Vec<usize>,
    pub protocol: Protocol,
}

impl RelayAssignment {
    pub fn new(relay: usize, mut coded_set: Vec<usize>, protocol: Protocol) -> Result<Self> {
        coded_set.sort_unstable();
        coded_set.dedup();
        if coded_set.is_empty() {
            return domain("coded set must be nonempty");
        }
        if coded_set.contains(&relay) {
            return domain(format!("relay {relay} cannot forward its own bit"));
        }
        if protocol == Protocol::P1 && coded_set.len() != 1 {
            return domain("protocol 1 forwards exactly one user");
        }
        Ok(Self {
            relay,
            coded_set,
            protocol,
        })
    }

    pub fn single(relay: usize, user: usize) -> Result<Self> {
        Self::new(relay, vec![user], Protocol::P1)
    }

    pub fn xor(relay: usize, users: Vec<usize>) -> Result<Self> {
        Self::new(relay, users, Protocol::P2)
    }

    pub fn codes(&self, user: usize) -> bool {
        self.coded_set.binary_search(&user).is_ok()
    }
}

/// Per-link error probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkErrorProfile {
    /// Source to base station, per terminal.
    pub direct: Vec<f64>,
    /// Relay terminal indices, in the order of the two fields below.
    pub relays: Vec<usize>,
    /// `source_to_relay[r][m]`: terminal `m` to relay `relays[r]`.
    pub source_to_relay: Vec<Vec<f64>>,
    /// Relay to base station.
    pub relay_to_bs: Vec<f64>,
}

impl LinkErrorProfile {
    pub fn new(
        direct: Vec<f64>,
        relays: Vec<usize>,
        source_to_relay: Vec<Vec<f64>>,
        relay_to_bs: Vec<f64>,
    ) -> Result<Self> {
        if relays.len() != source_to_relay.len() || relays.len() != relay_to_bs.len() {
            return domain(
                "one source-to-relay row and one relay-to-bs entry are needed per relay",
            );
        }
        if source_to_relay.iter().any(|row| row.len() != direct.len()) {
            return domain("source-to-relay rows must have one entry per terminal");
        }
        let all = direct
            .iter()
            .chain(source_to_relay.iter().flatten())
            .chain(&relay_to_bs);
        if all.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return domain("link error probabilities must lie in [0, 1]");
        }
        Ok(Self {
            direct,
            relays,
            source_to_relay,
            relay_to_bs,
        })
    }

    fn relay_slot(&self, relay: usize) -> Result<usize> {
        self.relays.iter().position(|&r| r == relay).ok_or_else(|| {
            Error::Domain(format!(
                "terminal {relay} has no relay links in the profile"
            ))
        })
    }

    pub fn p_direct(&self, user: usize) -> f64 {
        self.direct[user]
    }

    pub fn p_source_relay(&self, user: usize, relay: usize) -> Result<f64> {
        Ok(self.source_to_relay[self.relay_slot(relay)?][user])
    }

    pub fn p_relay_bs(&self, relay: usize) -> Result<f64> {
        Ok(self.relay_to_bs[self.relay_slot(relay)?])
    }
}

/// Error probability of coded user `m` under network-coded relaying.
///
/// `m` is recovered from the relay path only if its own uplink to the relay,
/// the relay downlink, and for every other coded user `n` both the uplink to
/// the relay and the direct link succeed.
pub fn protocol2_ber(
    m: usize,
    assignment: &RelayAssignment,
    profile: &LinkErrorProfile,
) -> Result<f64> {
    if !assignment.codes(m) {
        return domain(format!(
            "user {m} is not in the coded set {:?}",
            assignment.coded_set
        ));
    }
    let i = assignment.relay;
    let mut success = (1.0 - profile.p_source_relay(m, i)?) * (1.0 - profile.p_relay_bs(i)?);
    for &n in assignment.coded_set.iter().filter(|&&n| n != m) {
        success *= (1.0 - profile.p_source_relay(n, i)?) * (1.0 - profile.p_direct(n));
    }
    Ok(profile.p_direct(m) * (1.0 - success))
}
