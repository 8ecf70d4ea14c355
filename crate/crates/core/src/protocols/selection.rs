//! Analytic link error profiles and exhaustive relay/coded-set selection.

use super::frame::{CodeModel, Scenario, Schedule};
use super::{protocol1_ber, protocol2_ber, LinkErrorProfile, Protocol, RelayAssignment};
use crate::detectors::{analytic::sic_recursion, q_function, DetectorKind};
use crate::error::{domain, Result};
use crate::sysmodel::Topology;

/// Single-link Gaussian error probability of every active user.
///
/// The effective noise includes the interference left by the detector:
/// all other active users at `1/M` for the matched filter, the cancellation
/// recursion for SIC, and none for ML. Inactive users get `0`.
pub fn link_ber(
    kind: DetectorKind,
    amplitudes: &[f64],
    active: &[bool],
    sigma: f64,
    spreading_gain: usize,
) -> Result<Vec<f64>> {
    if amplitudes.len() != active.len() {
        return domain("amplitude and mask lengths differ");
    }
    if !(sigma > 0.0) || spreading_gain == 0 {
        return domain("noise std and spreading gain must be positive");
    }
    let k = amplitudes.len();
    let m = spreading_gain as f64;
    let mut out = vec![0.0; k];
    match kind {
        DetectorKind::MatchedFilter => {
            let total: f64 = (0..k)
                .filter(|&j| active[j])
                .map(|j| amplitudes[j].powi(2))
                .sum();
            for i in (0..k).filter(|&i| active[i]) {
                let var = sigma * sigma + (total - amplitudes[i].powi(2)).max(0.0) / m;
                out[i] = q_function(amplitudes[i] / var.sqrt());
            }
        }
        DetectorKind::Sic => {
            let idx: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
            let sub: Vec<f64> = idx.iter().map(|&i| amplitudes[i]).collect();
            let p = sic_recursion(&sub, &sub, sigma, spreading_gain)?;
            for (&i, v) in idx.iter().zip(p) {
                out[i] = v;
            }
        }
        DetectorKind::Optimal => {
            for i in (0..k).filter(|&i| active[i]) {
                out[i] = q_function(amplitudes[i] / sigma);
            }
        }
    }
    Ok(out)
}

/// Analytic link profile of a scenario for the given detector.
///
/// Relays decode with the matched filter under protocol 1 and with
/// `detector` under protocol 2. Under the pipelined schedule the relays are
/// counted as interferers on the direct links. Orthogonal codes remove all
/// interference.
pub fn link_profile(
    scenario: &Scenario,
    detector: DetectorKind,
    protocol: Protocol,
) -> Result<LinkErrorProfile> {
    let topo = &scenario.topology;
    let k = topo.terminals();
    let sigma = scenario.sigma();
    let gain = scenario.spreading_gain;
    let sources: Vec<bool> = (0..k).map(|i| !topo.is_relay(i)).collect();
    let orthogonal = scenario.code_model == CodeModel::Orthogonal;
    let ber = |kind: DetectorKind, amps: &[f64], active: &[bool]| -> Result<Vec<f64>> {
        if orthogonal {
            Ok((0..k)
                .map(|i| {
                    if active[i] {
                        q_function(amps[i] / sigma)
                    } else {
                        0.0
                    }
                })
                .collect())
        } else {
            link_ber(kind, amps, active, sigma, gain)
        }
    };
    let to_bs = scenario.gains.to_bs();
    let stage1: Vec<bool> = match scenario.schedule {
        Schedule::Pipelined => vec![true; k],
        Schedule::Isolated => sources.clone(),
    };
    let direct = ber(detector, to_bs, &stage1)?
        .into_iter()
        .zip(&sources)
        .map(|(p, &s)| if s { p } else { 0.0 })
        .collect();
    let relay_kind = match protocol {
        Protocol::P1 => DetectorKind::MatchedFilter,
        Protocol::P2 => detector,
    };
    let mut source_to_relay = Vec::new();
    let mut relay_to_bs = Vec::new();
    for &i in topo.relays() {
        let amps = scenario.gains.at_relay(i).expect("relay gains");
        source_to_relay.push(ber(relay_kind, amps, &sources)?);
        let mut stage2 = sources.clone();
        stage2[i] = true;
        // An unheard relay is a failed link rather than a coin flip.
        relay_to_bs.push(if to_bs[i] > 0.0 {
            ber(detector, to_bs, &stage2)?[i]
        } else {
            1.0
        });
    }
    LinkErrorProfile::new(direct, topo.relays().to_vec(), source_to_relay, relay_to_bs)
}

/// Analytic error probability of user `j` under an optional assignment.
pub fn user_ber(
    j: usize,
    assignment: Option<&RelayAssignment>,
    profile: &LinkErrorProfile,
) -> Result<f64> {
    match assignment {
        Some(a) if a.codes(j) => match a.protocol {
            Protocol::P1 => Ok(protocol1_ber(
                profile.p_direct(j),
                profile.p_source_relay(j, a.relay)?,
                profile.p_relay_bs(a.relay)?,
            )),
            Protocol::P2 => protocol2_ber(j, a, profile),
        },
        _ => Ok(profile.p_direct(j)),
    }
}

/// Sum of [`user_ber`] over `users`.
pub fn total_ber(
    assignment: Option<&RelayAssignment>,
    profile: &LinkErrorProfile,
    users: &[usize],
) -> Result<f64> {
    users
        .iter()
        .map(|&j| user_ber(j, assignment, profile))
        .sum()
}

/// All `(relay, coded set)` pairs: singletons under protocol 1, every
/// nonempty source subset up to `max_set_size` under protocol 2. Ordered by
/// relay, then set size, then lexicographically.
pub fn candidate_assignments(
    topology: &Topology,
    protocol: Protocol,
    max_set_size: usize,
) -> Vec<RelayAssignment> {
    let sources = topology.sources();
    let n = sources.len();
    let mut out = Vec::new();
    for &relay in topology.relays() {
        match protocol {
            Protocol::P1 => out.extend(
                sources
                    .iter()
                    .map(|&m| RelayAssignment::single(relay, m).expect("valid")),
            ),
            Protocol::P2 => {
                let mut sets: Vec<Vec<usize>> = (1u64..(1 << n))
                    .filter(|mask| mask.count_ones() as usize <= max_set_size)
                    .map(|mask| {
                        (0..n)
                            .filter(|b| mask >> b & 1 == 1)
                            .map(|b| sources[b])
                            .collect()
                    })
                    .collect();
                sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
                out.extend(
                    sets.into_iter()
                        .map(|s| RelayAssignment::xor(relay, s).expect("valid")),
                );
            }
        }
    }
    out
}

/// Exhaustive minimization of the summed analytic BER of `objective_users`.
/// Ties go to the smallest relay index, then the lexicographically smallest
/// coded set.
pub fn select_assignment(
    candidates: &[RelayAssignment],
    profile: &LinkErrorProfile,
    objective_users: &[usize],
) -> Result<RelayAssignment> {
    let mut order: Vec<&RelayAssignment> = candidates.iter().collect();
    order.sort_by(|a, b| {
        a.relay
            .cmp(&b.relay)
            .then_with(|| a.coded_set.cmp(&b.coded_set))
    });
    let mut best: Option<(&RelayAssignment, f64)> = None;
    for a in order {
        let v = total_ber(Some(a), profile, objective_users)?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a.clone())
        .ok_or_else(|| crate::Error::Domain("no candidate assignments".into()))
}
