//! Performance bounds and the cooperative MUD gain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detectors::analytic::sic_recursion;
use crate::detectors::analytic_ber_optimal_bound;
use crate::error::{domain, Result};
use crate::sysmodel::{
    correlation_two_user, cross_correlation, random_signatures, CorrelationMatrix,
};

/// Relays wired to the base station: the bit is lost only if the direct link
/// and every source-relay link fail.
pub fn bound_mimo_mud(p_direct: f64, p_source_relay: &[f64]) -> f64 {
    p_direct * p_source_relay.iter().product::<f64>()
}

fn augmented(a: &[f64], relay_amplitudes: &[f64], target: usize) -> Result<Vec<f64>> {
    if target >= a.len() {
        return domain(format!(
            "target user {target} out of range for {} users",
            a.len()
        ));
    }
    if relay_amplitudes.iter().any(|r| !(*r >= 0.0)) {
        return domain("relay amplitudes must be nonnegative");
    }
    let mut out = a.to_vec();
    out[target] += relay_amplitudes.iter().sum::<f64>();
    Ok(out)
}

/// Perfect source-relay links with amplitude combining, successive
/// cancellation: the cancellation recursion with the target's numerator
/// raised to `A_k + sum A_i`. Interference keeps the first-stage amplitudes.
pub fn bound_perfect_source_relay(
    a: &[f64],
    relay_amplitudes: &[f64],
    sigma: f64,
    spreading_gain: usize,
    target: usize,
) -> Result<Vec<f64>> {
    let signal = augmented(a, relay_amplitudes, target)?;
    sic_recursion(&signal, a, sigma, spreading_gain)
}

/// Same bound for ML detection: the error-vector bound of the target with the
/// target's amplitude augmented.
pub fn bound_perfect_source_relay_optimal(
    a: &[f64],
    relay_amplitudes: &[f64],
    r: &CorrelationMatrix,
    sigma: f64,
    target: usize,
) -> Result<f64> {
    let aug = augmented(a, relay_amplitudes, target)?;
    analytic_ber_optimal_bound(&aug, r, sigma, target)
}

/// [`bound_perfect_source_relay_optimal`] averaged over random binary
/// signatures of length `spreading_gain`.
///
/// Two users are averaged exactly over the binomial law of the
/// cross-correlation; more users use `draws` signature sets from `seed`.
pub fn bound_perfect_source_relay_optimal_random(
    a: &[f64],
    relay_amplitudes: &[f64],
    sigma: f64,
    spreading_gain: usize,
    target: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if spreading_gain == 0 {
        return domain("spreading gain must be at least 1");
    }
    match a.len() {
        1 => bound_perfect_source_relay_optimal(
            a,
            relay_amplitudes,
            &CorrelationMatrix::identity(1),
            sigma,
            target,
        ),
        2 => {
            let m = spreading_gain;
            let mut total = 0.0;
            for j in 0..=m {
                let rho = (2.0 * j as f64 - m as f64) / m as f64;
                let w = binomial_half(m, j);
                let r = correlation_two_user(rho)?;
                total +=
                    w * bound_perfect_source_relay_optimal(a, relay_amplitudes, &r, sigma, target)?;
            }
            Ok(total)
        }
        k => {
            if draws == 0 {
                return domain("at least one signature draw is needed");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for _ in 0..draws {
                let r = cross_correlation(&random_signatures(k, spreading_gain, &mut rng));
                total +=
                    bound_perfect_source_relay_optimal(a, relay_amplitudes, &r, sigma, target)?;
            }
            Ok(total / draws as f64)
        }
    }
}

/// `C(m, j) / 2^m`, evaluated in log space.
fn binomial_half(m: usize, j: usize) -> f64 {
    let ln = libm::lgamma(m as f64 + 1.0)
        - libm::lgamma(j as f64 + 1.0)
        - libm::lgamma((m - j) as f64 + 1.0)
        - m as f64 * std::f64::consts::LN_2;
    ln.exp()
}

/// SINR improvement ratio for the second-strongest user when the strongest
/// user's error probability drops from `before` to `after`.
///
/// `a` holds all amplitudes; the strongest one is `A_K` and the remaining
/// interferers are all users except the two strongest.
pub fn cooperative_mud_gain(
    a: &[f64],
    sigma: f64,
    spreading_gain: usize,
    before: f64,
    after: f64,
) -> Result<f64> {
    if a.len() < 2 {
        return domain("the gain needs at least two users");
    }
    if !(0.0..=0.5).contains(&before) || !(0.0..=0.5).contains(&after) {
        return domain("error probabilities must lie in [0, 1/2]");
    }
    if !(sigma > 0.0) || spreading_gain == 0 {
        return domain("noise std and spreading gain must be positive");
    }
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = spreading_gain as f64;
    let strongest = sorted[sorted.len() - 1];
    let base = sigma * sigma
        + sorted[..sorted.len() - 2]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            / m;
    let term = 4.0 / m * strongest * strongest;
    Ok((base + term * before) / (base + term * after))
}
