//! Closed-form BER approximations: the successive-cancellation recursion and
//! the indecomposable-error-vector bound for maximum-likelihood detection.

use super::q_function;
use crate::error::{domain, Error, Result};
use crate::sysmodel::{CorrelationMatrix, Symbol};

/// Largest `K` for which error vectors are enumerated (`3^K` candidates).
pub const ENUMERATION_LIMIT: usize = 10;

/// Successive-cancellation BER per user.
///
/// Users are detected strongest first. User `i` (ascending amplitude order)
/// sees residual interference `(1/M) A_j^2` from each weaker user and
/// `(4/M) A_j^2 P_j` from each stronger user whose decision was wrong.
/// Equal amplitudes are ordered as the detector orders them (lower index
/// first). The output is in input order.
pub fn analytic_ber_sic(amplitudes: &[f64], sigma: f64, spreading_gain: usize) -> Result<Vec<f64>> {
    sic_recursion(amplitudes, amplitudes, sigma, spreading_gain)
}

/// Recursion with separate numerator amplitudes (`signal`) and interference
/// amplitudes (`interference`). Ordering follows `interference`.
pub(crate) fn sic_recursion(
    signal: &[f64],
    interference: &[f64],
    sigma: f64,
    spreading_gain: usize,
) -> Result<Vec<f64>> {
    if signal.len() != interference.len() {
        return domain("amplitude vectors differ in length");
    }
    if signal
        .iter()
        .chain(interference)
        .any(|a| !(*a >= 0.0) || !a.is_finite())
    {
        return domain("amplitudes must be finite and nonnegative");
    }
    if !(sigma > 0.0) {
        return domain(format!("noise std must be positive, got {sigma}"));
    }
    if spreading_gain == 0 {
        return domain("spreading gain must be at least 1");
    }
    let k = signal.len();
    let m = spreading_gain as f64;
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| interference[i].total_cmp(&interference[j]).then(j.cmp(&i)));
    let a2: Vec<f64> = idx
        .iter()
        .map(|&i| interference[i] * interference[i])
        .collect();
    let mut p = vec![0.0; k];
    let mut weaker: f64 = a2.iter().sum();
    let mut stronger = 0.0;
    for pos in (0..k).rev() {
        weaker -= a2[pos];
        let var = sigma * sigma + weaker.max(0.0) / m + 4.0 / m * stronger;
        p[pos] = q_function(signal[idx[pos]] / var.sqrt());
        stronger += a2[pos] * p[pos];
    }
    let mut out = vec![0.0; k];
    for (pos, &i) in idx.iter().enumerate() {
        out[i] = p[pos];
    }
    Ok(out)
}

/// An error pattern `epsilon` in `{-1, 0, +1}^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector {
    pub entries: Vec<Symbol>,
    /// Number of nonzero entries.
    pub weight: usize,
    /// `epsilon^T A R A epsilon`.
    pub energy: f64,
}

/// Convention for the zero-inner-product boundary of the decomposability
/// test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecompositionRule {
    /// Decomposable when some split has inner product `>= 0`.
    #[default]
    NonNegative,
    /// Decomposable only when some split has inner product `> 0`.
    Positive,
}

fn gram(a: &[f64], r: &CorrelationMatrix) -> Vec<f64> {
    let k = a.len();
    let mut h = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            h[i * k + j] = a[i] * r.get(i, j) * a[j];
        }
    }
    h
}

/// Error vectors with a nonzero entry at `user` that cannot be split into
/// two disjoint-support parts with nonnegative signal inner product.
pub fn enumerate_indecomposable(
    a: &[f64],
    r: &CorrelationMatrix,
    user: usize,
) -> Result<Vec<ErrorVector>> {
    enumerate_indecomposable_with(a, r, user, DecompositionRule::NonNegative)
}

pub fn enumerate_indecomposable_with(
    a: &[f64],
    r: &CorrelationMatrix,
    user: usize,
    rule: DecompositionRule,
) -> Result<Vec<ErrorVector>> {
    let k = r.dim();
    if a.len() != k {
        return domain(format!(
            "{} amplitudes for a {k}x{k} correlation matrix",
            a.len()
        ));
    }
    if user >= k {
        return domain(format!("user {user} out of range for {k} users"));
    }
    if k > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "error-vector enumeration",
            requested: k,
            limit: ENUMERATION_LIMIT,
        });
    }
    let h = gram(a, r);
    let mut out = Vec::new();
    let mut eps: Vec<Symbol> = vec![0; k];
    let total = 3usize.pow(k as u32);
    let mut support = Vec::with_capacity(k);
    for code in 0..total {
        let mut c = code;
        for e in eps.iter_mut() {
            *e = (c % 3) as Symbol - 1;
            c /= 3;
        }
        if eps[user] == 0 {
            continue;
        }
        support.clear();
        support.extend((0..k).filter(|&i| eps[i] != 0));
        let w = support.len();
        let pair = |i: usize, j: usize| f64::from(eps[i]) * h[i * k + j] * f64::from(eps[j]);
        // Splits are subsets of the support; fixing the first support
        // element on one side visits each unordered split once.
        let mut decomposable = false;
        for mask in 1..(1u32 << (w - 1)) {
            let side = |t: usize| t > 0 && (mask >> (t - 1)) & 1 == 1;
            let mut ip = 0.0;
            for (s, &i) in support.iter().enumerate() {
                if side(s) {
                    continue;
                }
                for (t, &j) in support.iter().enumerate() {
                    if side(t) {
                        ip += pair(i, j);
                    }
                }
            }
            let hit = match rule {
                DecompositionRule::NonNegative => ip >= 0.0,
                DecompositionRule::Positive => ip > 0.0,
            };
            if hit {
                decomposable = true;
                break;
            }
        }
        if decomposable {
            continue;
        }
        let energy: f64 = support
            .iter()
            .flat_map(|&i| support.iter().map(move |&j| (i, j)))
            .map(|(i, j)| pair(i, j))
            .sum();
        out.push(ErrorVector {
            entries: eps.clone(),
            weight: w,
            energy: energy.max(0.0),
        });
    }
    Ok(out)
}

/// Union-type upper bound on the ML BER of `user`:
/// `sum 2^-w(e) Q(||S(e)|| / sigma)` over indecomposable `e`, at most 1.
pub fn analytic_ber_optimal_bound(
    a: &[f64],
    r: &CorrelationMatrix,
    sigma: f64,
    user: usize,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("noise std must be positive, got {sigma}"));
    }
    let set = enumerate_indecomposable(a, r, user)?;
    Ok(analytic_ber_optimal_bound_from(&set, sigma))
}

/// Bound evaluated over a precomputed error-vector collection.
pub fn analytic_ber_optimal_bound_from(set: &[ErrorVector], sigma: f64) -> f64 {
    set.iter()
        .map(|e| (0.5f64).powi(e.weight as i32) * q_function(e.energy.sqrt() / sigma))
        .sum::<f64>()
        .min(1.0)
}
