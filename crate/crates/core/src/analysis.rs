//! Closed-form and fixed-point results: spectral efficiency, two-user
//! asymptotic efficiency, network-coding set size, and large-system limits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sysmodel::{amplitude_from_distance, Topology};

/// Fraction of slots carrying fresh source data with `n` dedicated relays
/// among `k` terminals.
pub fn spectral_efficiency(k: usize, n: usize) -> Result<f64> {
    if n >= k {
        return domain(format!("relay count {n} must be below terminal count {k}"));
    }
    Ok((k - n) as f64 / k as f64)
}

/// Asymptotic efficiency of user 1 with an ideal relay whose amplitude `ar`
/// may be combined with either user:
/// `min{1, 1 + (A2+Ar)^2/A1^2 - 2|rho|(A2+Ar)/A1, 1 + A2^2/(A1+Ar)^2 - 2|rho|A2/(A1+Ar)}`,
/// floored at zero.
pub fn asymptotic_efficiency_two_user(a1: f64, a2: f64, ar: f64, rho: f64) -> Result<f64> {
    if !(a1 > 0.0) {
        return domain(format!("A1 must be positive, got {a1}"));
    }
    if !(a2 >= 0.0) || !(ar >= 0.0) {
        return domain("A2 and Ar must be nonnegative");
    }
    if !(rho.abs() <= 1.0) {
        return domain(format!("|rho| must be at most 1, got {rho}"));
    }
    let r = rho.abs();
    let x = (a2 + ar) / a1;
    let y = a2 / (a1 + ar);
    let b2 = 1.0 + x * x - 2.0 * r * x;
    let b3 = 1.0 + y * y - 2.0 * r * y;
    Ok(1f64.min(b2).min(b3).max(0.0))
}

/// Parameters of the symmetric single-relay network-coding model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialCaseParams {
    pub p_sd: f64,
    pub p_sr: f64,
    pub p_rd: f64,
    pub k: usize,
    /// Number of users combined at the relay.
    pub m: usize,
}

impl SpecialCaseParams {
    pub fn new(p_sd: f64, p_sr: f64, p_rd: f64, k: usize, m: usize) -> Result<Self> {
        check_probs(p_sd, p_sr, p_rd)?;
        if k == 0 || m == 0 || m > k {
            return domain(format!("need 1 <= M <= K, got M={m}, K={k}"));
        }
        Ok(Self {
            p_sd,
            p_sr,
            p_rd,
            k,
            m,
        })
    }
}

fn check_probs(p_sd: f64, p_sr: f64, p_rd: f64) -> Result<()> {
    for (name, p) in [("p_sd", p_sd), ("p_sr", p_sr), ("p_rd", p_rd)] {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("{name} must lie in [0, 1], got {p}"));
        }
    }
    Ok(())
}

/// Average BER over `K` users when `M` of them are network coded.
pub fn special_case_avg_ber(params: &SpecialCaseParams) -> f64 {
    let SpecialCaseParams {
        p_sd,
        p_sr,
        p_rd,
        k,
        m,
    } = *params;
    let mf = m as f64;
    let coded =
        p_sd * (1.0 - (1.0 - p_sr).powi(m as i32) * (1.0 - p_sd).powi(m as i32 - 1) * (1.0 - p_rd));
    (p_sd * (k - m) as f64 + mf * coded) / k as f64
}

/// Optimal coding-set size: compare the two integers adjacent to
/// `-1 / ln[(1-p_sr)(1-p_sd)]` (at least 1) and cap at `K`. Ties go to the
/// smaller size.
pub fn optimal_coding_set_size(p_sd: f64, p_sr: f64, p_rd: f64, k: usize) -> Result<usize> {
    check_probs(p_sd, p_sr, p_rd)?;
    if k == 0 {
        return domain("K must be at least 1");
    }
    let r = (1.0 - p_sr) * (1.0 - p_sd);
    if r >= 1.0 {
        return Ok(k);
    }
    // Every size gives the same average when the coding gain vanishes.
    if p_sd == 0.0 || p_rd == 1.0 || r == 0.0 {
        return Ok(1);
    }
    let x = -1.0 / r.ln();
    let m1 = (x.floor() as usize).clamp(1, k);
    let m2 = (x.ceil() as usize).clamp(1, k);
    let ber = |m| {
        special_case_avg_ber(&SpecialCaseParams {
            p_sd,
            p_sr,
            p_rd,
            k,
            m,
        })
    };
    Ok(if ber(m2) < ber(m1) { m2 } else { m1 })
}

/// Discrete law of the received power `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl PowerDistribution {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return domain("power distribution needs matching, nonempty support and weights");
        }
        if support.iter().any(|p| !(*p >= 0.0) || !p.is_finite())
            || weights.iter().any(|w| !(*w >= 0.0))
        {
            return domain("powers and weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { support, weights })
    }

    pub fn point_mass(p: f64) -> Result<Self> {
        Self::new(vec![p], vec![1.0])
    }

    /// Equally likely received powers `A_k^2` of the sources in `topology`.
    pub fn from_topology(topology: &Topology, tx_power: f64) -> Result<Self> {
        let sources = topology.sources();
        let w = 1.0 / sources.len() as f64;
        let support = sources
            .iter()
            .map(|&k| {
                amplitude_from_distance(
                    topology.distance_to_bs(k),
                    tx_power,
                    topology.path_loss_exponent(),
                )
                .map(|a| a * a)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(support.clone(), vec![w; support.len()])
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Fixed-point iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight on the new iterate.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 10_000,
        }
    }
}

/// Decorrelator efficiency `max(0, 1 - beta)`.
pub fn large_system_decorrelator(beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return domain(format!("load must be nonnegative, got {beta}"));
    }
    Ok((1.0 - beta).max(0.0))
}

fn check_large(beta: f64, noise_power: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("load must be finite and nonnegative, got {beta}"));
    }
    if !(noise_power > 0.0) {
        return domain(format!("noise power must be positive, got {noise_power}"));
    }
    Ok(())
}

/// MMSE efficiency: the root in `(0, 1]` of
/// `eta + beta E[eta P / (sigma_n^2 + eta P)] = 1`.
pub fn large_system_mmse(beta: f64, noise_power: f64, power: &PowerDistribution) -> Result<f64> {
    large_system_mmse_with(beta, noise_power, power, SolverConfig::default())
}

pub fn large_system_mmse_with(
    beta: f64,
    noise_power: f64,
    power: &PowerDistribution,
    cfg: SolverConfig,
) -> Result<f64> {
    check_large(beta, noise_power)?;
    let s = noise_power;
    let residual = |eta: f64| eta + beta * power.expect(|p| eta * p / (s + eta * p)) - 1.0;
    let mut eta = 1.0;
    for _ in 0..cfg.max_iterations {
        if residual(eta).abs() <= cfg.tolerance {
            return Ok(eta.clamp(0.0, 1.0));
        }
        let next = 1.0 / (1.0 + beta * power.expect(|p| p / (s + eta * p)));
        eta = (1.0 - cfg.damping) * eta + cfg.damping * next;
    }
    Err(Error::Solver {
        what: "MMSE fixed point",
        iterations: cfg.max_iterations,
        residual: residual(eta).abs(),
    })
}

/// Whether the optimal detector decides users individually or jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MudMode {
    Individual,
    Joint,
}

/// Converged state of the optimal-detector large-system equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeSystemState {
    pub beta: f64,
    pub noise_power: f64,
    pub power: PowerDistribution,
    pub e: f64,
    pub f: f64,
    pub m: f64,
    pub q: f64,
    pub eta: f64,
    pub iterations: usize,
    /// Largest scaled equation residual at the returned state.
    pub residual: f64,
}

/// Residual tolerance of the optimal-detector solver.
pub const OPTIMAL_RESIDUAL_TOL: f64 = 1e-10;

struct Coupled<'a> {
    beta: f64,
    sn2: f64,
    s2: f64,
    power: &'a PowerDistribution,
}

impl Coupled<'_> {
    fn map(&self, [e, m, f, q]: [f64; 4]) -> [f64; 4] {
        let d = self.s2 + self.beta * (1.0 - m);
        let e_new = 1.0 / d;
        let m_new = 1.0 - self.power.expect(|p| p / (1.0 + p * e));
        let f_new = (self.sn2 + self.beta * (1.0 - 2.0 * m + q)) / (d * d);
        let q_new = self
            .power
            .expect(|p| (p.powi(3) * e * e + p * p * f) / (1.0 + p * e).powi(2));
        [e_new, m_new, f_new, q_new]
    }

    fn residual(&self, x: [f64; 4]) -> f64 {
        let y = self.map(x);
        x.iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Solves the coupled `(E, m, F, q)` equations by damped iteration and
/// returns `eta = E^2 sigma_n^2 / F`, clamped to `[0, 1]`.
///
/// The inner `E` of `m = 1 - E_P[P / (1 + P E)]` is the scalar variable and
/// the outer expectation is over the power law. `sigma^2` is `sigma_n^2` in
/// individual mode and `0` in joint mode.
pub fn large_system_optimal(
    beta: f64,
    noise_power: f64,
    power: &PowerDistribution,
    mode: MudMode,
) -> Result<LargeSystemState> {
    large_system_optimal_with(beta, noise_power, power, mode, SolverConfig::default())
}

pub fn large_system_optimal_with(
    beta: f64,
    noise_power: f64,
    power: &PowerDistribution,
    mode: MudMode,
    cfg: SolverConfig,
) -> Result<LargeSystemState> {
    check_large(beta, noise_power)?;
    let s2 = match mode {
        MudMode::Individual => noise_power,
        MudMode::Joint => 0.0,
    };
    if s2 == 0.0 {
        // With sigma^2 = 0 the first two equations reduce to
        // beta E_P[PE / (1 + PE)] = 1, whose left side increases to
        // beta Pr(P > 0) as E grows.
        let active = power.expect(|p| if p > 0.0 { 1.0 } else { 0.0 });
        if !(beta * active > 1.0) {
            return domain(format!(
                "joint mode has no finite solution unless beta Pr(P > 0) > 1, got {}",
                beta * active
            ));
        }
    }
    let sys = Coupled {
        beta,
        sn2: noise_power,
        s2,
        power,
    };
    let mut damping = cfg.damping;
    let mut last_residual = f64::INFINITY;
    // Damped restarts on divergence.
    for _ in 0..4 {
        let e0 = 1.0 / (s2 + beta);
        let mut x = [e0, 0.0, noise_power * e0 * e0, 0.0];
        let mut diverged = false;
        for it in 1..=cfg.max_iterations {
            let y = sys.map(x);
            if y.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break;
            }
            let mut step: f64 = 0.0;
            for (xi, yi) in x.iter_mut().zip(y) {
                let next = (1.0 - damping) * *xi + damping * yi;
                step = step.max((next - *xi).abs() / xi.abs().max(1.0));
                *xi = next;
            }
            if step <= cfg.tolerance * 1e-2 {
                let residual = sys.residual(x);
                if residual <= OPTIMAL_RESIDUAL_TOL {
                    let [e, m, f, q] = x;
                    let eta = (e * e * noise_power / f).clamp(0.0, 1.0);
                    return Ok(LargeSystemState {
                        beta,
                        noise_power,
                        power: power.clone(),
                        e,
                        f,
                        m,
                        q,
                        eta,
                        iterations: it,
                        residual,
                    });
                }
            }
        }
        if !diverged {
            last_residual = sys.residual(x);
            break;
        }
        damping *= 0.5;
    }
    Err(Error::Solver {
        what: "optimal-detector large-system equations",
        iterations: cfg.max_iterations,
        residual: last_residual,
    })
}
