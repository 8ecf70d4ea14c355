//! Matched-filter, successive-cancellation and maximum-likelihood detectors
//! operating on the matched-filter-bank output `y = R A b + n`.

pub(crate) mod analytic;

pub use analytic::{
    analytic_ber_optimal_bound, analytic_ber_optimal_bound_from, analytic_ber_sic,
    enumerate_indecomposable, enumerate_indecomposable_with, DecompositionRule, ErrorVector,
    ENUMERATION_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sysmodel::{CorrelationMatrix, Symbol};

/// Default cap on the number of jointly detected users for exhaustive ML.
pub const OPTIMAL_LIMIT: usize = 16;

/// Gaussian tail probability `P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Receiver used at the base station (and at the relay for network coding).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    MatchedFilter,
    Sic,
    Optimal,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MatchedFilter => "matched-filter",
            Self::Sic => "sic",
            Self::Optimal => "optimal",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched-filter" | "mf" => Ok(Self::MatchedFilter),
            "sic" | "sc" => Ok(Self::Sic),
            "optimal" | "ml" => Ok(Self::Optimal),
            other => Err(Error::Config(format!(
                "unknown detector `{other}` (expected matched-filter, sic or optimal)"
            ))),
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Joint decisions for one observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorResult {
    /// `+-1` for active users, `0` for the others.
    pub decisions: Vec<Symbol>,
    /// Active users in the order they were decided.
    pub detection_order: Vec<usize>,
    pub active_mask: Vec<bool>,
}

#[inline]
fn sign(x: f64) -> Symbol {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// `sign(y[user])` with ties to `+1`.
pub fn matched_filter_detect(y: &[f64], user: usize) -> Result<Symbol> {
    match y.get(user) {
        Some(&v) => Ok(sign(v)),
        None => domain(format!(
            "user {user} out of range for {} observations",
            y.len()
        )),
    }
}

fn check_inputs(y: &[f64], r: &CorrelationMatrix, a: &[f64], active: &[bool]) -> Result<()> {
    let k = r.dim();
    if y.len() != k || a.len() != k || active.len() != k {
        return domain(format!(
            "dimension mismatch: R is {k}x{k}, y has {}, A has {}, mask has {}",
            y.len(),
            a.len(),
            active.len()
        ));
    }
    Ok(())
}

/// Strongest-first successive cancellation over the active users.
pub fn sic_detect(
    y: &[f64],
    r: &CorrelationMatrix,
    a: &[f64],
    active: &[bool],
) -> Result<DetectorResult> {
    check_inputs(y, r, a, active)?;
    let mut ws = Workspace::new(r.dim());
    let mut decisions = vec![0; r.dim()];
    ws.sic(y, r, a, active, &mut decisions);
    Ok(DetectorResult {
        decisions,
        detection_order: ws.order.clone(),
        active_mask: active.to_vec(),
    })
}

/// Exhaustive maximum-likelihood detection over the active users.
///
/// Maximizes `2 b^T A y - b^T A R A b`. Candidates are visited in
/// lexicographic order (`-1 < +1`, lowest active index most significant) and
/// the incumbent is replaced only by a strictly larger metric.
pub fn optimal_detect(
    y: &[f64],
    r: &CorrelationMatrix,
    a: &[f64],
    active: &[bool],
    limit: usize,
) -> Result<DetectorResult> {
    check_inputs(y, r, a, active)?;
    let mut ws = Workspace::new(r.dim());
    let mut decisions = vec![0; r.dim()];
    ws.optimal(y, r, a, active, limit, &mut decisions)?;
    Ok(DetectorResult {
        decisions,
        detection_order: ws.order.clone(),
        active_mask: active.to_vec(),
    })
}

/// Dispatches on `kind`. The matched filter decides each active user
/// independently.
pub fn detect(
    kind: DetectorKind,
    y: &[f64],
    r: &CorrelationMatrix,
    a: &[f64],
    active: &[bool],
    limit: usize,
) -> Result<DetectorResult> {
    check_inputs(y, r, a, active)?;
    let mut ws = Workspace::new(r.dim());
    let mut decisions = vec![0; r.dim()];
    ws.detect(kind, y, r, a, active, limit, &mut decisions)?;
    Ok(DetectorResult {
        decisions,
        detection_order: ws.order.clone(),
        active_mask: active.to_vec(),
    })
}

/// Reusable scratch buffers for repeated detection without allocation.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    residual: Vec<f64>,
    order: Vec<usize>,
    h: Vec<f64>,
    u: Vec<f64>,
}

impl Workspace {
    pub fn new(k: usize) -> Self {
        Self {
            residual: vec![0.0; k],
            order: Vec::with_capacity(k),
            h: Vec::with_capacity(k * k),
            u: Vec::with_capacity(k),
        }
    }

    /// Writes the decisions of `kind` into `out`; inactive users get `0`.
    #[allow(clippy::too_many_arguments)]
    pub fn detect(
        &mut self,
        kind: DetectorKind,
        y: &[f64],
        r: &CorrelationMatrix,
        a: &[f64],
        active: &[bool],
        limit: usize,
        out: &mut [Symbol],
    ) -> Result<()> {
        match kind {
            DetectorKind::MatchedFilter => {
                self.order.clear();
                for k in 0..y.len() {
                    out[k] = if active[k] {
                        self.order.push(k);
                        sign(y[k])
                    } else {
                        0
                    };
                }
                Ok(())
            }
            DetectorKind::Sic => {
                self.sic(y, r, a, active, out);
                Ok(())
            }
            DetectorKind::Optimal => self.optimal(y, r, a, active, limit, out),
        }
    }

    pub(crate) fn sic(
        &mut self,
        y: &[f64],
        r: &CorrelationMatrix,
        a: &[f64],
        active: &[bool],
        out: &mut [Symbol],
    ) {
        let k = y.len();
        self.residual.clear();
        self.residual.extend_from_slice(y);
        self.order.clear();
        self.order.extend((0..k).filter(|&i| active[i]));
        // Stable sort keeps ascending index among equal amplitudes.
        self.order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
        out.iter_mut().for_each(|d| *d = 0);
        for &user in &self.order {
            let d = sign(self.residual[user]);
            out[user] = d;
            let c = a[user] * f64::from(d);
            for (res, rij) in self.residual.iter_mut().zip(r.row(user)) {
                *res -= rij * c;
            }
        }
    }

    pub(crate) fn optimal(
        &mut self,
        y: &[f64],
        r: &CorrelationMatrix,
        a: &[f64],
        active: &[bool],
        limit: usize,
        out: &mut [Symbol],
    ) -> Result<()> {
        self.order.clear();
        self.order.extend((0..y.len()).filter(|&i| active[i]));
        let n = self.order.len();
        if n > limit {
            return Err(Error::Capacity {
                what: "exhaustive ML detection",
                requested: n,
                limit,
            });
        }
        out.iter_mut().for_each(|d| *d = 0);
        if n == 0 {
            return Ok(());
        }
        self.h.clear();
        self.u.clear();
        for &i in &self.order {
            self.u.push(a[i] * y[i]);
            for &j in &self.order {
                self.h.push(a[i] * r.get(i, j) * a[j]);
            }
        }
        let (h, u) = (&self.h, &self.u);
        let mut best = f64::NEG_INFINITY;
        let mut best_c = 0usize;
        for c in 0..(1usize << n) {
            let bit = |j: usize| {
                if (c >> (n - 1 - j)) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut metric = 0.0;
            for j in 0..n {
                let bj = bit(j);
                let row = &h[j * n..(j + 1) * n];
                let mut hb = 0.0;
                for (l, hjl) in row.iter().enumerate() {
                    hb += hjl * bit(l);
                }
                metric += bj * (2.0 * u[j] - hb);
            }
            if metric > best {
                best = metric;
                best_c = c;
            }
        }
        for (j, &user) in self.order.iter().enumerate() {
            out[user] = if (best_c >> (n - 1 - j)) & 1 == 1 {
                1
            } else {
                -1
            };
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{correlation_two_user, received_vector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_reference_values() {
        // High-precision erfc values.
        let table = [
            (1.0, 0.158_655_253_931_457_05),
            (2.0, 0.022_750_131_948_179_21),
            (3.0, 0.001_349_898_031_630_094_5),
            (5.0, 2.866_515_718_791_939e-7),
            (8.0, 6.220_960_574_271_784e-16),
            (-1.0, 0.841_344_746_068_542_9),
            (0.5, 0.308_537_538_725_986_9),
            (6.5, 4.016_000_583_859_118e-11),
        ];
        for (x, q) in table {
            assert_relative_eq!(q_function(x), q, max_relative = 1e-12);
        }
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_function(f64::INFINITY), 0.0);
        assert_eq!(q_function(f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn matched_filter_ties_go_positive() {
        assert_eq!(matched_filter_detect(&[2.3], 0).unwrap(), 1);
        assert_eq!(matched_filter_detect(&[-0.1], 0).unwrap(), -1);
        assert_eq!(matched_filter_detect(&[0.0], 0).unwrap(), 1);
        assert!(matched_filter_detect(&[0.0], 1).is_err());
    }

    #[test]
    fn sic_hand_example() {
        let r = correlation_two_user(0.8).unwrap();
        let a = [1.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = received_vector(&r, &a, &[1, -1], 0.0, &mut rng).unwrap();
        assert_relative_eq!(y[1], -1.2, max_relative = 1e-12);
        let res = sic_detect(&y, &r, &a, &[true, true]).unwrap();
        assert_eq!(res.detection_order, vec![1, 0]);
        assert_eq!(res.decisions, vec![1, -1]);
    }

    #[test]
    fn sic_ties_by_index() {
        let r = CorrelationMatrix::identity(3);
        let res = sic_detect(&[1.0, -1.0, 1.0], &r, &[1.0, 1.0, 1.0], &[true; 3]).unwrap();
        assert_eq!(res.detection_order, vec![0, 1, 2]);
        let res = sic_detect(
            &[1.0, -1.0, 1.0],
            &r,
            &[1.0, 2.0, 1.0],
            &[true, true, false],
        )
        .unwrap();
        assert_eq!(res.detection_order, vec![1, 0]);
        assert_eq!(res.decisions, vec![1, -1, 0]);
    }

    #[test]
    fn optimal_single_user_and_capacity() {
        let r = CorrelationMatrix::identity(1);
        for y in [-0.3, 1e-6, 2.0] {
            let d = optimal_detect(&[y], &r, &[1.5], &[true], OPTIMAL_LIMIT).unwrap();
            assert_eq!(d.decisions[0], matched_filter_detect(&[y], 0).unwrap());
        }
        // An exact tie resolves to the lexicographically smallest vector.
        let d = optimal_detect(&[0.0], &r, &[1.5], &[true], OPTIMAL_LIMIT).unwrap();
        assert_eq!(d.decisions[0], -1);
        let r = CorrelationMatrix::identity(3);
        let err = optimal_detect(&[0.0; 3], &r, &[1.0; 3], &[true; 3], 2).unwrap_err();
        assert!(matches!(
            err,
            Error::Capacity {
                requested: 3,
                limit: 2,
                ..
            }
        ));
    }

    #[test]
    fn optimal_noiseless_recovery() {
        let r = CorrelationMatrix::from_rows(&[
            vec![1.0, 0.5, -0.25],
            vec![0.5, 1.0, 0.25],
            vec![-0.25, 0.25, 1.0],
        ])
        .unwrap();
        let a = [1.0, 2.0, 0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for c in 0..8 {
            let b: Vec<Symbol> = (0..3)
                .map(|j| if (c >> j) & 1 == 1 { 1 } else { -1 })
                .collect();
            let y = received_vector(&r, &a, &b, 0.0, &mut rng).unwrap();
            assert_eq!(
                optimal_detect(&y, &r, &a, &[true; 3], 16)
                    .unwrap()
                    .decisions,
                b
            );
        }
    }

    fn brute_force(y: &[f64], r: &CorrelationMatrix, a: &[f64]) -> Vec<Symbol> {
        let k = y.len();
        let mut all: Vec<Vec<Symbol>> = vec![vec![]];
        for _ in 0..k {
            all = all
                .into_iter()
                .flat_map(|v| {
                    let mut lo = v.clone();
                    lo.push(-1);
                    let mut hi = v;
                    hi.push(1);
                    [lo, hi]
                })
                .collect();
        }
        let metric = |b: &[Symbol]| {
            let ab: Vec<f64> = (0..k).map(|i| a[i] * f64::from(b[i])).collect();
            let lin: f64 = (0..k).map(|i| ab[i] * y[i]).sum();
            let quad: f64 = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| ab[i] * r.get(i, j) * ab[j])
                .sum();
            2.0 * lin - quad
        };
        all.into_iter()
            .max_by(|x, y| metric(x).total_cmp(&metric(y)).then(y.cmp(x)))
            .unwrap()
    }

    proptest! {
        #[test]
        fn optimal_matches_brute_force(seed in any::<u64>(), sigma in 0.1f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = crate::sysmodel::random_signatures(3, 8, &mut rng);
            let r = crate::sysmodel::cross_correlation(&s);
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..3.0)).collect();
            let b: Vec<Symbol> = (0..3).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let y = received_vector(&r, &a, &b, sigma, &mut rng).unwrap();
            let got = optimal_detect(&y, &r, &a, &[true; 3], 16).unwrap().decisions;
            prop_assert_eq!(got, brute_force(&y, &r, &a));
        }

        #[test]
        fn orthogonal_codes_reduce_to_matched_filter(y in proptest::collection::vec(-3.0f64..3.0, 4), a in proptest::collection::vec(0.1f64..3.0, 4)) {
            let r = CorrelationMatrix::identity(4);
            let mf: Vec<Symbol> = (0..4).map(|i| matched_filter_detect(&y, i).unwrap()).collect();
            prop_assert_eq!(&sic_detect(&y, &r, &a, &[true; 4]).unwrap().decisions, &mf);
            prop_assert_eq!(&optimal_detect(&y, &r, &a, &[true; 4], 16).unwrap().decisions, &mf);
        }

        #[test]
        fn optimal_scale_invariant(seed in any::<u64>(), c in 0.25f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = crate::sysmodel::random_signatures(3, 16, &mut rng);
            let r = crate::sysmodel::cross_correlation(&s);
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..3.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            let base = optimal_detect(&y, &r, &a, &[true; 3], 16).unwrap().decisions;
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
            prop_assert_eq!(optimal_detect(&ys, &r, &as_, &[true; 3], 16).unwrap().decisions, base);
        }
    }
}
