//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 5 and 6 are known not to reproduce with this system model; they
//! are evaluated and reported but do not fail the run. Any other failure
//! makes the process exit nonzero.

use std::time::Instant;

use coopmud::analysis::{
    asymptotic_efficiency_two_user, large_system_decorrelator, large_system_mmse,
    large_system_optimal, optimal_coding_set_size, special_case_avg_ber, spectral_efficiency,
    MudMode, PowerDistribution, SpecialCaseParams, OPTIMAL_RESIDUAL_TOL,
};
use coopmud::detectors::{
    analytic_ber_optimal_bound, analytic_ber_sic, enumerate_indecomposable, matched_filter_detect,
    optimal_detect, q_function, sic_detect, DetectorKind, Workspace, OPTIMAL_LIMIT,
};
use coopmud::harness::{estimate_ber_with, RunOptions, StoppingRule, SweepRow, SweepTable};
use coopmud::protocols::{
    bound_mimo_mud, link_profile, protocol1_ber, protocol2_ber, user_ber, xor_encode, CodeModel,
    LinkErrorProfile, RelayAssignment, Scenario,
};
use coopmud::sysmodel::{
    amplitude_from_distance, chip_level_observation, correlation_two_user, cross_correlation,
    random_signatures, signal_into, CorrelationMatrix, Symbol, Topology,
};
use coopmud_cli::commands::execute;
use coopmud_cli::output::render_csvs;
use coopmud_cli::presets::preset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that are reported but allowed to fail.
const KNOWN_FAILURES: [u32; 2] = [5, 6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

#[derive(Default)]
struct Checks {
    count: usize,
    bad: Vec<String>,
}

impl Checks {
    fn num(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.count += 1;
        if !(rel_close(got, want, tol) || (want == 0.0 && got == 0.0)) {
            self.bad.push(format!("{name}: {got} vs {want}"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.bad.push(msg);
    }
}

// Closed forms and hand-arithmetic examples.
fn criterion1() -> Outcome {
    let mut c = Checks::default();
    const CF: f64 = 1e-12;
    const HAND: f64 = 1e-9;

    c.num(
        "amplitude unit",
        amplitude_from_distance(1.0, 1.0, 3.0).unwrap(),
        1.0,
        CF,
    );
    c.num(
        "amplitude",
        amplitude_from_distance(4.0, 1e4, 3.0).unwrap(),
        12.5,
        HAND,
    );

    let r = correlation_two_user(0.8).unwrap();
    let mut y = [0.0; 2];
    signal_into(&r, &[1.0, 1.0], &[1, 1], &mut y);
    c.num("R A b", y[0], 1.8, HAND);
    c.num("R A b", y[1], 1.8, HAND);
    signal_into(
        &CorrelationMatrix::identity(2),
        &[2.0, 3.0],
        &[1, -1],
        &mut y,
    );
    c.num("orthogonal", y[1], -3.0, CF);

    c.num("Q(0)", q_function(0.0), 0.5, CF);
    c.num("Q(1)", q_function(1.0), 0.158_655_253_931_457_05, CF);
    c.num("Q(inf)", q_function(f64::INFINITY), 0.0, CF);

    let mf = |v: f64| f64::from(matched_filter_detect(&[v], 0).unwrap());
    c.num("mf +", mf(2.3), 1.0, CF);
    c.num("mf -", mf(-0.1), -1.0, CF);
    c.num("mf tie", mf(0.0), 1.0, CF);

    // y = R A b with A = (1, 2), b = (+1, -1): (-0.6, -1.2).
    let sic = sic_detect(&[-0.6, -1.2], &r, &[1.0, 2.0], &[true, true]).unwrap();
    if sic.decisions != [1, -1] || sic.detection_order != [1, 0] {
        c.fail(format!("sic hand example: {:?}", sic));
    }
    let ml = optimal_detect(&[-0.6, -1.2], &r, &[1.0, 2.0], &[true, true], OPTIMAL_LIMIT).unwrap();
    if ml.decisions != [1, -1] {
        c.fail(format!("ml noiseless: {:?}", ml.decisions));
    }

    let p = analytic_ber_sic(&[1.0, 2.0], 1.0, 8).unwrap();
    let p2 = q_function(2.0 / (1.0f64 + 1.0 / 8.0).sqrt());
    let p1 = q_function(1.0 / (1.0 + 0.5 * 4.0 * p2).sqrt());
    c.num("sic recursion P2", p[1], p2, CF);
    c.num("sic recursion P1", p[0], p1, CF);
    c.num(
        "sic K=1",
        analytic_ber_sic(&[1.7], 0.6, 16).unwrap()[0],
        q_function(1.7 / 0.6),
        CF,
    );

    let set = enumerate_indecomposable(&[1.0, 2.0], &r, 0).unwrap();
    let mut entries: Vec<Vec<Symbol>> = set.iter().map(|e| e.entries.clone()).collect();
    entries.sort();
    if entries != vec![vec![-1, 0], vec![-1, 1], vec![1, -1], vec![1, 0]] {
        c.fail(format!("indecomposable set: {entries:?}"));
    }
    let set0 = enumerate_indecomposable(&[1.0, 2.0], &CorrelationMatrix::identity(2), 0).unwrap();
    if set0.len() != 2 {
        c.fail(format!("indecomposable at rho=0: {}", set0.len()));
    }
    let (a1, a2, rho, sigma) = (1.0f64, 2.0f64, 0.8, 0.7);
    c.num(
        "ml bound K=2",
        analytic_ber_optimal_bound(&[a1, a2], &r, sigma, 0).unwrap(),
        q_function(a1 / sigma)
            + 0.5 * q_function((a1 * a1 + a2 * a2 - 2.0 * rho * a1 * a2).sqrt() / sigma),
        CF,
    );

    c.num("xor", f64::from(xor_encode(&[1, 0, 1]).unwrap()), 0.0, CF);
    c.num("p1", protocol1_ber(0.1, 0.2, 0.3), 0.044, HAND);
    c.num("p1 useless relay", protocol1_ber(0.2, 1.0, 0.4), 0.2, CF);
    let two = RelayAssignment::xor(2, vec![0, 1]).unwrap();
    let prof = LinkErrorProfile::new(
        vec![0.1, 0.1, 0.0],
        vec![2],
        vec![vec![0.05, 0.1, 0.0]],
        vec![0.05],
    )
    .unwrap();
    c.num(
        "p2",
        protocol2_ber(0, &two, &prof).unwrap(),
        0.1 * (1.0 - 0.95 * 0.95 * 0.9 * 0.9),
        HAND,
    );
    c.num("mimo bound", bound_mimo_mud(0.1, &[0.2, 0.3]), 0.006, HAND);
    c.num("spectral", spectral_efficiency(2, 1).unwrap(), 0.5, CF);
    c.num("spectral", spectral_efficiency(10, 1).unwrap(), 0.9, CF);
    c.num(
        "efficiency",
        asymptotic_efficiency_two_user(1.0, 0.8, 0.0, 0.8).unwrap(),
        0.36,
        HAND,
    );
    c.num(
        "special case",
        special_case_avg_ber(&SpecialCaseParams::new(0.1, 0.05, 0.05, 4, 2).unwrap()),
        0.061_418_125,
        HAND,
    );
    c.num(
        "mstar",
        optimal_coding_set_size(0.005, 0.005, 0.005, 50).unwrap() as f64,
        50.0,
        CF,
    );
    c.num(
        "decorrelator",
        large_system_decorrelator(0.3).unwrap(),
        0.7,
        CF,
    );
    c.num(
        "mmse beta=0",
        large_system_mmse(0.0, 0.5, &PowerDistribution::point_mass(2.0).unwrap()).unwrap(),
        1.0,
        CF,
    );

    let n = c.count;
    outcome(
        c.bad.is_empty(),
        if c.bad.is_empty() {
            format!("{n} closed-form and hand-arithmetic checks")
        } else {
            c.bad.join("; ")
        },
    )
}

fn equicorrelated(k: usize, rho: f64) -> CorrelationMatrix {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { rho }).collect())
        .collect();
    CorrelationMatrix::from_rows(&rows).unwrap()
}

// Monte Carlo ML error rate never exceeds the error-vector bound.
fn criterion2() -> Outcome {
    const INSTANCES: usize = 100;
    const VECTORS: u64 = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b0d);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for inst in 0..INSTANCES {
        let k = rng.random_range(2..=4usize);
        let lo = -0.9 / (k as f64 - 1.0);
        let rho = rng.random_range(lo..0.9);
        let r = equicorrelated(k, rho);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
        let sigma = rng.random_range(0.3..1.0);
        let bounds: Vec<f64> = (0..k)
            .map(|u| analytic_ber_optimal_bound(&a, &r, sigma, u).unwrap())
            .collect();
        let factor = r.cholesky().unwrap();
        let active = vec![true; k];
        let mut ws = Workspace::new(k);
        let mut b = vec![0 as Symbol; k];
        let mut y = vec![0.0; k];
        let mut noise = vec![0.0; k];
        let mut dec = vec![0 as Symbol; k];
        let mut errors = vec![0u64; k];
        let mut mc = ChaCha8Rng::seed_from_u64(1000 + inst as u64);
        for _ in 0..VECTORS {
            let bits: u8 = mc.random();
            for (i, s) in b.iter_mut().enumerate() {
                *s = if bits >> i & 1 == 0 { -1 } else { 1 };
            }
            signal_into(&r, &a, &b, &mut y);
            factor.sample_into(sigma, &mut mc, &mut noise);
            y.iter_mut().zip(&noise).for_each(|(v, n)| *v += n);
            ws.detect(
                DetectorKind::Optimal,
                &y,
                &r,
                &a,
                &active,
                OPTIMAL_LIMIT,
                &mut dec,
            )
            .unwrap();
            for u in 0..k {
                errors[u] += u64::from(dec[u] != b[u]);
            }
        }
        for u in 0..k {
            let p = errors[u] as f64 / VECTORS as f64;
            let se = (p * (1.0 - p) / VECTORS as f64).sqrt();
            let margin = (p - bounds[u]) / se.max(f64::MIN_POSITIVE);
            if p > 0.0 {
                worst = worst.max(margin);
            }
            if p > bounds[u] + 3.0 * se {
                violations.push(format!(
                    "instance {inst} user {u}: {p:.4e} > {:.4e}",
                    bounds[u]
                ));
            }
        }
    }
    outcome(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{INSTANCES} instances, 1e6 vectors each; largest (MC - bound)/SE = {worst:.2}")
        } else {
            violations.join("; ")
        },
    )
}

// Chip-level SIC with fresh random signatures vs the cancellation recursion.
fn criterion3() -> Outcome {
    const TRIALS: u64 = 300_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x51c);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut logged = Vec::new();
    let mut worst: f64 = 1.0;
    for k in [2usize, 3] {
        for m in [8usize, 16, 32] {
            for base in [1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
                let a: Vec<f64> = (0..k).map(|i| base * 1.5f64.powi(i as i32)).collect();
                let sigma = 1.0;
                let analytic = analytic_ber_sic(&a, sigma, m).unwrap();
                if !analytic.iter().any(|p| (1e-4..=1e-1).contains(p)) {
                    continue;
                }
                let active = vec![true; k];
                let mut ws = Workspace::new(k);
                let mut dec = vec![0 as Symbol; k];
                let mut errors = vec![0u64; k];
                for _ in 0..TRIALS {
                    let sigs = random_signatures(k, m, &mut rng);
                    let r = cross_correlation(&sigs);
                    let bits: u8 = rng.random();
                    let b: Vec<Symbol> = (0..k)
                        .map(|i| if bits >> i & 1 == 0 { -1 } else { 1 })
                        .collect();
                    let y = chip_level_observation(&sigs, &a, &b, sigma, &mut rng).unwrap();
                    ws.detect(
                        DetectorKind::Sic,
                        &y,
                        &r,
                        &a,
                        &active,
                        OPTIMAL_LIMIT,
                        &mut dec,
                    )
                    .unwrap();
                    for u in 0..k {
                        errors[u] += u64::from(dec[u] != b[u]);
                    }
                }
                for u in 0..k {
                    let p = analytic[u];
                    if !(1e-4..=1e-1).contains(&p) {
                        continue;
                    }
                    let mc = errors[u] as f64 / TRIALS as f64;
                    let ratio = mc / p;
                    let line = format!("K={k} M={m} A={a:.3?} user {u}: MC {mc:.3e} vs {p:.3e}");
                    if p >= 1e-3 {
                        checked += 1;
                        worst = if (ratio.ln()).abs() > worst.ln().abs() {
                            ratio
                        } else {
                            worst
                        };
                        if !(0.5..=2.0).contains(&ratio) {
                            failures.push(line);
                        }
                    } else if !(0.5..=2.0).contains(&ratio) {
                        logged.push(line);
                    }
                }
            }
        }
    }
    for l in &logged {
        println!("    note (outside [1e-3, 1e-1]): {l}");
    }
    outcome(
        failures.is_empty() && checked > 0,
        if failures.is_empty() {
            format!("{checked} operating points within a factor 2; extreme ratio {worst:.3}")
        } else {
            failures.join("; ")
        },
    )
}

// Simulated protocols in the independent-links regime vs the closed forms.
fn criterion4() -> Outcome {
    const FRAMES: u64 = 1_000_000;
    let cases: Vec<(&str, Vec<f64>, RelayAssignment)> = vec![
        (
            "P1 |M|=1",
            vec![4.0, 6.0, 1.6],
            RelayAssignment::single(2, 0).unwrap(),
        ),
        (
            "P2 |M|=1",
            vec![4.0, 6.0, 1.6],
            RelayAssignment::xor(2, vec![0]).unwrap(),
        ),
        (
            "P2 |M|=2",
            vec![4.0, 6.0, 1.6],
            RelayAssignment::xor(2, vec![0, 1]).unwrap(),
        ),
        (
            "P2 |M|=3",
            vec![4.0, 5.0, 6.0, 1.6],
            RelayAssignment::xor(3, vec![0, 1, 2]).unwrap(),
        ),
    ];
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for (ci, (name, pos, asg)) in cases.into_iter().enumerate() {
        let k = pos.len();
        let topo = Topology::new(0.0, pos, vec![k - 1], 3.0).unwrap();
        let sc = Scenario::new(topo, 20.0, 1.0, 16)
            .unwrap()
            .with_code_model(CodeModel::Orthogonal);
        let profile = link_profile(&sc, DetectorKind::Optimal, asg.protocol).unwrap();
        let sources = (k - 1) as u64;
        let rule = StoppingRule::new(u64::MAX, FRAMES * sources).unwrap();
        let est = estimate_ber_with(
            &sc,
            std::slice::from_ref(&asg),
            DetectorKind::Optimal,
            rule,
            0xfeed + ci as u64,
            &RunOptions::default(),
        )
        .unwrap();
        if est.frames < FRAMES {
            bad.push(format!("{name}: only {} frames", est.frames));
        }
        for t in &est.per_user {
            let want = user_ber(t.user, Some(&asg), &profile).unwrap();
            let se = (want * (1.0 - want) / t.bits as f64).sqrt();
            let z = (t.ber() - want) / se;
            worst = worst.max(z.abs());
            if z.abs() > 3.0 {
                bad.push(format!(
                    "{name} user {}: {:.5e} vs {want:.5e} ({z:.2} sigma)",
                    t.user,
                    t.ber()
                ));
            }
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("4 cases, >= 1e6 frames each; largest deviation {worst:.2} sigma")
        } else {
            bad.join("; ")
        },
    )
}

fn values(table: &SweepTable, label: &str, det: DetectorKind) -> Vec<(f64, f64)> {
    table
        .series(label, det)
        .map(|r: &SweepRow| (r.sweep_value, r.ber))
        .collect()
}

/// First crossing of `target` from above, interpolating log10 BER linearly
/// in the sweep variable.
fn crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 > target && y1 <= target && y1 > 0.0 {
            let (l0, l1, lt) = (y0.log10(), y1.log10(), target.log10());
            Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

// Horizontal gap at BER 1e-3 between the XOR curve and the tighter bound.
fn criterion5(table: &SweepTable) -> Outcome {
    use DetectorKind::Optimal;
    let xor = values(table, "relay-xor", Optimal);
    let b1 = values(table, "bound-1", Optimal);
    let b2 = values(table, "bound-2", Optimal);
    let bound: Vec<(f64, f64)> = b1
        .iter()
        .filter_map(|&(x, v1)| {
            b2.iter()
                .find(|(x2, _)| *x2 == x)
                .map(|&(_, v2)| (x, v1.max(v2)))
        })
        .collect();
    match (crossing(&xor, 1e-3), crossing(&bound, 1e-3)) {
        (Some(xs), Some(xb)) => {
            let gap = xs - xb;
            outcome(
                (gap - 1.0).abs() <= 0.5,
                format!(
                    "gap {gap:.3} dB (XOR at {xs:.3} dB, bound at {xb:.3} dB); want 1.0 +- 0.5"
                ),
            )
        }
        (a, b) => outcome(
            false,
            format!("no crossing of 1e-3: XOR {a:?}, bound {b:?}"),
        ),
    }
}

// Relay-location structure at 40 dB with cancellation.
fn criterion6(table: &SweepTable) -> Outcome {
    use DetectorKind::Sic;
    let rows = |l: &'static str| -> Vec<&SweepRow> { table.series(l, Sic).collect() };
    let none = rows("no-relay");
    let xor = rows("relay-xor");
    let user1 = rows("relay-user-1");
    let user2 = rows("relay-user-2");
    let last_better = |v: &[&SweepRow]| -> Option<f64> {
        v.iter()
            .zip(&none)
            .filter(|(a, b)| a.ber < b.ber)
            .map(|(a, _)| a.sweep_value)
            .next_back()
    };
    let cross_xor = last_better(&xor);
    let cross_u1 = last_better(&user1);
    let sweet = xor
        .iter()
        .filter(|r| r.errors > 0)
        .min_by(|a, b| a.ber.total_cmp(&b.ber))
        .map(|r| r.sweep_value);
    let dominated = xor
        .iter()
        .enumerate()
        .all(|(i, x)| [&user1, &user2].iter().all(|s| x.ci_low <= s[i].ci_high));
    let near = |v: Option<f64>, want: f64| v.is_some_and(|x| (x - want).abs() <= 0.4 + 1e-9);
    let zero = table
        .rows
        .iter()
        .filter(|r| r.is_simulated() && r.errors == 0)
        .count();
    outcome(
        near(cross_xor, 2.8) && near(cross_u1, 2.2) && near(sweet, 1.8) && dominated,
        format!(
            "XOR crossover {cross_xor:?} (want 2.8), user-1 crossover {cross_u1:?} (want 2.2), \
             sweet spot {sweet:?} (want 1.8), XOR below single-user relays: {dominated}; \
             {zero} simulated points had zero errors"
        ),
    )
}

// Coding-set size against brute force.
fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = Vec::new();
    for _ in 0..1000 {
        let (p_sd, p_sr, p_rd) = (
            rng.random_range(0.0..=0.3),
            rng.random_range(0.0..=0.3),
            rng.random_range(0.0..=0.3),
        );
        let k = rng.random_range(1..=64usize);
        let got = optimal_coding_set_size(p_sd, p_sr, p_rd, k).unwrap();
        let ber =
            |m| special_case_avg_ber(&SpecialCaseParams::new(p_sd, p_sr, p_rd, k, m).unwrap());
        let mut best = 1;
        for m in 2..=k {
            if ber(m) < ber(best) {
                best = m;
            }
        }
        if got != best {
            bad.push(format!("({p_sd}, {p_sr}, {p_rd}, {k}): {got} vs {best}"));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "1000 random tuples match".to_string()
        } else {
            bad.join("; ")
        },
    )
}

// Large-system solvers.
fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let beta = rng.random_range(0.0..3.0);
        let s = rng.random_range(0.05..2.0);
        let p = rng.random_range(0.1..10.0);
        let eta = large_system_mmse(beta, s, &PowerDistribution::point_mass(p).unwrap()).unwrap();
        let b = s + beta * p - p;
        let root = (-b + (b * b + 4.0 * p * s).sqrt()) / (2.0 * p);
        worst = worst.max((eta - root).abs());
        if (eta - root).abs() > 1e-10 {
            bad.push(format!("mmse ({beta}, {s}, {p}): {eta} vs {root}"));
        }
    }
    for i in 0..=15 {
        let beta = i as f64 * 0.1;
        let want = (1.0 - beta).max(0.0);
        if large_system_decorrelator(beta).unwrap() != want {
            bad.push(format!("decorrelator at {beta}"));
        }
    }
    let pd = PowerDistribution::point_mass(1.0).unwrap();
    let mut states = 0;
    for (mode, loads) in [
        (MudMode::Individual, [0.1, 0.5, 1.0, 2.0]),
        (MudMode::Joint, [1.1, 1.5, 2.0, 4.0]),
    ] {
        for beta in loads {
            for s in [0.1, 0.5, 1.0, 2.0] {
                match large_system_optimal(beta, s, &pd, mode) {
                    Ok(st) => {
                        states += 1;
                        if st.residual > OPTIMAL_RESIDUAL_TOL || !(0.0..=1.0).contains(&st.eta) {
                            bad.push(format!(
                                "optimal {mode:?} ({beta}, {s}): residual {:e}, eta {}",
                                st.residual, st.eta
                            ));
                        }
                    }
                    Err(e) => bad.push(format!("optimal {mode:?} ({beta}, {s}): {e}")),
                }
            }
        }
    }
    let eta0 = large_system_optimal(1e-12, 0.5, &pd, MudMode::Individual)
        .map(|s| s.eta)
        .unwrap_or(f64::NAN);
    if eta0.is_nan() || (eta0 - 1.0).abs() > 1e-8 {
        bad.push(format!("small-load limit {eta0}"));
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("MMSE max error {worst:.1e}; {states} optimal states within residual tolerance")
        } else {
            bad.join("; ")
        },
    )
}

fn run_preset(id: &str, workers: usize) -> (SweepTable, Vec<(String, Vec<u8>)>) {
    let cfg = preset(id).expect("preset exists");
    let table = execute(&cfg, Some(workers)).expect("preset runs");
    let csvs = render_csvs(&table).expect("csv renders");
    (table, csvs)
}

fn report(n: u32, title: &str, o: &Outcome, secs: f64, failed: &mut Vec<u32>) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {n}: {title} [{secs:.1} s] {}", o.detail);
    if !o.pass {
        failed.push(n);
    }
}

fn main() {
    let mut failed = Vec::new();
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed().as_secs_f64())
    };

    let (o, s) = timed(&criterion1);
    report(1, "closed-form examples", &o, s, &mut failed);
    let (o, s) = timed(&criterion7);
    report(7, "coding-set size vs brute force", &o, s, &mut failed);
    let (o, s) = timed(&criterion8);
    report(8, "large-system solvers", &o, s, &mut failed);
    let (o, s) = timed(&criterion2);
    report(2, "ML bound holds", &o, s, &mut failed);
    let (o, s) = timed(&criterion3);
    report(3, "SIC recursion accuracy", &o, s, &mut failed);
    let (o, s) = timed(&criterion4);
    report(4, "protocol formulas", &o, s, &mut failed);

    let t = Instant::now();
    let (t3b, csv3b) = run_preset("fig3b", 1);
    let o = criterion5(&t3b);
    report(
        5,
        "fig3b gap at BER 1e-3",
        &o,
        t.elapsed().as_secs_f64(),
        &mut failed,
    );

    let t = Instant::now();
    let (t4a, csv4a) = run_preset("fig4a", 1);
    let o = criterion6(&t4a);
    report(
        6,
        "fig4a relay-location structure",
        &o,
        t.elapsed().as_secs_f64(),
        &mut failed,
    );

    let t = Instant::now();
    let (_, csv3b_w) = run_preset("fig3b", 3);
    let (_, csv4a_w) = run_preset("fig4a", 3);
    let same = csv3b == csv3b_w && csv4a == csv4a_w;
    let o = outcome(
        same,
        format!(
            "{} CSV files compared between 1 and 3 workers",
            csv3b.len() + csv4a.len()
        ),
    );
    report(
        9,
        "reproducibility across worker counts",
        &o,
        t.elapsed().as_secs_f64(),
        &mut failed,
    );

    let unexpected: Vec<u32> = failed
        .iter()
        .copied()
        .filter(|n| !KNOWN_FAILURES.contains(n))
        .collect();
    println!(
        "acceptance: {} passed, {} failed {:?}; known failures {:?}",
        9 - failed.len(),
        failed.len(),
        failed,
        KNOWN_FAILURES
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
