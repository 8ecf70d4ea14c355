//! Frame-level simulation of the two-stage cooperative protocol.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Protocol, RelayAssignment};
use crate::detectors::{DetectorKind, Workspace, OPTIMAL_LIMIT};
use crate::error::{Error, Result};
use crate::sysmodel::{
    cross_correlation, db_to_linear, random_signatures, signal_into, CorrelationMatrix, LinkGains,
    NoiseFactor, SignatureSet, Symbol, Topology,
};

/// What the relays do during the first stage of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Relays forward the previous frame's coded bit while the sources send
    /// new bits, so every slot carries fresh source data.
    Pipelined,
    /// Relays stay silent in the first stage.
    Isolated,
}

/// How signatures are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeModel {
    /// Fresh random binary signatures every frame.
    Random,
    /// The same signatures in every frame.
    Fixed(SignatureSet),
    /// Mutually orthogonal signatures (`R = I`).
    Orthogonal,
}

/// Everything a frame needs apart from the assignment and detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub gains: LinkGains,
    pub spreading_gain: usize,
    pub code_model: CodeModel,
    pub schedule: Schedule,
    pub optimal_limit: usize,
}

impl Scenario {
    /// Equal transmit power `tx_power_db` (dB) for every terminal, random
    /// codes, pipelined schedule.
    pub fn new(
        topology: Topology,
        tx_power_db: f64,
        noise_std: f64,
        spreading_gain: usize,
    ) -> Result<Self> {
        let gains = LinkGains::from_topology(&topology, db_to_linear(tx_power_db), noise_std)?;
        Self::with_gains(topology, gains, spreading_gain)
    }

    pub fn with_gains(topology: Topology, gains: LinkGains, spreading_gain: usize) -> Result<Self> {
        if spreading_gain == 0 {
            return Err(Error::Domain("spreading gain must be at least 1".into()));
        }
        if gains.to_bs().len() != topology.terminals() || gains.relays() != topology.relays() {
            return Err(Error::Config("link gains do not match the topology".into()));
        }
        Ok(Self {
            topology,
            gains,
            spreading_gain,
            code_model: CodeModel::Random,
            schedule: Schedule::Pipelined,
            optimal_limit: OPTIMAL_LIMIT,
        })
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_code_model(mut self, code_model: CodeModel) -> Self {
        self.code_model = code_model;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.gains.noise_std()
    }

    /// Checks that the assignments fit the role layout.
    pub fn check_assignments(&self, assignments: &[RelayAssignment]) -> Result<()> {
        let topo = &self.topology;
        let mut seen = Vec::new();
        for a in assignments {
            if !topo.is_relay(a.relay) {
                return Err(Error::Config(format!(
                    "terminal {} is not a relay",
                    a.relay
                )));
            }
            if seen.contains(&a.relay) {
                return Err(Error::Config(format!(
                    "relay {} has two assignments",
                    a.relay
                )));
            }
            seen.push(a.relay);
            if let Some(&m) = a
                .coded_set
                .iter()
                .find(|&&m| m >= topo.terminals() || topo.is_relay(m))
            {
                return Err(Error::Config(format!("coded user {m} is not a source")));
            }
        }
        if let CodeModel::Fixed(s) = &self.code_model {
            if s.users() != topo.terminals() {
                return Err(Error::Config(format!(
                    "{} fixed signatures for {} terminals",
                    s.users(),
                    topo.terminals()
                )));
            }
        }
        Ok(())
    }
}

/// Result of one two-stage frame. Vectors indexed by terminal have
/// placeholder entries (`0`, `true`, `None`) at relay indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameOutcome {
    /// Source bits of the frame.
    pub sent: Vec<Symbol>,
    /// Final decisions after combining.
    pub decisions: Vec<Symbol>,
    pub correct: Vec<bool>,
    /// Base-station first-stage decision was right.
    pub stage1_correct: Vec<bool>,
    /// Per assignment: relay decision correctness for each source it decoded.
    pub relay_decoded: Vec<Vec<Option<bool>>>,
    /// Per assignment: the relay transmitted in the second stage.
    pub relay_transmitted: Vec<bool>,
    /// Per assignment: base-station decision on the relayed bit, when sent.
    pub relayed_bit_correct: Vec<Option<bool>>,
    /// Second-stage decisions on the fresh source bits, when that stage ran.
    pub stage2_fresh_correct: Vec<Option<bool>>,
}

/// Reusable per-worker frame simulator.
pub struct FrameSimulator<'a> {
    scenario: &'a Scenario,
    assignments: &'a [RelayAssignment],
    detector: DetectorKind,
    k: usize,
    sources: Vec<usize>,
    source_mask: Vec<bool>,
    relay_amps: Vec<Vec<f64>>,
    fixed: Option<(CorrelationMatrix, NoiseFactor)>,
    ws: Workspace,
    y: Vec<f64>,
    noise: Vec<f64>,
    syms: Vec<Symbol>,
    active: Vec<bool>,
    dec: Vec<Symbol>,
    stage1: Vec<Symbol>,
}

impl<'a> FrameSimulator<'a> {
    pub fn new(
        scenario: &'a Scenario,
        assignments: &'a [RelayAssignment],
        detector: DetectorKind,
    ) -> Result<Self> {
        scenario.check_assignments(assignments)?;
        let topo = &scenario.topology;
        let k = topo.terminals();
        let sources = topo.sources();
        let source_mask: Vec<bool> = (0..k).map(|i| !topo.is_relay(i)).collect();
        let relay_amps = assignments
            .iter()
            .map(|a| {
                let amps = scenario.gains.at_relay(a.relay).expect("checked relay");
                (0..k)
                    .map(|i| if source_mask[i] { amps[i] } else { 0.0 })
                    .collect()
            })
            .collect();
        let fixed = match &scenario.code_model {
            CodeModel::Random => None,
            CodeModel::Fixed(s) => {
                let r = cross_correlation(s);
                let f = r.cholesky()?;
                Some((r, f))
            }
            CodeModel::Orthogonal => {
                Some((CorrelationMatrix::identity(k), NoiseFactor::identity(k)))
            }
        };
        Ok(Self {
            scenario,
            assignments,
            detector,
            k,
            sources,
            source_mask,
            relay_amps,
            fixed,
            ws: Workspace::new(k),
            y: vec![0.0; k],
            noise: vec![0.0; k],
            syms: vec![0; k],
            active: vec![false; k],
            dec: vec![0; k],
            stage1: vec![0; k],
        })
    }

    /// Number of source bits per frame.
    pub fn bits_per_frame(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Outcome buffer sized for this simulator.
    pub fn new_outcome(&self) -> FrameOutcome {
        let k = self.k;
        let n = self.assignments.len();
        FrameOutcome {
            sent: vec![0; k],
            decisions: vec![0; k],
            correct: vec![true; k],
            stage1_correct: vec![true; k],
            relay_decoded: vec![vec![None; k]; n],
            relay_transmitted: vec![false; n],
            relayed_bit_correct: vec![None; n],
            stage2_fresh_correct: vec![None; k],
        }
    }

    /// Simulates one frame into `out`.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut FrameOutcome) -> Result<()> {
        match self.fixed.take() {
            Some((r, f)) => {
                let res = self.frame(&r, &f, rng, out);
                self.fixed = Some((r, f));
                res
            }
            None => {
                let s = random_signatures(self.k, self.scenario.spreading_gain, rng);
                let r = cross_correlation(&s);
                let f = r.cholesky()?;
                self.frame(&r, &f, rng, out)
            }
        }
    }

    fn frame<R: Rng + ?Sized>(
        &mut self,
        r: &CorrelationMatrix,
        f: &NoiseFactor,
        rng: &mut R,
        out: &mut FrameOutcome,
    ) -> Result<()> {
        let sc = self.scenario;
        let sigma = sc.sigma();
        let limit = sc.optimal_limit;
        let to_bs = sc.gains.to_bs();
        let k = self.k;

        // Stage 1: sources send, assigned relays forward the previous frame's
        // coded bit under the pipelined schedule.
        for i in 0..k {
            out.sent[i] = if self.source_mask[i] {
                random_symbol(rng)
            } else {
                0
            };
            self.syms[i] = out.sent[i];
            self.active[i] = self.source_mask[i];
        }
        if sc.schedule == Schedule::Pipelined {
            for a in self.assignments {
                self.syms[a.relay] = random_symbol(rng);
                self.active[a.relay] = true;
            }
        }
        observe(
            r,
            f,
            to_bs,
            &self.syms,
            sigma,
            rng,
            &mut self.y,
            &mut self.noise,
        );
        self.ws.detect(
            self.detector,
            &self.y,
            r,
            to_bs,
            &self.active,
            limit,
            &mut self.stage1,
        )?;
        for i in 0..k {
            let ok = !self.source_mask[i] || self.stage1[i] == out.sent[i];
            out.stage1_correct[i] = ok;
        }

        // Relays listen to the sources only.
        let mut any_tx = false;
        for (slot, a) in self.assignments.iter().enumerate() {
            for i in 0..k {
                self.syms[i] = out.sent[i];
            }
            let amps = &self.relay_amps[slot];
            observe(
                r,
                f,
                amps,
                &self.syms,
                sigma,
                rng,
                &mut self.y,
                &mut self.noise,
            );
            let decoded = &mut out.relay_decoded[slot];
            decoded.iter_mut().for_each(|d| *d = None);
            let mut ok = true;
            match a.protocol {
                Protocol::P1 => {
                    let m = a.coded_set[0];
                    let d = if self.y[m] >= 0.0 { 1 } else { -1 };
                    decoded[m] = Some(d == out.sent[m]);
                    ok = d == out.sent[m];
                }
                Protocol::P2 => {
                    self.ws.detect(
                        self.detector,
                        &self.y,
                        r,
                        amps,
                        &self.source_mask,
                        limit,
                        &mut self.dec,
                    )?;
                    for &m in &self.sources {
                        decoded[m] = Some(self.dec[m] == out.sent[m]);
                    }
                    for &m in &a.coded_set {
                        ok &= self.dec[m] == out.sent[m];
                    }
                }
            }
            // A relay the base station cannot hear has nothing to offer.
            out.relay_transmitted[slot] = ok && to_bs[a.relay] > 0.0;
            any_tx |= out.relay_transmitted[slot];
        }

        // Stage 2: fresh source bits plus the coded bits of relays that
        // decoded everything they needed. The base station knows which relays
        // are active.
        out.relayed_bit_correct.iter_mut().for_each(|v| *v = None);
        out.stage2_fresh_correct.iter_mut().for_each(|v| *v = None);
        if any_tx {
            for i in 0..k {
                self.syms[i] = if self.source_mask[i] {
                    random_symbol(rng)
                } else {
                    0
                };
                self.active[i] = self.source_mask[i];
            }
            for (slot, a) in self.assignments.iter().enumerate() {
                if out.relay_transmitted[slot] {
                    self.syms[a.relay] = a.coded_set.iter().map(|&m| out.sent[m]).product();
                    self.active[a.relay] = true;
                }
            }
            observe(
                r,
                f,
                to_bs,
                &self.syms,
                sigma,
                rng,
                &mut self.y,
                &mut self.noise,
            );
            self.ws.detect(
                self.detector,
                &self.y,
                r,
                to_bs,
                &self.active,
                limit,
                &mut self.dec,
            )?;
            for &m in &self.sources {
                out.stage2_fresh_correct[m] = Some(self.dec[m] == self.syms[m]);
            }
            for (slot, a) in self.assignments.iter().enumerate() {
                if out.relay_transmitted[slot] {
                    out.relayed_bit_correct[slot] = Some(self.dec[a.relay] == self.syms[a.relay]);
                }
            }
        }

        // Combining with genie error detection.
        for i in 0..k {
            if !self.source_mask[i] {
                out.decisions[i] = 0;
                out.correct[i] = true;
                continue;
            }
            if out.stage1_correct[i] {
                out.decisions[i] = self.stage1[i];
                out.correct[i] = true;
                continue;
            }
            let recovered = self.assignments.iter().enumerate().any(|(slot, a)| {
                a.codes(i)
                    && out.relayed_bit_correct[slot] == Some(true)
                    && a.coded_set.iter().all(|&n| n == i || out.stage1_correct[n])
            });
            out.decisions[i] = if recovered {
                out.sent[i]
            } else {
                self.stage1[i]
            };
            out.correct[i] = recovered;
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn observe<R: Rng + ?Sized>(
    r: &CorrelationMatrix,
    f: &NoiseFactor,
    amps: &[f64],
    syms: &[Symbol],
    sigma: f64,
    rng: &mut R,
    y: &mut [f64],
    noise: &mut [f64],
) {
    signal_into(r, amps, syms, y);
    f.sample_into(sigma, rng, noise);
    y.iter_mut().zip(noise.iter()).for_each(|(y, n)| *y += n);
}

#[inline]
fn random_symbol<R: Rng + ?Sized>(rng: &mut R) -> Symbol {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// One frame with a fresh simulator.
pub fn simulate_two_stage<R: Rng + ?Sized>(
    scenario: &Scenario,
    assignments: &[RelayAssignment],
    detector: DetectorKind,
    rng: &mut R,
) -> Result<FrameOutcome> {
    let mut sim = FrameSimulator::new(scenario, assignments, detector)?;
    let mut out = sim.new_outcome();
    sim.run(rng, &mut out)?;
    Ok(out)
}
