// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{Purpose, StreamKey};
use super::{Engine, SimError};
use crate::netlist::{GateId, GateType, Netlist};
use crate::tvla::MomentAccumulator;

const DUMP_MAGIC: &[u8; 4] = b"PTRC";
const DUMP_VERSION: u32 = 1;

/// TVLA population a trace belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Group {
    Fixed,
    Random,
}

impl Group {
    fn index(self) -> u8 {
        match self {
            Group::Fixed => 0,
            Group::Random => 1,
        }
    }
}

/// How the secret inputs are driven for one group.
///
/// Non-secret inputs get fresh random bits every cycle. Secret inputs hold
/// `fixed_value` in the fixed group, and a per-trace random value (constant
/// across the trace's cycles) in the random group.
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusSpec {
    /// Gate ids of the secret primary inputs.
    pub secret_inputs: Vec<GateId>,
    pub fixed_value: Vec<bool>,
    pub group: Group,
    pub cycles_per_trace: u32,
    pub seed: u64,
}

impl StimulusSpec {
    /// Two cycles per trace and an all-ones fixed value.
    pub fn new(secret_inputs: Vec<GateId>, group: Group, seed: u64) -> Self {
        let fixed_value = vec![true; secret_inputs.len()];
        StimulusSpec {
            secret_inputs,
            fixed_value,
            group,
            cycles_per_trace: 2,
            seed,
        }
    }
}

/// Toggle-count power model: each output transition of a gate costs a fixed
/// amount depending on its type, plus Gaussian measurement noise per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub costs: BTreeMap<GateType, f64>,
    pub noise_sigma: f64,
}

impl PowerModel {
    pub fn default_costs() -> BTreeMap<GateType, f64> {
        use GateType::*;
        BTreeMap::from([
            (Input, 0.0),
            (Not, 0.67),
            (Buf, 0.67),
            (Nand, 1.0),
            (Nor, 1.0),
            (And, 1.33),
            (Or, 1.33),
            (Xor, 2.0),
            (Xnor, 2.0),
            (Dff, 4.0),
        ])
    }

    pub fn noiseless() -> Self {
        PowerModel {
            costs: Self::default_costs(),
            noise_sigma: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn cost(&self, t: GateType) -> f64 {
        self.costs.get(&t).copied().unwrap_or(0.0)
    }

    /// Mean cost over the non-`INPUT` gate types.
    pub fn mean_cost(&self) -> f64 {
        let logic: Vec<f64> = GateType::ALL
            .iter()
            .filter(|&&t| t != GateType::Input)
            .map(|&t| self.cost(t))
            .collect();
        logic.iter().sum::<f64>() / logic.len() as f64
    }
}

impl Default for PowerModel {
    /// Default costs with noise at 5% of the mean gate cost.
    fn default() -> Self {
        let m = PowerModel::noiseless();
        let sigma = 0.05 * m.mean_cost();
        m.with_noise(sigma)
    }
}

/// One power trace: a sample per gate, indexed by gate id.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample {
    pub trace: u64,
    pub values: Vec<f64>,
}

/// Generates traces for one group. Trace `t` depends only on the netlist,
/// the stimulus spec, the power model and `t`, so blocks can be produced in
/// any order or in parallel.
#[derive(Clone, Debug)]
pub struct TraceGenerator {
    engine: Engine,
    cost: Vec<f64>,
    sigma: f64,
    key: StreamKey,
    group: u8,
    cycles: u32,
    secret_pos: Vec<usize>,
    fixed: Vec<bool>,
}

impl TraceGenerator {
    pub fn new(n: &Netlist, spec: &StimulusSpec, power: &PowerModel) -> Result<Self, SimError> {
        if spec.secret_inputs.is_empty() {
            return Err(SimError::NoSecretInputs);
        }
        if spec.fixed_value.len() != spec.secret_inputs.len() {
            return Err(SimError::WidthMismatch {
                what: "fixed value",
                expected: spec.secret_inputs.len(),
                found: spec.fixed_value.len(),
            });
        }
        if spec.cycles_per_trace < 2 {
            return Err(SimError::TooFewCycles(spec.cycles_per_trace));
        }
        let engine = Engine::new(n)?;
        let mut secret_pos = Vec::with_capacity(spec.secret_inputs.len());
        for &s in &spec.secret_inputs {
            let pos = engine
                .inputs()
                .iter()
                .position(|&i| i == s)
                .ok_or_else(|| {
                    let name = if s < n.len() {
                        n.gate(s).name.clone()
                    } else {
                        format!("#{s}")
                    };
                    SimError::NotAnInput(name)
                })?;
            secret_pos.push(pos);
        }
        Ok(TraceGenerator {
            cost: n.gates().iter().map(|g| power.cost(g.gtype)).collect(),
            sigma: power.noise_sigma,
            key: StreamKey::new(spec.seed),
            group: spec.group.index(),
            cycles: spec.cycles_per_trace,
            secret_pos,
            fixed: spec.fixed_value.clone(),
            engine,
        })
    }

    pub fn gate_count(&self) -> usize {
        self.engine.gate_count()
    }

    /// Writes `count` (at most 64) traces starting at trace `first` into
    /// `out`, row-major with one row of `gate_count()` samples per trace.
    pub fn fill_block(&self, first: u64, count: usize, out: &mut [f64]) {
        assert!(count <= 64);
        let n = self.gate_count();
        assert!(out.len() >= count * n);
        let n_in = self.engine.inputs().len();
        let live = if count == 64 { !0 } else { (1u64 << count) - 1 };

        let mut secret_words = vec![0u64; self.secret_pos.len()];
        if self.group == Group::Fixed.index() {
            for (w, &b) in secret_words.iter_mut().zip(&self.fixed) {
                *w = if b { !0 } else { 0 };
            }
        } else {
            for lane in 0..count {
                let mut rng = self
                    .key
                    .stream(Purpose::Secret, self.group, first + lane as u64, 0);
                spread_bits(&mut rng, &mut secret_words, lane);
            }
        }

        let mut state = vec![0u64; self.engine.dffs().len()];
        let mut next = state.clone();
        let mut prev = vec![0u64; n];
        let mut cur = vec![0u64; n];
        let mut counts = vec![0u32; n * 64];
        let mut in_words = vec![0u64; n_in];
        for c in 0..self.cycles {
            in_words.iter_mut().for_each(|w| *w = 0);
            for lane in 0..count {
                let mut rng = self
                    .key
                    .stream(Purpose::Inputs, self.group, first + lane as u64, c);
                spread_bits(&mut rng, &mut in_words, lane);
            }
            for (&p, &w) in self.secret_pos.iter().zip(&secret_words) {
                in_words[p] = w;
            }
            self.engine.eval(&in_words, &state, &mut cur);
            self.engine.next_state(&cur, &mut next);
            std::mem::swap(&mut state, &mut next);
            if c > 0 {
                for g in 0..n {
                    let mut d = (prev[g] ^ cur[g]) & live;
                    while d != 0 {
                        counts[g * 64 + d.trailing_zeros() as usize] += 1;
                        d &= d - 1;
                    }
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }

        for lane in 0..count {
            let row = &mut out[lane * n..(lane + 1) * n];
            let mut rng = self
                .key
                .stream(Purpose::Noise, self.group, first + lane as u64, 0);
            for (g, slot) in row.iter_mut().enumerate() {
                let mut v = counts[g * 64 + lane] as f64 * self.cost[g];
                if self.sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v += self.sigma * z;
                }
                *slot = v;
            }
        }
    }

    /// Folds traces `[first, first + count)` into per-gate accumulators.
    pub fn accumulate(&self, first: u64, count: u64, accs: &mut [MomentAccumulator]) {
        let n = self.gate_count();
        let mut buf = vec![0.0; 64 * n];
        let mut t = first;
        let end = first + count;
        while t < end {
            let k = (end - t).min(64) as usize;
            self.fill_block(t, k, &mut buf);
            for row in buf[..k * n].chunks_exact(n) {
                for (acc, &y) in accs.iter_mut().zip(row) {
                    acc.update(y);
                }
            }
            t += k as u64;
        }
    }
}

/// Sets bit `lane` of `words[i]` from successive random bits.
fn spread_bits(rng: &mut impl RngCore, words: &mut [u64], lane: usize) {
    for chunk in words.chunks_mut(64) {
        let r = rng.next_u64();
        for (b, w) in chunk.iter_mut().enumerate() {
            *w |= (r >> b & 1) << lane;
        }
    }
}

/// Lazily generates `n_traces` traces for one group.
pub fn gen_traces(
    n: &Netlist,
    spec: &StimulusSpec,
    power: &PowerModel,
    n_traces: u64,
) -> Result<impl Iterator<Item = TraceSample>, SimError> {
    if n_traces == 0 {
        return Err(SimError::NoTraces);
    }
    let gen = TraceGenerator::new(n, spec, power)?;
    let width = gen.gate_count();
    let mut buf = vec![0.0; 64 * width];
    let mut block_start = 0u64;
    let mut block_len = 0u64;
    Ok((0..n_traces).map(move |t| {
        if t >= block_start + block_len {
            block_start = t;
            block_len = (n_traces - t).min(64);
            gen.fill_block(t, block_len as usize, &mut buf);
        }
        let row = (t - block_start) as usize;
        TraceSample {
            trace: t,
            values: buf[row * width..(row + 1) * width].to_vec(),
        }
    }))
}

/// Per-gate streaming moments over a sequence of traces.
pub fn group_stats(
    traces: impl IntoIterator<Item = TraceSample>,
    n_gates: usize,
) -> Vec<MomentAccumulator> {
    let mut accs = vec![MomentAccumulator::new(); n_gates];
    for s in traces {
        for (acc, &y) in accs.iter_mut().zip(&s.values) {
            acc.update(y);
        }
    }
    accs
}

/// Binary trace dump: `PTRC`, version, gate count and trace count as
/// little-endian `u32`, then row-major little-endian `f64` samples.
pub fn write_trace_dump(
    w: &mut impl Write,
    n_gates: usize,
    traces: &[TraceSample],
) -> Result<(), SimError> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(n_gates as u32).to_le_bytes())?;
    w.write_all(&(traces.len() as u32).to_le_bytes())?;
    for t in traces {
        if t.values.len() != n_gates {
            return Err(SimError::WidthMismatch {
                what: "trace row",
                expected: n_gates,
                found: t.values.len(),
            });
        }
        for v in &t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_trace_dump(r: &mut impl Read) -> Result<(usize, Vec<Vec<f64>>), SimError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)
        .map_err(|_| SimError::CorruptDump("truncated header".into()))?;
    if &head[..4] != DUMP_MAGIC {
        return Err(SimError::CorruptDump("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    if word(4) != DUMP_VERSION {
        return Err(SimError::CorruptDump(format!(
            "unsupported version {}",
            word(4)
        )));
    }
    let (n_gates, n_traces) = (word(8) as usize, word(12) as usize);
    let mut rows = Vec::with_capacity(n_traces);
    let mut cell = [0u8; 8];
    for _ in 0..n_traces {
        let mut row = Vec::with_capacity(n_gates);
        for _ in 0..n_gates {
            r.read_exact(&mut cell)
                .map_err(|_| SimError::CorruptDump("truncated samples".into()))?;
            row.push(f64::from_le_bytes(cell));
        }
        rows.push(row);
    }
    Ok((n_gates, rows))
}
