// SPDX-License-Identifier: Apache-2.0

//! Cycle-based logic simulation and toggle-count power traces.
//!
//! The engine evaluates 64 independent stimuli at once, one per bit lane of a
//! `u64`. DFFs start at 0 and capture their fanin at the end of each cycle.

mod equiv;
pub mod rng;
mod traces;

use thiserror::Error;

use crate::netlist::{topo_order, validate, GateId, GateType, Netlist};

pub use equiv::{check_equivalence, EquivalenceReport};
pub use traces::{
    gen_traces, group_stats, read_trace_dump, write_trace_dump, Group, PowerModel, StimulusSpec,
    TraceGenerator, TraceSample,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no secret inputs selected; fixed and random groups would be identical")]
    NoSecretInputs,
    #[error("netlist is not valid: {0}")]
    InvalidNetlist(String),
    #[error("{what}: expected {expected} values, got {found}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is not a primary input")]
    NotAnInput(String),
    #[error("`{0}` has no counterpart in the candidate netlist")]
    MissingCounterpart(String),
    #[error("cycles per trace must be at least 2, got {0}")]
    TooFewCycles(u32),
    #[error("at least one trace is required")]
    NoTraces,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt trace dump: {0}")]
    CorruptDump(String),
}

/// A netlist compiled for word-parallel evaluation.
#[derive(Clone, Debug)]
pub struct Engine {
    gtype: Vec<GateType>,
    fanin_start: Vec<u32>,
    fanin: Vec<u32>,
    order: Vec<u32>,
    inputs: Vec<GateId>,
    dffs: Vec<GateId>,
}

impl Engine {
    pub fn new(n: &Netlist) -> Result<Self, SimError> {
        let violations = validate(n);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(SimError::InvalidNetlist(msg.join("; ")));
        }
        let topo = topo_order(n).map_err(|e| SimError::InvalidNetlist(e.to_string()))?;
        let mut fanin_start = Vec::with_capacity(n.len() + 1);
        let mut fanin = Vec::new();
        for g in n.gates() {
            fanin_start.push(fanin.len() as u32);
            fanin.extend(g.fanin.iter().map(|&f| f as u32));
        }
        fanin_start.push(fanin.len() as u32);
        Ok(Engine {
            gtype: n.gates().iter().map(|g| g.gtype).collect(),
            fanin_start,
            fanin,
            order: topo
                .into_iter()
                .filter(|&id| !matches!(n.gate(id).gtype, GateType::Input | GateType::Dff))
                .map(|id| id as u32)
                .collect(),
            inputs: n.inputs().to_vec(),
            dffs: n.dffs(),
        })
    }

    pub fn gate_count(&self) -> usize {
        self.gtype.len()
    }

    pub fn inputs(&self) -> &[GateId] {
        &self.inputs
    }

    pub fn dffs(&self) -> &[GateId] {
        &self.dffs
    }

    fn fanin_of(&self, id: usize) -> &[u32] {
        &self.fanin[self.fanin_start[id] as usize..self.fanin_start[id + 1] as usize]
    }

    /// Evaluates all gates. `inputs` follows the primary-input order and
    /// `state` the ascending DFF order.
    pub fn eval(&self, inputs: &[u64], state: &[u64], values: &mut [u64]) {
        debug_assert_eq!(inputs.len(), self.inputs.len());
        debug_assert_eq!(state.len(), self.dffs.len());
        for (&id, &w) in self.inputs.iter().zip(inputs) {
            values[id] = w;
        }
        for (&id, &w) in self.dffs.iter().zip(state) {
            values[id] = w;
        }
        for &id in &self.order {
            let id = id as usize;
            let fi = self.fanin_of(id);
            values[id] = self.gtype[id].eval_words(fi.iter().map(|&f| values[f as usize]));
        }
    }

    /// Values each DFF captures at the end of the cycle.
    pub fn next_state(&self, values: &[u64], out: &mut [u64]) {
        for (slot, &id) in out.iter_mut().zip(&self.dffs) {
            *slot = values[self.fanin_of(id)[0] as usize];
        }
    }
}

/// Evaluates one cycle on scalar bits: returns every gate value (by id) and
/// the next DFF state.
pub fn evaluate(
    n: &Netlist,
    pi_values: &[bool],
    state: &[bool],
) -> Result<(Vec<bool>, Vec<bool>), SimError> {
    let engine = Engine::new(n)?;
    if pi_values.len() != engine.inputs.len() {
        return Err(SimError::WidthMismatch {
            what: "primary inputs",
            expected: engine.inputs.len(),
            found: pi_values.len(),
        });
    }
    if state.len() != engine.dffs.len() {
        return Err(SimError::WidthMismatch {
            what: "DFF state",
            expected: engine.dffs.len(),
            found: state.len(),
        });
    }
    let to_word = |b: &bool| if *b { 1u64 } else { 0 };
    let inputs: Vec<u64> = pi_values.iter().map(to_word).collect();
    let st: Vec<u64> = state.iter().map(to_word).collect();
    let mut values = vec![0u64; n.len()];
    engine.eval(&inputs, &st, &mut values);
    let mut next = vec![0u64; st.len()];
    engine.next_state(&values, &mut next);
    Ok((
        values.iter().map(|w| w & 1 == 1).collect(),
        next.iter().map(|w| w & 1 == 1).collect(),
    ))
}
