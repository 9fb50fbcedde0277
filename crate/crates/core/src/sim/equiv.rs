// SPDX-License-Identifier: Apache-2.0

//! Simulation-based equivalence check between a reference netlist and a
//! transformed candidate that keeps the reference's signal names.

use rand::RngCore;

use super::rng::{Purpose, StreamKey};
use super::{Engine, SimError};
use crate::netlist::{GateId, Netlist};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub vectors: u64,
    pub mismatches: u64,
    pub exhaustive: bool,
    /// Name of the first signal that disagreed, if any.
    pub first_mismatch: Option<String>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.mismatches == 0
    }
}

/// Drives both netlists with the same values on shared inputs and shared DFF
/// state, random values on inputs and DFFs only the candidate has, and
/// compares every reference output and next-state bit by name.
///
/// With at most `exhaustive_limit` free bits every assignment is tried,
/// otherwise `random_vectors` random ones.
pub fn check_equivalence(
    reference: &Netlist,
    candidate: &Netlist,
    exhaustive_limit: u32,
    random_vectors: u64,
    seed: u64,
) -> Result<EquivalenceReport, SimError> {
    let re = Engine::new(reference)?;
    let ce = Engine::new(candidate)?;
    let lookup = |name: &str| -> Result<GateId, SimError> {
        candidate
            .find(name)
            .ok_or_else(|| SimError::MissingCounterpart(name.to_string()))
    };

    // Free variables: reference inputs, reference DFFs, then candidate-only
    // inputs and DFFs. Each maps to a slot on both sides (or only candidate).
    let mut c_input_var = vec![usize::MAX; ce.inputs().len()];
    let mut c_dff_var = vec![usize::MAX; ce.dffs().len()];
    let mut nvars = 0usize;
    let mut r_input_var = Vec::new();
    for &id in re.inputs() {
        let cid = lookup(&reference.gate(id).name)?;
        let pos = ce
            .inputs()
            .iter()
            .position(|&x| x == cid)
            .ok_or_else(|| SimError::NotAnInput(reference.gate(id).name.clone()))?;
        c_input_var[pos] = nvars;
        r_input_var.push(nvars);
        nvars += 1;
    }
    let mut r_dff_var = Vec::new();
    for &id in re.dffs() {
        let cid = lookup(&reference.gate(id).name)?;
        let pos = ce
            .dffs()
            .iter()
            .position(|&x| x == cid)
            .ok_or_else(|| SimError::MissingCounterpart(reference.gate(id).name.clone()))?;
        c_dff_var[pos] = nvars;
        r_dff_var.push(nvars);
        nvars += 1;
    }
    for v in c_input_var.iter_mut().chain(c_dff_var.iter_mut()) {
        if *v == usize::MAX {
            *v = nvars;
            nvars += 1;
        }
    }

    // Signals to compare: (reference gate, candidate gate), outputs then the
    // data input of each reference DFF.
    let mut compare: Vec<(GateId, GateId)> = Vec::new();
    for &o in reference.outputs() {
        compare.push((o, lookup(&reference.gate(o).name)?));
    }
    for &d in re.dffs() {
        let rd = reference.gate(d).fanin[0];
        let cd = candidate.gate(lookup(&reference.gate(d).name)?).fanin[0];
        compare.push((rd, cd));
    }

    let exhaustive = nvars as u32 <= exhaustive_limit;
    let total: u64 = if exhaustive {
        1u64 << nvars
    } else {
        random_vectors
    };
    let key = StreamKey::new(seed);
    let mut vars = vec![0u64; nvars];
    let mut r_vals = vec![0u64; reference.len()];
    let mut c_vals = vec![0u64; candidate.len()];
    let mut report = EquivalenceReport {
        vectors: total,
        mismatches: 0,
        exhaustive,
        first_mismatch: None,
    };
    let blocks = total.div_ceil(64);
    for block in 0..blocks {
        let lanes = (total - block * 64).min(64);
        let live = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        if exhaustive {
            for (k, w) in vars.iter_mut().enumerate() {
                *w = 0;
                for lane in 0..lanes {
                    let a = block * 64 + lane;
                    *w |= (a >> k & 1) << lane;
                }
            }
        } else {
            let mut rng = key.stream(Purpose::Aux, 0, block, 0);
            for w in vars.iter_mut() {
                *w = rng.next_u64();
            }
        }
        let pick = |map: &[usize]| -> Vec<u64> { map.iter().map(|&v| vars[v]).collect() };
        re.eval(&pick(&r_input_var), &pick(&r_dff_var), &mut r_vals);
        ce.eval(&pick(&c_input_var), &pick(&c_dff_var), &mut c_vals);
        let mut bad = 0u64;
        for &(r, c) in &compare {
            let diff = (r_vals[r] ^ c_vals[c]) & live;
            if diff != 0 && report.first_mismatch.is_none() {
                report.first_mismatch = Some(reference.gate(r).name.clone());
            }
            bad |= diff;
        }
        report.mismatches += bad.count_ones() as u64;
    }
    Ok(report)
}
