// SPDX-License-Identifier: Apache-2.0

//! Gate-local first-order masking.
//!
//! A masked gate keeps its id and name but becomes the unmask node of its
//! composite; the shares, the masked core and three fresh mask inputs are
//! appended as new gates. Everything downstream sees the plain value again.

mod template;

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateId, GateType, Netlist, NetlistError};
use crate::sim::rng::{Purpose, StreamKey};
use crate::sim::{Engine, PowerModel, SimError};
use crate::tvla::{GateLeakage, TvlaReport};

pub use template::{trichina_and, trichina_or, BlueprintNode, MaskedGateTemplate, Operand};

/// Random vectors used for the switching-power overhead estimate.
pub const POWER_VECTORS: u64 = 1000;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("gate `{name}` ({gtype}, {arity} inputs) has no masked form")]
    UnmaskableType {
        name: String,
        gtype: GateType,
        arity: usize,
    },
    #[error("gate `{0}` is already masked")]
    AlreadyMasked(String),
    #[error("gate id {0} is not part of the original design")]
    UnknownGate(GateId),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Whether gate `id` can be replaced by a masked composite.
pub fn is_maskable(n: &Netlist, id: GateId) -> bool {
    let g = n.gate(id);
    g.gtype.has_mask_template() && g.fanin.len() == 2
}

pub fn maskable_gates(n: &Netlist) -> Vec<GateId> {
    (0..n.len()).filter(|&i| is_maskable(n, i)).collect()
}

/// A netlist with some gates masked, plus the bookkeeping that maps new
/// gates back to the original gate they were created for.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedNetlist {
    pub netlist: Netlist,
    original_len: usize,
    /// For each gate id at or beyond `original_len`, the original gate it
    /// belongs to.
    origin: Vec<GateId>,
    masked: Vec<GateId>,
}

impl MaskedNetlist {
    pub fn from_original(n: &Netlist) -> Self {
        MaskedNetlist {
            netlist: n.clone(),
            original_len: n.len(),
            origin: Vec::new(),
            masked: Vec::new(),
        }
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Masked original gates, ascending.
    pub fn masked(&self) -> &[GateId] {
        &self.masked
    }

    pub fn is_masked(&self, id: GateId) -> bool {
        self.masked.binary_search(&id).is_ok()
    }

    /// Original gate a gate belongs to: itself for original gates.
    pub fn origin_of(&self, id: GateId) -> GateId {
        if id < self.original_len {
            id
        } else {
            self.origin[id - self.original_len]
        }
    }

    /// Ids of the gates added for original gate `id`, ascending.
    pub fn added_for(&self, id: GateId) -> impl Iterator<Item = GateId> + '_ {
        self.origin
            .iter()
            .enumerate()
            .filter(move |(_, &o)| o == id)
            .map(move |(k, _)| self.original_len + k)
    }

    pub fn mask_inputs(&self) -> Vec<GateId> {
        (self.original_len..self.netlist.len())
            .filter(|&i| self.netlist.gate(i).gtype == GateType::Input)
            .collect()
    }

    /// Replaces original gate `i` by its masked composite.
    pub fn mask_gate(&mut self, i: GateId) -> Result<(), MaskError> {
        if i >= self.original_len {
            return Err(MaskError::UnknownGate(i));
        }
        let g = self.netlist.gate(i).clone();
        if self.is_masked(i) {
            return Err(MaskError::AlreadyMasked(g.name));
        }
        let tpl = (g.fanin.len() == 2)
            .then(|| MaskedGateTemplate::for_type(g.gtype))
            .flatten()
            .ok_or_else(|| MaskError::UnmaskableType {
                name: g.name.clone(),
                gtype: g.gtype,
                arity: g.fanin.len(),
            })?;

        let mut mask = [0; 3];
        for (slot, tag) in mask.iter_mut().zip(["x", "y", "z"]) {
            let name = self.fresh_name(&format!("_m{tag}{i}"));
            *slot = self.netlist.add_input(name)?;
            self.origin.push(i);
        }
        let mut ids: Vec<GateId> = Vec::with_capacity(tpl.nodes.len());
        for bn in &tpl.nodes {
            let fanin = bn
                .fanin
                .iter()
                .map(|o| match *o {
                    Operand::A => g.fanin[0],
                    Operand::B => g.fanin[1],
                    Operand::X => mask[0],
                    Operand::Y => mask[1],
                    Operand::Z => mask[2],
                    Operand::Node(k) => ids[k],
                })
                .collect();
            let name = self.fresh_name(&format!("_m{i}_{}", bn.role));
            ids.push(self.netlist.add_gate(name, bn.gtype, fanin)?);
            self.origin.push(i);
        }
        self.netlist
            .rewire(i, tpl.unmask, vec![*ids.last().unwrap(), mask[2]]);
        let pos = self.masked.binary_search(&i).unwrap_err();
        self.masked.insert(pos, i);
        Ok(())
    }

    fn fresh_name(&self, base: &str) -> String {
        if self.netlist.find(base).is_none() {
            return base.to_string();
        }
        (1..)
            .map(|k| format!("{base}_{k}"))
            .find(|s| self.netlist.find(s).is_none())
            .unwrap()
    }

    /// Origin map as JSON: added gate name to origin gate name.
    pub fn origin_map_json(&self) -> String {
        let map: BTreeMap<&str, &str> = (self.original_len..self.netlist.len())
            .map(|id| {
                (
                    self.netlist.gate(id).name.as_str(),
                    self.netlist.gate(self.origin_of(id)).name.as_str(),
                )
            })
            .collect();
        let doc = OriginMap {
            design: self.netlist.name(),
            masked: self
                .masked
                .iter()
                .map(|&i| self.netlist.gate(i).name.as_str())
                .collect(),
            origin: map,
        };
        serde_json::to_string_pretty(&doc).expect("origin map serializes")
    }

    /// Leakage score of each original gate: for masked gates the largest |t|
    /// among the composite's internal nodes, otherwise the gate's own t.
    ///
    /// The unmask node (the original id) is left out of a composite's score:
    /// it carries the plain value and, under a toggle-count model, toggles
    /// exactly like the unmasked gate did, so including it would report no
    /// change whatever the masking did. Mask inputs are left out too.
    pub fn project_report(&self, masked_report: &TvlaReport) -> TvlaReport {
        let gates = masked_report.gates[..self.original_len]
            .iter()
            .map(|g| {
                if !self.is_masked(g.id) {
                    return g.clone();
                }
                let worst = self
                    .added_for(g.id)
                    .map(|k| &masked_report.gates[k])
                    .filter(|k| k.gtype != GateType::Input)
                    .max_by(|p, q| p.abs_t().total_cmp(&q.abs_t()))
                    .expect("composite has internal nodes");
                GateLeakage {
                    id: g.id,
                    name: g.name.clone(),
                    gtype: g.gtype,
                    t: worst.t,
                    v: worst.v,
                    leaky: false,
                }
            })
            .collect();
        TvlaReport::from_gates(
            masked_report.design.clone(),
            masked_report.n_traces,
            masked_report.threshold,
            gates,
        )
    }
}

#[derive(Serialize)]
struct OriginMap<'a> {
    design: &'a str,
    masked: Vec<&'a str>,
    origin: BTreeMap<&'a str, &'a str>,
}

/// Masks `ids` (any order, no duplicates) by folding [`MaskedNetlist::mask_gate`]
/// in ascending id order.
pub fn modify(n: &Netlist, ids: &[GateId]) -> Result<MaskedNetlist, MaskError> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    let mut m = MaskedNetlist::from_original(n);
    // 3 mask inputs and at most 10 internal nodes per gate
    m.netlist.reserve(13 * sorted.len(), 3 * sorted.len());
    m.origin.reserve(13 * sorted.len());
    for &i in &sorted {
        m.mask_gate(i)?;
    }
    Ok(m)
}

/// Single-gate convenience wrapper around [`modify`].
pub fn mask_gate(n: &Netlist, i: GateId) -> Result<MaskedNetlist, MaskError> {
    modify(n, &[i])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTotals {
    pub area: f64,
    pub power: f64,
    pub delay: f64,
}

/// Cost of a masked design relative to its original. Units are the power
/// model's relative cost table; multipliers are "x Original".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub original: CostTotals,
    pub masked: CostTotals,
    pub area_x: f64,
    pub power_x: f64,
    pub delay_x: f64,
}

pub fn cost_totals(n: &Netlist, pm: &PowerModel) -> Result<CostTotals, MaskError> {
    let cost: Vec<f64> = n.gates().iter().map(|g| pm.cost(g.gtype)).collect();
    let area = cost.iter().sum();

    let order = crate::netlist::topo_order(n)?;
    let mut arrival = vec![0.0f64; n.len()];
    for &id in &order {
        let g = n.gate(id);
        let from = if g.gtype == GateType::Dff {
            0.0
        } else {
            g.fanin.iter().map(|&f| arrival[f]).fold(0.0, f64::max)
        };
        arrival[id] = from + cost[id];
    }
    // A DFF also terminates the path feeding it.
    let mut delay = arrival.iter().copied().fold(0.0, f64::max);
    for d in n.dffs() {
        delay = delay.max(arrival[n.gate(d).fanin[0]]);
    }

    Ok(CostTotals {
        area,
        power: switching_power(n, &cost)?,
        delay,
    })
}

/// Mean toggle energy per transition between two consecutive random input
/// vectors, over [`POWER_VECTORS`] transitions.
fn switching_power(n: &Netlist, cost: &[f64]) -> Result<f64, MaskError> {
    let engine = Engine::new(n)?;
    let key = StreamKey::new(0);
    let n_in = engine.inputs().len();
    let mut energy = 0.0;
    let mut done = 0u64;
    let mut block = 0u64;
    let mut prev = vec![0u64; n.len()];
    let mut cur = vec![0u64; n.len()];
    while done < POWER_VECTORS {
        let lanes = (POWER_VECTORS - done).min(64);
        let live = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let mut state = vec![0u64; engine.dffs().len()];
        let mut next = state.clone();
        for c in 0..2u32 {
            // Input position k reads word k of the cycle's stream, so inputs
            // appended by masking leave the original stimulus unchanged.
            let mut rng = key.stream(Purpose::Aux, 0, block, c);
            let mut words = vec![0u64; n_in];
            for w in words.iter_mut() {
                *w = rng.next_u64();
            }
            engine.eval(&words, &state, &mut cur);
            engine.next_state(&cur, &mut next);
            std::mem::swap(&mut state, &mut next);
            if c == 1 {
                for (g, &cst) in cost.iter().enumerate() {
                    energy += ((prev[g] ^ cur[g]) & live).count_ones() as f64 * cst;
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        done += lanes;
        block += 1;
    }
    Ok(energy / POWER_VECTORS as f64)
}

pub fn overhead_estimate(
    original: &Netlist,
    masked: &Netlist,
    pm: &PowerModel,
) -> Result<OverheadReport, MaskError> {
    let o = cost_totals(original, pm)?;
    let m = cost_totals(masked, pm)?;
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    Ok(OverheadReport {
        area_x: ratio(m.area, o.area),
        power_x: ratio(m.power, o.power),
        delay_x: ratio(m.delay, o.delay),
        original: o,
        masked: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, validate, write_bench};
    use crate::sim::check_equivalence;

    fn and2() -> Netlist {
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(f)\nf = AND(a, b)").unwrap()
    }

    #[test]
    fn single_and_growth() {
        let n = and2();
        let m = mask_gate(&n, 2).unwrap();
        assert_eq!(m.netlist.len(), n.len() + 3 + 10);
        assert_eq!(m.netlist.inputs().len(), 5);
        assert_eq!(m.netlist.gate(2).name, "f");
        assert_eq!(m.netlist.gate(2).gtype, GateType::Xor);
        assert!(validate(&m.netlist).is_empty());
        assert_eq!(m.mask_inputs().len(), 3);
        assert_eq!(m.added_for(2).count(), 13);
    }

    #[test]
    fn two_gates_growth_and_equivalence() {
        let n =
            parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(g)\nf = NAND(a, b)\ng = NOR(f, c)")
                .unwrap();
        let m = modify(&n, &[4, 3]).unwrap();
        assert_eq!(m.netlist.len(), n.len() + 26);
        assert_eq!(m.netlist.inputs().len(), 9);
        let r = check_equivalence(&n, &m.netlist, 12, 10_000, 0).unwrap();
        assert!(r.exhaustive && r.vectors == 512);
        assert!(r.equivalent());
    }

    #[test]
    fn every_type_is_equivalent_exhaustively() {
        for t in ["AND", "NAND", "OR", "NOR", "XOR", "XNOR"] {
            let n = parse_bench(&format!("INPUT(a)\nINPUT(b)\nOUTPUT(f)\nf = {t}(a, b)")).unwrap();
            let m = mask_gate(&n, 2).unwrap();
            let r = check_equivalence(&n, &m.netlist, 12, 0, 0).unwrap();
            assert!(r.exhaustive);
            assert_eq!(r.vectors, 32);
            assert!(r.equivalent(), "{t}");
        }
    }

    #[test]
    fn errors() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nf = NOT(a)\ng = AND(a, b, c)").unwrap();
        assert!(matches!(
            mask_gate(&n, 3),
            Err(MaskError::UnmaskableType { .. })
        ));
        assert!(matches!(
            mask_gate(&n, 4),
            Err(MaskError::UnmaskableType { .. })
        ));
        assert!(matches!(mask_gate(&n, 9), Err(MaskError::UnknownGate(9))));
        let mut m = MaskedNetlist::from_original(&and2());
        m.mask_gate(2).unwrap();
        assert!(matches!(m.mask_gate(2), Err(MaskError::AlreadyMasked(_))));
    }

    #[test]
    fn empty_selection_is_identity() {
        let n = and2();
        assert_eq!(modify(&n, &[]).unwrap().netlist, n);
    }

    #[test]
    fn deterministic_and_collision_free() {
        let n = parse_bench("INPUT(a)\nINPUT(_mx2)\nOUTPUT(f)\nf = AND(a, _mx2)").unwrap();
        let a = mask_gate(&n, 2).unwrap();
        let b = mask_gate(&n, 2).unwrap();
        assert_eq!(write_bench(&a.netlist), write_bench(&b.netlist));
        assert!(a.netlist.find("_mx2_1").is_some());
        assert!(validate(&a.netlist).is_empty());
    }

    #[test]
    fn origin_map_covers_added_gates() {
        let m = mask_gate(&and2(), 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.origin_map_json()).unwrap();
        let map = v["origin"].as_object().unwrap();
        assert_eq!(map.len(), 13);
        assert!(map.values().all(|o| o == "f"));
    }

    #[test]
    fn overhead_of_identity_and_single_and() {
        let n = and2();
        let pm = PowerModel::default();
        let same = overhead_estimate(&n, &n, &pm).unwrap();
        assert_eq!((same.area_x, same.power_x, same.delay_x), (1.0, 1.0, 1.0));
        let m = mask_gate(&n, 2).unwrap();
        let o = overhead_estimate(&n, &m.netlist, &pm).unwrap();
        // 4 ANDs plus 7 XORs replace one AND.
        let expected = (4.0 * 1.33 + 7.0 * 2.0) / 1.33;
        assert!((o.area_x - expected).abs() < 1e-12);
        assert!(o.power_x > 1.0 && o.delay_x > 1.0);
    }
}
