// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlist model.
//!
//! Gates are addressed by dense integer ids; names only matter at I/O
//! boundaries (`.bench` files, reports). A [`Netlist`] may be built in an
//! invalid state through [`Netlist::from_parts`]; [`validate`] reports every
//! broken invariant, while [`parse_bench`] only ever returns valid netlists.

mod bench;
mod validate;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{parse_bench, write_bench};
pub use validate::{validate, Violation};

pub type GateId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    Input,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
}

impl GateType {
    pub const ALL: [GateType; 10] = [
        GateType::Input,
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buf,
        GateType::Dff,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            GateType::Input => "INPUT",
            GateType::And => "AND",
            GateType::Nand => "NAND",
            GateType::Or => "OR",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Not => "NOT",
            GateType::Buf => "BUF",
            GateType::Dff => "DFF",
        }
    }

    /// Operator keyword as it may appear on the right-hand side of a gate
    /// definition. Case-insensitive; `BUFF` is accepted for `BUF`.
    pub fn from_operator(word: &str) -> Option<GateType> {
        let upper = word.to_ascii_uppercase();
        let t = match upper.as_str() {
            "AND" => GateType::And,
            "NAND" => GateType::Nand,
            "OR" => GateType::Or,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "NOT" => GateType::Not,
            "BUF" | "BUFF" => GateType::Buf,
            "DFF" => GateType::Dff,
            _ => return None,
        };
        Some(t)
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateType::Input => n == 0,
            GateType::Not | GateType::Buf | GateType::Dff => n == 1,
            _ => n >= 2,
        }
    }

    /// Types that have a two-input masked template.
    pub fn has_mask_template(self) -> bool {
        matches!(
            self,
            GateType::And
                | GateType::Nand
                | GateType::Or
                | GateType::Nor
                | GateType::Xor
                | GateType::Xnor
        )
    }

    /// Evaluates the gate bitwise over 64 parallel lanes.
    ///
    /// `Input` and `Dff` have no combinational function; callers supply their
    /// values directly.
    pub fn eval_words(self, fanin: impl IntoIterator<Item = u64>) -> u64 {
        let mut it = fanin.into_iter();
        match self {
            GateType::And => it.fold(!0, |acc, v| acc & v),
            GateType::Nand => !it.fold(!0, |acc, v| acc & v),
            GateType::Or => it.fold(0, |acc, v| acc | v),
            GateType::Nor => !it.fold(0, |acc, v| acc | v),
            GateType::Xor => it.fold(0, |acc, v| acc ^ v),
            GateType::Xnor => !it.fold(0, |acc, v| acc ^ v),
            GateType::Not => !it.next().unwrap_or(0),
            GateType::Buf => it.next().unwrap_or(0),
            GateType::Input | GateType::Dff => {
                panic!("{} has no combinational function", self.keyword())
            }
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub id: GateId,
    pub name: String,
    pub gtype: GateType,
    pub fanin: Vec<GateId>,
    pub is_output: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: undefined signal `{name}`")]
    UndefinedSignal { name: String, line: usize },
    #[error("line {line}: `{name}` is defined more than once")]
    DuplicateDefinition { name: String, line: usize },
    #[error("line {line}: gate `{name}` is {gtype} with {found} input(s)")]
    ArityMismatch {
        name: String,
        gtype: GateType,
        found: usize,
        line: usize,
    },
    #[error("combinational cycle through {}", names.join(", "))]
    CombinationalCycle { names: Vec<String> },
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("cycle detected while ordering gates")]
    Cycle,
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown gate id {0}")]
    UnknownGate(GateId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    gates: Vec<Gate>,
    inputs: Vec<GateId>,
    outputs: Vec<GateId>,
    by_name: HashMap<String, GateId>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Netlist {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Assembles a netlist from raw parts without checking any invariant.
    ///
    /// Gate `k` of `gates` receives id `k`; every `INPUT` gate is a primary
    /// input in id order. Use [`validate`] to inspect the result.
    pub fn from_parts(
        name: impl Into<String>,
        gates: Vec<(String, GateType, Vec<GateId>)>,
        outputs: Vec<GateId>,
    ) -> Self {
        let mut n = Netlist::new(name);
        for (id, (gname, gtype, fanin)) in gates.into_iter().enumerate() {
            n.by_name.entry(gname.clone()).or_insert(id);
            if gtype == GateType::Input {
                n.inputs.push(id);
            }
            n.gates.push(Gate {
                id,
                name: gname,
                gtype,
                fanin,
                is_output: false,
            });
        }
        for &o in &outputs {
            if let Some(g) = n.gates.get_mut(o) {
                g.is_output = true;
            }
        }
        n.outputs = outputs;
        n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.set_name(name);
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id]
    }

    pub fn inputs(&self) -> &[GateId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[GateId] {
        &self.outputs
    }

    pub fn find(&self, name: &str) -> Option<GateId> {
        self.by_name.get(name).copied()
    }

    /// DFF gate ids in ascending order; this is the state-vector layout used
    /// by the simulator.
    pub fn dffs(&self) -> Vec<GateId> {
        self.gates
            .iter()
            .filter(|g| g.gtype == GateType::Dff)
            .map(|g| g.id)
            .collect()
    }

    /// Number of non-`INPUT` gates.
    pub fn logic_gate_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.gtype != GateType::Input)
            .count()
    }

    pub fn add_input(&mut self, name: impl Into<String>) -> Result<GateId, NetlistError> {
        let id = self.push_gate(name.into(), GateType::Input, Vec::new())?;
        self.inputs.push(id);
        Ok(id)
    }

    /// Appends a gate. Fanin ids must already exist; arity is not checked
    /// here (see [`validate`]).
    pub fn add_gate(
        &mut self,
        name: impl Into<String>,
        gtype: GateType,
        fanin: Vec<GateId>,
    ) -> Result<GateId, NetlistError> {
        if let Some(&bad) = fanin.iter().find(|&&f| f >= self.gates.len()) {
            return Err(NetlistError::UnknownGate(bad));
        }
        self.push_gate(name.into(), gtype, fanin)
    }

    pub fn mark_output(&mut self, id: GateId) -> Result<(), NetlistError> {
        let g = self
            .gates
            .get_mut(id)
            .ok_or(NetlistError::UnknownGate(id))?;
        g.is_output = true;
        self.outputs.push(id);
        Ok(())
    }

    /// Room for `gates` more gates, `inputs` of them primary inputs.
    pub(crate) fn reserve(&mut self, gates: usize, inputs: usize) {
        self.gates.reserve(gates);
        self.by_name.reserve(gates);
        self.inputs.reserve(inputs);
    }

    pub(crate) fn rewire(&mut self, id: GateId, gtype: GateType, fanin: Vec<GateId>) {
        let g = &mut self.gates[id];
        g.gtype = gtype;
        g.fanin = fanin;
    }

    fn push_gate(
        &mut self,
        name: String,
        gtype: GateType,
        fanin: Vec<GateId>,
    ) -> Result<GateId, NetlistError> {
        if self.by_name.contains_key(&name) {
            return Err(NetlistError::DuplicateName(name));
        }
        let id = self.gates.len();
        self.by_name.insert(name.clone(), id);
        self.gates.push(Gate {
            id,
            name,
            gtype,
            fanin,
            is_output: false,
        });
        Ok(id)
    }

    /// Name-preserving structural equality: same gate names, types, ordered
    /// fanin names, and the same ordered input and output name lists.
    pub fn is_isomorphic(&self, other: &Netlist) -> bool {
        if self.len() != other.len()
            || self.input_names() != other.input_names()
            || self.output_names() != other.output_names()
        {
            return false;
        }
        self.gates.iter().all(|g| {
            let Some(oid) = other.find(&g.name) else {
                return false;
            };
            let og = other.gate(oid);
            og.gtype == g.gtype
                && og.fanin.len() == g.fanin.len()
                && g.fanin
                    .iter()
                    .zip(&og.fanin)
                    .all(|(&a, &b)| self.gates[a].name == other.gates[b].name)
        })
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .map(|&i| self.gates[i].name.as_str())
            .collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs
            .iter()
            .map(|&i| self.gates[i].name.as_str())
            .collect()
    }

    /// Per-gate fanout lists (transpose of fanin), each ascending.
    pub fn fanouts(&self) -> Vec<Vec<GateId>> {
        let mut out = vec![Vec::new(); self.gates.len()];
        for g in &self.gates {
            for &f in &g.fanin {
                if f < out.len() {
                    out[f].push(g.id);
                }
            }
        }
        for v in &mut out {
            v.sort_unstable();
        }
        out
    }
}

/// Orders gates so every combinational gate follows its fanins. DFF outputs
/// act as sources; ties break by ascending id.
pub fn topo_order(n: &Netlist) -> Result<Vec<GateId>, NetlistError> {
    let len = n.len();
    let mut indegree = vec![0usize; len];
    let mut succ: Vec<Vec<GateId>> = vec![Vec::new(); len];
    for g in n.gates() {
        if g.gtype == GateType::Dff {
            continue;
        }
        for &f in &g.fanin {
            if f >= len {
                return Err(NetlistError::UnknownGate(f));
            }
            indegree[g.id] += 1;
            succ[f].push(g.id);
        }
    }
    let mut ready: BinaryHeap<Reverse<GateId>> = (0..len)
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(len);
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        for &s in &succ[id] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() != len {
        return Err(NetlistError::Cycle);
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Netlist {
        let mut n = Netlist::new("chain");
        let a = n.add_input("a").unwrap();
        let n1 = n.add_gate("n1", GateType::Not, vec![a]).unwrap();
        let n2 = n.add_gate("n2", GateType::Not, vec![n1]).unwrap();
        n.mark_output(n2).unwrap();
        n
    }

    #[test]
    fn topo_order_of_a_chain() {
        assert_eq!(topo_order(&chain()).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn dff_breaks_feedback() {
        // q = DFF(d), d = NOT(q)
        let n = Netlist::from_parts(
            "loop",
            vec![
                ("q".into(), GateType::Dff, vec![1]),
                ("d".into(), GateType::Not, vec![0]),
            ],
            vec![1],
        );
        assert_eq!(topo_order(&n).unwrap(), vec![0, 1]);
    }

    #[test]
    fn combinational_loop_is_rejected() {
        let n = Netlist::from_parts(
            "loop",
            vec![
                ("a".into(), GateType::Not, vec![1]),
                ("b".into(), GateType::Not, vec![0]),
            ],
            vec![],
        );
        assert_eq!(topo_order(&n), Err(NetlistError::Cycle));
    }

    #[test]
    fn builder_rejects_duplicates_and_forward_refs() {
        let mut n = chain();
        assert!(matches!(
            n.add_input("a"),
            Err(NetlistError::DuplicateName(_))
        ));
        assert!(matches!(
            n.add_gate("x", GateType::Buf, vec![42]),
            Err(NetlistError::UnknownGate(42))
        ));
    }

    #[test]
    fn operator_keywords() {
        assert_eq!(GateType::from_operator("buff"), Some(GateType::Buf));
        assert_eq!(GateType::from_operator("Nand"), Some(GateType::Nand));
        assert_eq!(GateType::from_operator("INPUT"), None);
        assert!(GateType::And.arity_ok(3));
        assert!(!GateType::And.arity_ok(1));
        assert!(!GateType::Not.arity_ok(2));
    }

    #[test]
    fn word_evaluation() {
        let a = 0b1100u64;
        let b = 0b1010u64;
        assert_eq!(GateType::And.eval_words([a, b]) & 0xF, 0b1000);
        assert_eq!(GateType::Nand.eval_words([a, b]) & 0xF, 0b0111);
        assert_eq!(GateType::Or.eval_words([a, b]) & 0xF, 0b1110);
        assert_eq!(GateType::Nor.eval_words([a, b]) & 0xF, 0b0001);
        assert_eq!(GateType::Xor.eval_words([a, b]) & 0xF, 0b0110);
        assert_eq!(GateType::Xnor.eval_words([a, b]) & 0xF, 0b1001);
        assert_eq!(GateType::Not.eval_words([a]) & 0xF, 0b0011);
        assert_eq!(GateType::Buf.eval_words([a]) & 0xF, 0b1100);
    }
}
