// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt;

use super::{topo_order, GateId, GateType, Netlist};

/// A broken netlist invariant, naming the offending gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ArityMismatch { gate: GateId },
    DanglingFanin { gate: GateId, fanin: GateId },
    DuplicateName { gate: GateId },
    IdMismatch { gate: GateId },
    CombinationalCycle { gates: Vec<GateId> },
    UndefinedOutput { gate: GateId },
    InputListMismatch { gate: GateId },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::ArityMismatch { .. } => "ARITY_MISMATCH",
            Violation::DanglingFanin { .. } => "UNDEFINED_SIGNAL",
            Violation::DuplicateName { .. } => "DUPLICATE_DEFINITION",
            Violation::IdMismatch { .. } => "ID_MISMATCH",
            Violation::CombinationalCycle { .. } => "COMBINATIONAL_CYCLE",
            Violation::UndefinedOutput { .. } => "UNDEFINED_OUTPUT",
            Violation::InputListMismatch { .. } => "INPUT_LIST_MISMATCH",
        }
    }

    /// The gate the violation is reported against (lowest id for cycles).
    pub fn gate(&self) -> GateId {
        match self {
            Violation::ArityMismatch { gate }
            | Violation::DanglingFanin { gate, .. }
            | Violation::DuplicateName { gate }
            | Violation::IdMismatch { gate }
            | Violation::UndefinedOutput { gate }
            | Violation::InputListMismatch { gate } => *gate,
            Violation::CombinationalCycle { gates } => gates.first().copied().unwrap_or(0),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CombinationalCycle { gates } => write!(f, "{} {:?}", self.rule(), gates),
            Violation::DanglingFanin { gate, fanin } => {
                write!(f, "{}({gate}) references missing gate {fanin}", self.rule())
            }
            _ => write!(f, "{}({})", self.rule(), self.gate()),
        }
    }
}

/// Checks every structural invariant; an empty list means the netlist is
/// safe for simulation and transformation.
pub fn validate(n: &Netlist) -> Vec<Violation> {
    let mut out = Vec::new();
    let len = n.len();
    let mut names: HashMap<&str, GateId> = HashMap::new();
    let mut dangling = false;
    for (pos, g) in n.gates().iter().enumerate() {
        if g.id != pos {
            out.push(Violation::IdMismatch { gate: pos });
        }
        if names.insert(g.name.as_str(), pos).is_some() {
            out.push(Violation::DuplicateName { gate: pos });
        }
        if !g.gtype.arity_ok(g.fanin.len()) {
            out.push(Violation::ArityMismatch { gate: pos });
        }
        for &f in &g.fanin {
            if f >= len {
                dangling = true;
                out.push(Violation::DanglingFanin {
                    gate: pos,
                    fanin: f,
                });
            }
        }
    }
    for &o in n.outputs() {
        if o >= len {
            out.push(Violation::UndefinedOutput { gate: o });
        }
    }
    let declared: Vec<GateId> = n
        .gates()
        .iter()
        .filter(|g| g.gtype == GateType::Input)
        .map(|g| g.id)
        .collect();
    let mut listed = n.inputs().to_vec();
    listed.sort_unstable();
    if listed != declared {
        let gate = listed
            .iter()
            .chain(&declared)
            .copied()
            .find(|i| listed.binary_search(i).is_err() || declared.binary_search(i).is_err())
            .unwrap_or(0);
        out.push(Violation::InputListMismatch { gate });
    }
    if !dangling && topo_order(n).is_err() {
        out.push(Violation::CombinationalCycle {
            gates: cyclic_gates(n),
        });
    }
    out
}

/// Gates left unordered by Kahn's algorithm: members of a combinational cycle
/// or downstream of one.
fn cyclic_gates(n: &Netlist) -> Vec<GateId> {
    let len = n.len();
    let mut indegree = vec![0usize; len];
    let mut succ = vec![Vec::new(); len];
    for g in n.gates() {
        if g.gtype == GateType::Dff {
            continue;
        }
        for &f in &g.fanin {
            indegree[g.id] += 1;
            succ[f].push(g.id);
        }
    }
    let mut stack: Vec<GateId> = (0..len).filter(|&i| indegree[i] == 0).collect();
    while let Some(id) = stack.pop() {
        for &s in &succ[id] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                stack.push(s);
            }
        }
    }
    (0..len).filter(|&i| indegree[i] > 0).collect()
}
