// SPDX-License-Identifier: Apache-2.0

//! Masked gate blueprints.
//!
//! Each blueprint takes the plain operands `a`, `b` and three fresh mask bits
//! `x`, `y`, `z`. The operands are re-shared as `a ^ x` and `b ^ y`, the
//! composite computes the gate function masked by `z`, and a final unmask
//! node (XOR or XNOR with `z`) restores the plain value.

use crate::netlist::GateType;

/// A blueprint operand: a primary operand, a mask bit, or an earlier node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operand {
    A,
    B,
    X,
    Y,
    Z,
    Node(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlueprintNode {
    pub gtype: GateType,
    pub fanin: [Operand; 2],
    pub role: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedGateTemplate {
    pub target: GateType,
    /// Internal nodes in evaluation order; the last is the masked result.
    pub nodes: Vec<BlueprintNode>,
    /// Type of the node combining the masked result with `z`.
    pub unmask: GateType,
}

fn node(gtype: GateType, a: Operand, b: Operand, role: &'static str) -> BlueprintNode {
    BlueprintNode {
        gtype,
        fanin: [a, b],
        role,
    }
}

/// Masked AND core on the shares in nodes 0 and 1, evaluated in the
/// parenthesised order `((ah & bh) ^ ((x & bh) ^ ((x & y) ^ z))) ^ (y & ah)`.
fn and_core(nodes: &mut Vec<BlueprintNode>) {
    use GateType::*;
    use Operand::*;
    let (ah, bh) = (Node(0), Node(1));
    nodes.extend([
        node(And, ah, bh, "p_ab"),           // 2
        node(And, X, bh, "p_xb"),            // 3
        node(And, X, Y, "p_xy"),             // 4
        node(And, Y, ah, "p_ya"),            // 5
        node(Xor, Node(4), Z, "s_xyz"),      // 6
        node(Xor, Node(3), Node(6), "s_b"),  // 7
        node(Xor, Node(2), Node(7), "s_ab"), // 8
        node(Xor, Node(8), Node(5), "m"),    // 9
    ]);
}

impl MaskedGateTemplate {
    /// Blueprint for a two-input gate type, or `None` when the type has no
    /// masked form.
    pub fn for_type(target: GateType) -> Option<Self> {
        use GateType::*;
        use Operand::*;
        let mut nodes = Vec::new();
        let unmask = match target {
            And | Nand => {
                nodes.push(node(Xor, A, X, "ah"));
                nodes.push(node(Xor, B, Y, "bh"));
                and_core(&mut nodes);
                if target == And {
                    Xor
                } else {
                    Xnor
                }
            }
            // a | b = !(!a & !b); XNOR with the mask shares !a and !b.
            Or | Nor => {
                nodes.push(node(Xnor, A, X, "ah"));
                nodes.push(node(Xnor, B, Y, "bh"));
                and_core(&mut nodes);
                if target == Or {
                    Xnor
                } else {
                    Xor
                }
            }
            Xor | Xnor => {
                nodes.extend([
                    node(Xor, A, X, "ah"),
                    node(Xor, B, Y, "bh"),
                    node(Xor, Node(0), Node(1), "s_ab"),
                    node(Xor, X, Y, "s_xy"),
                    node(Xor, Node(3), Z, "s_xyz"),
                    node(Xor, Node(2), Node(4), "m"),
                ]);
                if target == Xor {
                    Xor
                } else {
                    Xnor
                }
            }
            _ => return None,
        };
        Some(MaskedGateTemplate {
            target,
            nodes,
            unmask,
        })
    }

    /// Values of every internal node followed by the unmasked output.
    pub fn eval(&self, a: bool, b: bool, x: bool, y: bool, z: bool) -> Vec<bool> {
        let mut vals: Vec<bool> = Vec::with_capacity(self.nodes.len() + 1);
        let get = |vals: &[bool], o: Operand| match o {
            Operand::A => a,
            Operand::B => b,
            Operand::X => x,
            Operand::Y => y,
            Operand::Z => z,
            Operand::Node(k) => vals[k],
        };
        for n in &self.nodes {
            let (p, q) = (get(&vals, n.fanin[0]), get(&vals, n.fanin[1]));
            vals.push(eval2(n.gtype, p, q));
        }
        let m = *vals.last().unwrap();
        vals.push(eval2(self.unmask, m, z));
        vals
    }
}

fn eval2(t: GateType, p: bool, q: bool) -> bool {
    let w = |b: bool| if b { !0u64 } else { 0 };
    t.eval_words([w(p), w(q)]) & 1 == 1
}

/// Masked AND: the returned value XOR `z` equals `a & b`.
pub fn trichina_and(a: bool, b: bool, x: bool, y: bool, z: bool) -> bool {
    let (ah, bh) = (a ^ x, b ^ y);
    ((ah & bh) ^ ((x & bh) ^ ((x & y) ^ z))) ^ (y & ah)
}

/// Masked OR by De Morgan over [`trichina_and`]: the returned value XOR `z`
/// equals `a | b`.
pub fn trichina_or(a: bool, b: bool, x: bool, y: bool, z: bool) -> bool {
    !trichina_and(!a, !b, x, y, z)
}
