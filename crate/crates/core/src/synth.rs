// SPDX-License-Identifier: Apache-2.0

//! Generators for the bundled example designs.
//!
//! Every generator returns a netlist normalized through the bench writer and
//! parser, so an in-memory design and its `.bench` file have the same ids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netlist::{parse_bench, write_bench, GateId, GateType, Netlist};

struct Builder {
    n: Netlist,
    next: usize,
}

impl Builder {
    fn new(name: &str) -> Self {
        Builder {
            n: Netlist::new(name),
            next: 0,
        }
    }

    fn input(&mut self, name: impl Into<String>) -> GateId {
        self.n.add_input(name).expect("fresh input name")
    }

    fn gate(&mut self, t: GateType, fanin: &[GateId]) -> GateId {
        let name = format!("g{}", self.next);
        self.next += 1;
        self.n
            .add_gate(name, t, fanin.to_vec())
            .expect("fanin exists")
    }

    fn g2(&mut self, t: GateType, a: GateId, b: GateId) -> GateId {
        self.gate(t, &[a, b])
    }

    fn not(&mut self, a: GateId) -> GateId {
        self.gate(GateType::Not, &[a])
    }

    fn output(&mut self, id: GateId) {
        self.n.mark_output(id).expect("gate exists");
    }

    fn half_adder(&mut self, a: GateId, b: GateId) -> (GateId, GateId) {
        (self.g2(GateType::Xor, a, b), self.g2(GateType::And, a, b))
    }

    fn full_adder(&mut self, a: GateId, b: GateId, c: GateId) -> (GateId, GateId) {
        let s1 = self.g2(GateType::Xor, a, b);
        let sum = self.g2(GateType::Xor, s1, c);
        let c1 = self.g2(GateType::And, a, b);
        let c2 = self.g2(GateType::And, s1, c);
        (sum, self.g2(GateType::Or, c1, c2))
    }

    fn finish(self) -> Netlist {
        normalize(&self.n)
    }
}

/// Round-trips through the bench format so ids follow the parser's order.
pub fn normalize(n: &Netlist) -> Netlist {
    parse_bench(&write_bench(n))
        .expect("generated netlist is well formed")
        .with_name(n.name())
}

/// `bits`-wide ripple-carry adder with carry in.
pub fn ripple_adder(name: &str, bits: usize) -> Netlist {
    let mut b = Builder::new(name);
    let xs: Vec<_> = (0..bits).map(|i| b.input(format!("a{i}"))).collect();
    let ys: Vec<_> = (0..bits).map(|i| b.input(format!("b{i}"))).collect();
    let mut carry = b.input("cin");
    for i in 0..bits {
        let (s, c) = b.full_adder(xs[i], ys[i], carry);
        b.output(s);
        carry = c;
    }
    b.output(carry);
    b.finish()
}

/// `bits` x `bits` shift-and-add array multiplier.
pub fn array_multiplier(name: &str, bits: usize) -> Netlist {
    let mut b = Builder::new(name);
    let xs: Vec<_> = (0..bits).map(|i| b.input(format!("a{i}"))).collect();
    let ys: Vec<_> = (0..bits).map(|i| b.input(format!("b{i}"))).collect();
    let mut acc: Vec<Option<GateId>> = vec![None; 2 * bits];
    for (i, &y) in ys.iter().enumerate() {
        let mut carry: Option<GateId> = None;
        for (j, &x) in xs.iter().enumerate() {
            let pp = b.g2(GateType::And, x, y);
            let k = i + j;
            let (s, c) = match (acc[k], carry) {
                (None, None) => (pp, None),
                (Some(a), None) | (None, Some(a)) => {
                    let (s, c) = b.half_adder(a, pp);
                    (s, Some(c))
                }
                (Some(a), Some(c)) => {
                    let (s, c) = b.full_adder(a, pp, c);
                    (s, Some(c))
                }
            };
            acc[k] = Some(s);
            carry = c;
        }
        let mut k = i + bits;
        while let Some(c) = carry {
            match acc[k] {
                None => {
                    acc[k] = Some(c);
                    carry = None;
                }
                Some(a) => {
                    let (s, c2) = b.half_adder(a, c);
                    acc[k] = Some(s);
                    carry = Some(c2);
                    k += 1;
                }
            }
        }
    }
    for bit in acc.into_iter().flatten() {
        b.output(bit);
    }
    b.finish()
}

/// Small keyed mixing network. Inputs are `width` key bits followed by
/// `3 * width` data bits, so the key is exactly the first quarter of the
/// inputs.
pub fn toy_cipher(name: &str, width: usize, rounds: usize) -> Netlist {
    use GateType::*;
    let mut b = Builder::new(name);
    let key: Vec<_> = (0..width).map(|i| b.input(format!("k{i}"))).collect();
    let data: Vec<_> = (0..3 * width).map(|i| b.input(format!("d{i}"))).collect();
    let mut s: Vec<GateId> = data[..width].to_vec();
    let tweak = &data[width..];
    for r in 0..rounds {
        // Key mixing alternates linear and nonlinear gates.
        let keyed: Vec<_> = (0..width)
            .map(|i| {
                let t = [Xor, And, Or][(i + r) % 3];
                b.g2(t, s[i], key[(i + r) % width])
            })
            .collect();
        let mut next = Vec::with_capacity(width);
        for i in 0..width {
            let a = keyed[i];
            let c = keyed[(i + 1) % width];
            let t = tweak[(i + 2 * r) % tweak.len()];
            let nl = match (i + r) % 4 {
                0 => b.g2(And, a, t),
                1 => b.g2(Or, a, c),
                2 => b.g2(Nand, a, t),
                _ => b.g2(Nor, c, t),
            };
            let mixed = b.g2(Xor, nl, keyed[(i + 3) % width]);
            next.push(mixed);
        }
        s = next;
    }
    for &o in &s {
        b.output(o);
    }
    b.finish()
}

/// Magnitude comparator: outputs `a > b` and `a == b`.
pub fn comparator(name: &str, bits: usize) -> Netlist {
    use GateType::*;
    let mut b = Builder::new(name);
    let xs: Vec<_> = (0..bits).map(|i| b.input(format!("a{i}"))).collect();
    let ys: Vec<_> = (0..bits).map(|i| b.input(format!("b{i}"))).collect();
    // Scan from the least significant bit: gt' = (a & !b) | (eq & gt).
    let mut gt: Option<GateId> = None;
    let mut eq: Option<GateId> = None;
    for i in 0..bits {
        let e = b.g2(Xnor, xs[i], ys[i]);
        let nb = b.not(ys[i]);
        let win = b.g2(And, xs[i], nb);
        gt = Some(match gt {
            None => win,
            Some(g) => {
                let keep = b.g2(And, e, g);
                b.g2(Or, win, keep)
            }
        });
        eq = Some(match eq {
            None => e,
            Some(q) => b.g2(And, q, e),
        });
    }
    b.output(gt.unwrap());
    b.output(eq.unwrap());
    b.finish()
}

/// `bits`-to-`2^bits` decoder with an enable input.
pub fn decoder(name: &str, bits: usize) -> Netlist {
    use GateType::*;
    let mut b = Builder::new(name);
    let xs: Vec<_> = (0..bits).map(|i| b.input(format!("s{i}"))).collect();
    let en = b.input("en");
    let inv: Vec<_> = xs.iter().map(|&x| b.not(x)).collect();
    for code in 0..1usize << bits {
        let mut term = en;
        for i in 0..bits {
            let lit = if code >> i & 1 == 1 { xs[i] } else { inv[i] };
            term = b.g2(And, term, lit);
        }
        b.output(term);
    }
    b.finish()
}

/// Random combinational logic of mostly two-input gates. Fanins favour
/// recent signals so the result has some depth; every gate without fanout
/// becomes an output.
pub fn random_logic(name: &str, n_inputs: usize, n_gates: usize, seed: u64) -> Netlist {
    use GateType::*;
    const TYPES: [GateType; 6] = [And, Nand, Or, Nor, Xor, Xnor];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new(name);
    let mut signals: Vec<GateId> = (0..n_inputs).map(|i| b.input(format!("x{i}"))).collect();
    let mut used = vec![false; n_inputs + n_gates];
    let pick = |rng: &mut ChaCha8Rng, signals: &[GateId]| -> GateId {
        let window = signals.len().min(3 * n_inputs);
        signals[signals.len() - 1 - rng.random_range(0..window)]
    };
    for _ in 0..n_gates {
        let id = if rng.random_bool(0.06) {
            let a = pick(&mut rng, &signals);
            used[a] = true;
            b.not(a)
        } else {
            let t = TYPES[rng.random_range(0..TYPES.len())];
            let a = pick(&mut rng, &signals);
            let mut c = pick(&mut rng, &signals);
            while c == a {
                c = pick(&mut rng, &signals);
            }
            used[a] = true;
            used[c] = true;
            b.g2(t, a, c)
        };
        signals.push(id);
    }
    for (id, _) in used.iter().enumerate().skip(n_inputs).filter(|(_, u)| !**u) {
        b.output(id);
    }
    b.finish()
}

/// Accumulator register: `acc <= acc + (d & k)` with the sum exposed.
/// Inputs are `bits` key bits then `3 * bits` data bits (only the first
/// `bits` of which feed the adder; the rest drive a parity tree).
pub fn accumulator(name: &str, bits: usize) -> Netlist {
    use GateType::*;
    let mut b = Builder::new(name);
    let key: Vec<_> = (0..bits).map(|i| b.input(format!("k{i}"))).collect();
    let data: Vec<_> = (0..3 * bits).map(|i| b.input(format!("d{i}"))).collect();
    // DFFs are created with a placeholder fanin and rewired once the next
    // state logic exists.
    let regs: Vec<_> = (0..bits).map(|_| b.gate(Dff, &[key[0]])).collect();
    let mut carry: Option<GateId> = None;
    let mut next = Vec::with_capacity(bits);
    for i in 0..bits {
        let v = b.g2(And, data[i], key[i]);
        let (s, c) = match carry {
            None => b.half_adder(regs[i], v),
            Some(c) => b.full_adder(regs[i], v, c),
        };
        next.push(s);
        carry = Some(c);
    }
    for (&r, &s) in regs.iter().zip(&next) {
        b.n.rewire(r, Dff, vec![s]);
        b.output(r);
    }
    let mut parity = data[bits];
    for &d in &data[bits + 1..] {
        parity = b.g2(Xor, parity, d);
    }
    let tagged = b.g2(And, parity, regs[0]);
    b.output(tagged);
    b.finish()
}

/// Disjoint union of `copies` renamed copies of `n` (names prefixed
/// `c<k>_`). Input order interleaves copy by copy.
pub fn replicate(n: &Netlist, copies: usize) -> Netlist {
    let mut out = Netlist::new(format!("{}x{copies}", n.name()));
    for k in 0..copies {
        let mut map = vec![0; n.len()];
        for &i in n.inputs() {
            map[i] = out.add_input(format!("c{k}_{}", n.gate(i).name)).unwrap();
        }
        let order = crate::netlist::topo_order(n).expect("acyclic");
        // DFFs may be read before their fanin is created: add them first
        // with a placeholder and rewire afterwards.
        let placeholder = map[n.inputs()[0]];
        for &d in &n.dffs() {
            map[d] = out
                .add_gate(
                    format!("c{k}_{}", n.gate(d).name),
                    GateType::Dff,
                    vec![placeholder],
                )
                .unwrap();
        }
        for &id in &order {
            let g = n.gate(id);
            if matches!(g.gtype, GateType::Input | GateType::Dff) {
                continue;
            }
            let fanin = g.fanin.iter().map(|&f| map[f]).collect();
            map[id] = out
                .add_gate(format!("c{k}_{}", g.name), g.gtype, fanin)
                .unwrap();
        }
        for &d in &n.dffs() {
            out.rewire(map[d], GateType::Dff, vec![map[n.gate(d).fanin[0]]]);
        }
        for &o in n.outputs() {
            out.mark_output(map[o]).unwrap();
        }
    }
    normalize(&out)
}

/// Designs bundled under `corpus/`, by file stem.
pub fn bundled() -> Vec<Netlist> {
    vec![
        ripple_adder("rca8", 8),
        ripple_adder("rca16", 16),
        array_multiplier("mul4", 4),
        array_multiplier("mul8", 8),
        array_multiplier("mul16", 16),
        toy_cipher("cipher8", 8, 3),
        toy_cipher("cipher16", 16, 4),
        comparator("cmp8", 8),
        decoder("dec4", 4),
        random_logic("rand200", 32, 200, 11),
        random_logic("rand400", 48, 400, 23),
        accumulator("acc8", 8),
    ]
}
