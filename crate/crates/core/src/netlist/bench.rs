// SPDX-License-Identifier: Apache-2.0

//! ISCAS-style `.bench` reader and writer.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use super::{GateType, Netlist, NetlistError};

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Ident(&'a str),
    LParen,
    RParen,
    Comma,
    Equals,
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token<'_>>, NetlistError> {
    let bytes = line.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            b')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            b',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            b'=' => {
                tokens.push(Token::Equals);
                i += 1;
            }
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token::Ident(&line[start..i]));
            }
            _ => {
                return Err(NetlistError::Syntax {
                    line: lineno,
                    message: format!(
                        "unexpected character `{}`",
                        line[i..].chars().next().unwrap()
                    ),
                })
            }
        }
    }
    Ok(tokens)
}

enum Decl<'a> {
    Input(&'a str),
    Output(&'a str),
    Gate {
        name: &'a str,
        gtype: GateType,
        fanin: Vec<&'a str>,
    },
}

fn parse_line<'a>(tokens: &[Token<'a>], lineno: usize) -> Result<Decl<'a>, NetlistError> {
    let syntax = |message: &str| NetlistError::Syntax {
        line: lineno,
        message: message.to_string(),
    };
    match tokens {
        [Token::Ident(kw), Token::LParen, Token::Ident(id), Token::RParen] => {
            if kw.eq_ignore_ascii_case("INPUT") {
                Ok(Decl::Input(id))
            } else if kw.eq_ignore_ascii_case("OUTPUT") {
                Ok(Decl::Output(id))
            } else {
                Err(syntax(&format!("expected INPUT or OUTPUT, found `{kw}`")))
            }
        }
        [Token::Ident(name), Token::Equals, Token::Ident(op), Token::LParen, rest @ ..] => {
            let gtype = GateType::from_operator(op)
                .ok_or_else(|| syntax(&format!("unknown gate operator `{op}`")))?;
            let Some((Token::RParen, args)) = rest.split_last() else {
                return Err(syntax("missing closing parenthesis"));
            };
            let mut fanin = Vec::new();
            for (k, tok) in args.iter().enumerate() {
                match (k % 2, tok) {
                    (0, Token::Ident(id)) => fanin.push(*id),
                    (1, Token::Comma) => {}
                    _ => return Err(syntax("malformed argument list")),
                }
            }
            if fanin.is_empty() || args.len() % 2 == 0 {
                return Err(syntax("malformed argument list"));
            }
            Ok(Decl::Gate { name, gtype, fanin })
        }
        _ => Err(syntax("unrecognised statement")),
    }
}

/// Parses `.bench` text into a validated [`Netlist`].
///
/// Ids are assigned in topological order (DFFs count as sources), ties broken
/// by declaration order, so the result is independent of how the file orders
/// forward references.
pub fn parse_bench(text: &str) -> Result<Netlist, NetlistError> {
    // (name, type, fanin names, line)
    let mut defs: Vec<(&str, GateType, Vec<&str>, usize)> = Vec::new();
    let mut outputs: Vec<(&str, usize)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens = tokenize(line, lineno)?;
        if tokens.is_empty() {
            continue;
        }
        let (name, gtype, fanin) = match parse_line(&tokens, lineno)? {
            Decl::Output(id) => {
                outputs.push((id, lineno));
                continue;
            }
            Decl::Input(id) => (id, GateType::Input, Vec::new()),
            Decl::Gate { name, gtype, fanin } => (name, gtype, fanin),
        };
        if index.insert(name, defs.len()).is_some() {
            return Err(NetlistError::DuplicateDefinition {
                name: name.to_string(),
                line: lineno,
            });
        }
        defs.push((name, gtype, fanin, lineno));
    }

    let mut fanin_idx: Vec<Vec<usize>> = Vec::with_capacity(defs.len());
    for (name, gtype, fanin, line) in &defs {
        let mut resolved = Vec::with_capacity(fanin.len());
        for f in fanin {
            let &d = index.get(f).ok_or_else(|| NetlistError::UndefinedSignal {
                name: f.to_string(),
                line: *line,
            })?;
            resolved.push(d);
        }
        if !gtype.arity_ok(resolved.len()) {
            return Err(NetlistError::ArityMismatch {
                name: name.to_string(),
                gtype: *gtype,
                found: resolved.len(),
                line: *line,
            });
        }
        fanin_idx.push(resolved);
    }
    let mut seen_outputs = HashMap::new();
    for &(o, line) in &outputs {
        if !index.contains_key(o) {
            return Err(NetlistError::UndefinedSignal {
                name: o.to_string(),
                line,
            });
        }
        if seen_outputs.insert(o, line).is_some() {
            return Err(NetlistError::DuplicateDefinition {
                name: o.to_string(),
                line,
            });
        }
    }

    // Kahn over declaration indices.
    let n = defs.len();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (d, (_, gtype, _, _)) in defs.iter().enumerate() {
        if *gtype == GateType::Dff {
            continue;
        }
        for &f in &fanin_idx[d] {
            indegree[d] += 1;
            succ[f].push(d);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&d| indegree[d] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(d)) = ready.pop() {
        order.push(d);
        for &s in &succ[d] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() != n {
        let mut names: Vec<String> = (0..n)
            .filter(|&d| indegree[d] > 0)
            .map(|d| defs[d].0.to_string())
            .collect();
        names.sort();
        return Err(NetlistError::CombinationalCycle { names });
    }

    let mut id_of = vec![0usize; n];
    for (id, &d) in order.iter().enumerate() {
        id_of[d] = id;
    }
    let mut netlist = Netlist::new("design");
    // Inputs keep declaration order in the input list, regardless of id.
    let mut input_decls = Vec::new();
    for &d in &order {
        let (name, gtype, _, _) = &defs[d];
        let fanin = fanin_idx[d].iter().map(|&f| id_of[f]).collect();
        let id = netlist.push_gate(name.to_string(), *gtype, fanin)?;
        debug_assert_eq!(id, id_of[d]);
        if *gtype == GateType::Input {
            input_decls.push(d);
        }
    }
    input_decls.sort_unstable();
    netlist.inputs = input_decls.into_iter().map(|d| id_of[d]).collect();
    for (o, _) in outputs {
        netlist.mark_output(id_of[index[o]])?;
    }
    Ok(netlist)
}

/// Serialises a netlist as `.bench` text with gates in ascending id order.
pub fn write_bench(n: &Netlist) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", n.name());
    let _ = writeln!(
        s,
        "# {} inputs, {} outputs, {} gates",
        n.inputs().len(),
        n.outputs().len(),
        n.logic_gate_count()
    );
    for &i in n.inputs() {
        let _ = writeln!(s, "INPUT({})", n.gate(i).name);
    }
    for &o in n.outputs() {
        let _ = writeln!(s, "OUTPUT({})", n.gate(o).name);
    }
    for g in n.gates() {
        if g.gtype == GateType::Input {
            continue;
        }
        let args: Vec<&str> = g.fanin.iter().map(|&f| n.gate(f).name.as_str()).collect();
        let _ = writeln!(s, "{} = {}({})", g.name, g.gtype.keyword(), args.join(", "));
    }
    s
}
