// SPDX-License-Identifier: Apache-2.0

//! Circuit graph and BFS-locality structural features.
//!
//! A feature vector for gate `i` describes the `L` gates closest to `i` in
//! breadth-first order over the undirected circuit graph. Position `G0` is `i`
//! itself. The vector is the concatenation of
//!
//! * a one-hot type block: `L` groups of `T` bits, group `p` holding the type
//!   of the gate at position `p` (`NONE` when the neighbourhood is shorter
//!   than `L`), and
//! * an `L x L` adjacency block, bit `(p, q)` set iff the gate at position
//!   `p` drives the gate at position `q`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::netlist::{GateId, GateType, Netlist};

pub const NONE_TYPE: &str = "NONE";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("feature index {index} out of range (feature length {len})")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Clone, Debug)]
pub struct CircuitGraph {
    gtype: Vec<GateType>,
    fanin: Vec<Vec<GateId>>,
    fanout: Vec<Vec<GateId>>,
}

/// Builds the directed circuit graph: an edge `u -> v` per fanin entry.
pub fn graphify(n: &Netlist) -> CircuitGraph {
    CircuitGraph {
        gtype: n.gates().iter().map(|g| g.gtype).collect(),
        fanin: n.gates().iter().map(|g| g.fanin.clone()).collect(),
        fanout: n.fanouts(),
    }
}

impl CircuitGraph {
    pub fn len(&self) -> usize {
        self.gtype.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gtype.is_empty()
    }

    pub fn gtype(&self, id: GateId) -> GateType {
        self.gtype[id]
    }

    pub fn fanin(&self, id: GateId) -> &[GateId] {
        &self.fanin[id]
    }

    pub fn fanout(&self, id: GateId) -> &[GateId] {
        &self.fanout[id]
    }

    pub fn edge_count(&self) -> usize {
        self.fanin.iter().map(Vec::len).sum()
    }

    pub fn drives(&self, from: GateId, to: GateId) -> bool {
        self.fanin[to].contains(&from)
    }
}

/// Layout of structural feature vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(rename = "L")]
    pub locality: usize,
    pub type_vocab: Vec<String>,
}

impl FeatureSchema {
    /// Standard vocabulary: `NONE` padding followed by every gate type.
    pub fn new(locality: usize) -> Self {
        assert!(locality >= 1, "locality must be positive");
        let mut type_vocab = vec![NONE_TYPE.to_string()];
        type_vocab.extend(GateType::ALL.iter().map(|t| t.keyword().to_string()));
        FeatureSchema {
            locality,
            type_vocab,
        }
    }

    pub fn type_count(&self) -> usize {
        self.type_vocab.len()
    }

    pub fn feature_len(&self) -> usize {
        self.locality * self.type_count() + self.locality * self.locality
    }

    fn type_slot(&self, t: Option<GateType>) -> usize {
        let key = t.map_or(NONE_TYPE, GateType::keyword);
        self.type_vocab
            .iter()
            .position(|v| v == key)
            .expect("gate type missing from vocabulary")
    }

    pub fn type_index(&self, position: usize, t: Option<GateType>) -> usize {
        position * self.type_count() + self.type_slot(t)
    }

    pub fn adjacency_index(&self, from: usize, to: usize) -> usize {
        self.locality * self.type_count() + from * self.locality + to
    }

    pub fn decode(&self, index: usize) -> Result<FeatureMeaning, GraphError> {
        let len = self.feature_len();
        if index >= len {
            return Err(GraphError::IndexOutOfRange { index, len });
        }
        let onehot = self.locality * self.type_count();
        Ok(if index < onehot {
            FeatureMeaning::Type {
                position: index / self.type_count(),
                type_name: self.type_vocab[index % self.type_count()].clone(),
            }
        } else {
            let k = index - onehot;
            FeatureMeaning::Drives {
                from: k / self.locality,
                to: k % self.locality,
            }
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serialises");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureMeaning {
    Type { position: usize, type_name: String },
    Drives { from: usize, to: usize },
}

/// Human-readable condition for one feature index: `G<p> = <TYPE>` or
/// `G<p> drives G<q>`.
pub fn feature_semantics(schema: &FeatureSchema, index: usize) -> Result<String, GraphError> {
    Ok(match schema.decode(index)? {
        FeatureMeaning::Type {
            position,
            type_name,
        } => format!("G{position} = {type_name}"),
        FeatureMeaning::Drives { from, to } => format!("G{from} drives G{to}"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    pub gate: GateId,
    pub values: Vec<u8>,
    pub neighborhood: Vec<GateId>,
}

/// Breadth-first neighbourhood of `root` over the undirected view, truncated
/// to `locality` gates.
///
/// Each BFS level lists the unvisited fanin neighbours of the previous level
/// (ascending id) before the unvisited fanout neighbours (ascending id).
pub fn bfs_locality(g: &CircuitGraph, root: GateId, locality: usize) -> Vec<GateId> {
    assert!(root < g.len() && locality >= 1);
    // Sized by the neighbourhood, not the graph, so extracting every gate's
    // features stays linear in the design size.
    let mut visited: HashSet<GateId> = HashSet::from([root]);
    let mut order = vec![root];
    let mut frontier = vec![root];
    while order.len() < locality && !frontier.is_empty() {
        let mut ins: Vec<GateId> = frontier
            .iter()
            .flat_map(|&u| g.fanin(u).iter().copied())
            .filter(|v| !visited.contains(v))
            .collect();
        ins.sort_unstable();
        ins.dedup();
        visited.extend(&ins);
        let mut outs: Vec<GateId> = frontier
            .iter()
            .flat_map(|&u| g.fanout(u).iter().copied())
            .filter(|v| !visited.contains(v))
            .collect();
        outs.sort_unstable();
        outs.dedup();
        visited.extend(&outs);
        frontier = ins.into_iter().chain(outs).collect();
        order.extend(frontier.iter().copied());
    }
    order.truncate(locality);
    order
}

pub fn structural_features(
    g: &CircuitGraph,
    schema: &FeatureSchema,
    gate: GateId,
) -> FeatureVector {
    let l = schema.locality;
    let neighborhood = bfs_locality(g, gate, l);
    let mut values = vec![0u8; schema.feature_len()];
    for p in 0..l {
        let t = neighborhood.get(p).map(|&id| g.gtype(id));
        values[schema.type_index(p, t)] = 1;
    }
    for (p, &u) in neighborhood.iter().enumerate() {
        for (q, &v) in neighborhood.iter().enumerate() {
            if g.drives(u, v) {
                values[schema.adjacency_index(p, q)] = 1;
            }
        }
    }
    FeatureVector {
        gate,
        values,
        neighborhood,
    }
}
