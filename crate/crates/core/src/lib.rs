// SPDX-License-Identifier: Apache-2.0

//! Power side-channel assessment and model-guided masking for gate-level
//! netlists.

pub mod datagen;
pub mod graph;
pub mod masking;
pub mod ml;
pub mod netlist;
pub mod pipeline;
pub mod sim;
pub mod synth;
pub mod tvla;
pub mod xai;

mod serde_util;
