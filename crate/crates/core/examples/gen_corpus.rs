// SPDX-License-Identifier: Apache-2.0

//! Writes the generated example designs as `.bench` files.
//!
//! Usage: `cargo run --example gen_corpus -- [DIR]` (default `corpus`).

use std::path::PathBuf;

use polaris::netlist::write_bench;
use polaris::synth::bundled;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus".into()));
    std::fs::create_dir_all(&dir)?;
    for n in bundled() {
        let path = dir.join(format!("{}.bench", n.name()));
        std::fs::write(&path, write_bench(&n))?;
        println!("{} ({} gates)", path.display(), n.logic_gate_count());
    }
    Ok(())
}
