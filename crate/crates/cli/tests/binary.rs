// SPDX-License-Identifier: Apache-2.0

//! Runs the built `polaris` binary as a subprocess.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn polaris(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polaris"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("POLARIS_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn exit_codes() {
    assert_eq!(polaris(&["--help"], None).status.code(), Some(0));
    assert_eq!(polaris(&["tvla", "--help"], None).status.code(), Some(0));
    assert_eq!(polaris(&[], None).status.code(), Some(1));
    assert_eq!(polaris(&["tvla", "--bogus"], None).status.code(), Some(1));
    let missing = polaris(&["parse", "--netlist", "/no/such/file.bench"], None);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("file.bench"));
    let bad_budget = polaris(
        &[
            "mask",
            "--netlist",
            &corpus("c17.bench"),
            "--rules-only",
            "--budget",
            "150%",
        ],
        None,
    );
    assert_eq!(bad_budget.status.code(), Some(1));
}

#[test]
fn malformed_netlist_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.bench");
    std::fs::write(&path, "INPUT(a)\nOUTPUT(f)\nf = AND(a, missing)\n").unwrap();
    let out = polaris(&["parse", "--netlist", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let file = dir.path().join(format!("t{threads}.json"));
        let out = polaris(
            &[
                "tvla",
                "--netlist",
                &corpus("rca8.bench"),
                "--traces",
                "5000",
                "--seed",
                "3",
                "--format",
                "json",
                "--out",
                file.to_str().unwrap(),
            ],
            Some(threads),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((out.stdout, std::fs::read(&file).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}
