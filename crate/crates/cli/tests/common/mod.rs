#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

/// The paper's two-state example with a chosen interarrival law and extra top-level fields.
pub fn paper_config(interarrival: &str, extra: &str) -> String {
    format!(
        r#"{{
    "model": {{
        "delta": 0.0,
        "chain": {{ "k": 1, "K": 1, "P": [[0.25, 0.75], [0.5, 0.5]], "pi": [0.4, 0.6] }},
        "service": [{{ "kind": "exponential", "rate": 1.0 }}],
        "interarrival": {interarrival}
    }}{extra}
}}"#
    )
}

pub const GAMMA_1_10: &str = r#"{ "kind": "gamma", "shape": 1.0, "rate": 10.0 }"#;
pub const UNIT_LATTICE: &str = r#"{ "kind": "deterministic", "value": 1.0 }"#;

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn ibnr(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_ibnr")).args(args).output().unwrap()
}

/// Parsed CSV: header and records.
pub fn csv_table(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(bytes);
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
