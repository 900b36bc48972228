use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::CliError;

/// Schema tag carried by every JSON record.
pub const SCHEMA: &str = "oqw-report/1";

#[derive(Clone, Debug)]
pub struct Report {
    pub command: &'static str,
    pub passed: bool,
    pub tolerance: f64,
    pub check_tolerance: f64,
    pub seed: Option<u64>,
    pub inputs: Value,
    pub results: Value,
    /// Human-readable lines, in order.
    pub lines: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, tolerance: f64, check_tolerance: f64) -> Self {
        Report {
            command,
            passed: true,
            tolerance,
            check_tolerance,
            seed: None,
            inputs: json!({}),
            results: json!({}),
            lines: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn line(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records a check; a failure clears `passed` and adds a note.
    pub fn check(&mut self, name: &str, ok: bool) {
        if !ok {
            self.passed = false;
            self.notes.push(format!("check failed: {name}"));
        }
    }

    pub fn to_json(&self) -> String {
        let record = json!({
            "schema": SCHEMA,
            "command": self.command,
            "passed": self.passed,
            "versions": versions(),
            "tolerance": self.tolerance,
            "check_tolerance": self.check_tolerance,
            "seed": self.seed,
            "inputs": self.inputs,
            "results": self.results,
            "notes": self.notes,
        });
        serde_json::to_string_pretty(&record).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self.lines.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.lines {
            let pad = width - k.chars().count();
            let _ = writeln!(out, "{k}{}  {v}", " ".repeat(pad));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "{}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

fn versions() -> Value {
    json!({ "oqw-cli": env!("CARGO_PKG_VERSION") })
}

pub fn error_json(command: &str, e: &CliError) -> String {
    let record = json!({
        "schema": SCHEMA,
        "command": command,
        "passed": false,
        "versions": versions(),
        "error": { "kind": e.kind(), "message": e.to_string() },
    });
    serde_json::to_string_pretty(&record).expect("report serializes")
}

pub fn complex(z: oqw::C64) -> Value {
    json!([z.re, z.im])
}

/// Short form for text output: six significant decimals.
pub fn fmt(x: f64) -> String {
    let s = format!("{x:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_owned(),
        _ => s,
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.2e}")
}
