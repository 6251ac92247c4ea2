//! Gates, emitted artifacts and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{json_bytes, num, sha256_hex, write_atomic, REPORT_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    /// A small-data guard or validity window was breached.
    Flag,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Flag => "flag",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub verdict: Verdict,
    pub value: f64,
    pub tolerance: String,
    pub note: String,
}

impl Gate {
    /// `Pass` when `ok`, otherwise `Fail`.
    pub fn check(name: &str, ok: bool, value: f64, tolerance: &str) -> Self {
        Self::new(name, if ok { Verdict::Pass } else { Verdict::Fail }, value, tolerance)
    }

    /// `Pass` when `ok`, otherwise `Flag`.
    pub fn guard(name: &str, ok: bool, value: f64, tolerance: &str) -> Self {
        Self::new(name, if ok { Verdict::Pass } else { Verdict::Flag }, value, tolerance)
    }

    pub fn new(name: &str, verdict: Verdict, value: f64, tolerance: &str) -> Self {
        Self { name: name.into(), verdict, value, tolerance: tolerance.into(), note: String::new() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "verdict": self.verdict.as_str(),
            "value": num(self.value),
            "tolerance": self.tolerance,
            "note": self.note,
        })
    }
}

/// Files and gates produced by one subcommand, before anything is written.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub gates: Vec<Gate>,
}

impl Artifacts {
    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn gate(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn verdict(&self) -> Verdict {
        self.gates.iter().map(|g| g.verdict).max().unwrap_or(Verdict::Pass)
    }

    pub fn gates_json(&self) -> Value {
        Value::Array(self.gates.iter().map(Gate::to_json).collect())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

pub fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        Verdict::Flag => 2,
        Verdict::Fail => 1,
    }
}

/// Writes every artifact into `dir`, then `manifest.json` listing them with checksums.
pub fn emit(dir: &Path, subcommand: &str, cfg: &RunConfig, art: &Artifacts, wall: Duration) -> std::io::Result<PathBuf> {
    let mut listed = Vec::new();
    for (name, bytes) in &art.files {
        write_atomic(&dir.join(name), bytes)?;
        listed.push(json!({ "path": name, "bytes": bytes.len(), "sha256": sha256_hex(bytes) }));
    }
    let manifest = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "seed": cfg.rng_seed,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "wall_clock_seconds": num(wall.as_secs_f64()),
        "verdict": art.verdict().as_str(),
        "gates": art.gates_json(),
        "files": listed,
    });
    let path = dir.join("manifest.json");
    write_atomic(&path, &json_bytes(&manifest))?;
    Ok(path)
}
