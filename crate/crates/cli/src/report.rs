//! Check records and their text and JSON renderings.

use std::fmt::Write;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    /// The identity the check measures.
    pub anchor: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    /// Worst sample point, on failure.
    pub witness: Option<Vec<f64>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: String,
    pub description: String,
    pub suite: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub records: Vec<Record>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Three significant digits.
pub fn sig3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2e}")
    } else {
        "inf".to_string()
    }
}

fn sig3_value(v: f64) -> Value {
    if v.is_finite() {
        json!(sig3(v).parse::<f64>().expect("formatted float"))
    } else {
        json!("inf")
    }
}

impl Report {
    pub fn summary(&self) -> Summary {
        let passed = self.records.iter().filter(|r| r.pass).count();
        Summary {
            total: self.records.len(),
            passed,
            failed: self.records.len() - passed,
        }
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config  {}  ({})", self.config, self.description);
        let _ = writeln!(s, "suite   {}  samples {}  seed {}  tol {}", self.suite, self.samples, self.seed, sig3(self.tol));
        let width = self.records.iter().map(|r| r.id.chars().count()).max().unwrap_or(0);
        for r in &self.records {
            let mark = if r.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{mark}  {:<width$}  {:>9} <= {:<9}  {}",
                r.id,
                sig3(r.residual),
                sig3(r.tol),
                r.anchor
            );
            if let Some(w) = &r.witness {
                let pt: Vec<String> = w.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(s, "      witness ({})", pt.join(", "));
            }
            if let Some(n) = &r.note {
                let _ = writeln!(s, "      note: {n}");
            }
        }
        let sm = self.summary();
        if sm.total == 0 {
            let _ = writeln!(s, "no checks apply to this config");
        }
        let _ = writeln!(s, "{} checks, {} passed, {} failed", sm.total, sm.passed, sm.failed);
        let _ = writeln!(s, "elapsed {:.2} s", self.elapsed.as_secs_f64());
        s
    }

    /// Stable JSON: no timing, records sorted by id.
    pub fn to_machine(&self) -> String {
        let records: Vec<Value> = self
            .records
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "anchor": r.anchor,
                    "residual": sig3_value(r.residual),
                    "tol": sig3_value(r.tol),
                    "pass": r.pass,
                    "witness": r.witness,
                    "note": r.note,
                })
            })
            .collect();
        let v = json!({
            "config": self.config,
            "suite": self.suite,
            "samples": self.samples,
            "seed": self.seed,
            "tol": sig3_value(self.tol),
            "records": records,
            "summary": self.summary(),
        });
        let mut out = serde_json::to_string_pretty(&v).expect("json");
        out.push('\n');
        out
    }
}
