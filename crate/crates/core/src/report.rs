//! Machine-readable experiment reports: one record per checked point with
//! the measured quantity, the theoretical bound, the margin and an error
//! bar. Serialization is deterministic, so identical runs produce
//! byte-identical artifacts.

use serde::Serialize;
use std::io::{self, Write};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Record {
    /// Abscissa of the check (time, index, parameter value...).
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    /// `bound - measured`; nonnegative margins pass.
    pub margin: f64,
    /// Error bar (Monte Carlo standard error or certification slack).
    pub stderr: f64,
}

impl Record {
    pub fn new(t: f64, measured: f64, bound: f64, stderr: f64) -> Self {
        Record {
            t,
            measured,
            bound,
            margin: bound - measured,
            stderr,
        }
    }

    /// A record passes when the margin is above `-(tolerance + stderr)`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.margin >= -(tolerance + self.stderr)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub package_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub tolerance: f64,
    pub records: Vec<Record>,
    pub passed: bool,
    /// Free-form scalar diagnostics (deterministic order).
    pub diagnostics: Vec<(String, f64)>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, config_hash: impl Into<String>, seed: u64, tolerance: f64) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            seed,
            tolerance,
            records: Vec::new(),
            passed: true,
            diagnostics: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Record) {
        self.passed = self.passed && record.passes(self.tolerance);
        self.records.push(record);
    }

    pub fn diagnostic(&mut self, key: impl Into<String>, value: f64) {
        self.diagnostics.push((key.into(), value));
    }

    /// Mark the whole report failed (certification failures and the like).
    pub fn fail(&mut self) {
        self.passed = false;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-column CSV: `t,measured,bound,margin,stderr`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "t,measured,bound,margin,stderr")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t, r.measured, r.bound, r.margin, r.stderr
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_decide_pass() {
        let mut rep = ExperimentReport::new("demo", "abc", 1, 1e-8);
        rep.push(Record::new(0.5, 1.0, 2.0, 0.0));
        assert!(rep.passed);
        rep.push(Record::new(1.0, 2.0, 1.0, 0.0));
        assert!(!rep.passed);
    }

    #[test]
    fn error_bars_soften_margins() {
        let r = Record::new(0.0, 1.05, 1.0, 0.1);
        assert!(r.passes(1e-8));
        let r = Record::new(0.0, 1.2, 1.0, 0.1);
        assert!(!r.passes(1e-8));
    }

    #[test]
    fn serialization_is_deterministic() {
        let mut a = ExperimentReport::new("demo", "abc", 7, 1e-8);
        a.push(Record::new(0.5, 0.1, 0.2, 0.0));
        a.diagnostic("lambda", 4.5);
        let b = a.clone();
        assert_eq!(a.to_json(), b.to_json());
        let mut csv_a = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        assert!(String::from_utf8(csv_a).unwrap().starts_with("t,measured,bound,margin,stderr\n"));
    }
}
