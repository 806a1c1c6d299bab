//! Suite reports: per-check worst residuals against pinned thresholds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// One observation from one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
}

impl Observation {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self { name: name.into(), residual, threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub dims: Vec<usize>,
    pub tol: f64,
    pub mutated: bool,
    pub failures: usize,
    pub max_residual: f64,
    pub per_check: Vec<CheckReport>,
    pub wall_time_ms: u64,
}

/// Worst residual per check name, in order of first appearance. NaN counts
/// as a failure.
pub fn merge(observations: impl IntoIterator<Item = Observation>) -> Vec<CheckReport> {
    let mut out: Vec<CheckReport> = Vec::new();
    for o in observations {
        let residual = if o.residual.is_nan() { f64::MAX } else { o.residual };
        match out.iter_mut().find(|c| c.name == o.name) {
            Some(c) => {
                c.residual = c.residual.max(residual);
                c.threshold = c.threshold.min(o.threshold);
            }
            None => out.push(CheckReport { name: o.name, residual, threshold: o.threshold, pass: true }),
        }
    }
    for c in &mut out {
        c.pass = c.residual <= c.threshold;
    }
    out
}

impl SuiteReport {
    pub fn failures_of(per_check: &[CheckReport]) -> usize {
        per_check.iter().filter(|c| !c.pass).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Same report with the timing zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_time_ms: 0, ..self.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "suite {}  seed {}  trials {}  dims {:?}  tol {:e}{}",
            self.suite,
            self.seed,
            self.trials,
            self.dims,
            self.tol,
            if self.mutated { "  [mutated]" } else { "" }
        );
        let width = self.per_check.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.per_check {
            let _ = writeln!(
                s,
                "  {}  {:<width$}  {:.3e}  (threshold {:.1e})",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.residual,
                c.threshold
            );
        }
        let _ = writeln!(
            s,
            "failures {}  max residual {:.3e}  {} ms",
            self.failures, self.max_residual, self.wall_time_ms
        );
        s
    }
}
