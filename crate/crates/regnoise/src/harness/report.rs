//! Report structure and its on-disk form.
//!
//! `report.json` holds everything that depends only on (config, seed,
//! workers) and is byte-stable across reruns. Wall-clock time goes to a
//! separate `timing.json`. Tables are written as `<name>.csv`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::{Estimate, SlopeFit};

pub const SCHEMA_VERSION: u32 = 1;

/// A named pass/fail decision. Non-gating checks are reported but do not
/// affect the overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub gating: bool,
    pub detail: String,
}

/// Members that aborted with a numeric failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Attrition {
    pub members: usize,
    pub failed: usize,
    /// First few failure messages, in member order.
    pub examples: Vec<String>,
}

impl Attrition {
    pub const LIMIT: f64 = 0.01;

    pub fn fraction(&self) -> f64 {
        if self.members == 0 {
            0.0
        } else {
            self.failed as f64 / self.members as f64
        }
    }

    pub fn merge(&mut self, other: Attrition) {
        self.members += other.members;
        self.failed += other.failed;
        for e in other.examples {
            if self.examples.len() < 5 {
                self.examples.push(e);
            }
        }
    }
}

/// A CSV table: header plus rows of numbers or labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Formats a float for tables; the `Display` form round-trips exactly.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub suite: String,
    pub seed: u64,
    pub workers: usize,
    /// The configuration exactly as parsed.
    pub config: ExperimentConfig,
    /// Every parameter the suite actually used, defaults included.
    pub resolved: BTreeMap<String, serde_json::Value>,
    /// Kernel, drift and calibration constants the run depended on.
    pub constants: BTreeMap<String, f64>,
    pub quantities: BTreeMap<String, Estimate>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub checks: Vec<Check>,
    pub attrition: Attrition,
    pub notes: Vec<String>,
    pub passed: bool,
    #[serde(skip)]
    pub tables: BTreeMap<String, Table>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, seed: u64, workers: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            suite: config.experiment.clone(),
            seed,
            workers,
            config: config.clone(),
            resolved: BTreeMap::new(),
            constants: BTreeMap::new(),
            quantities: BTreeMap::new(),
            fits: BTreeMap::new(),
            checks: Vec::new(),
            attrition: Attrition::default(),
            notes: Vec::new(),
            passed: false,
            tables: BTreeMap::new(),
        }
    }

    pub fn resolve<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).expect("plain data serializes");
        self.resolved.insert(key.to_string(), v);
    }

    pub fn quantity(&mut self, key: impl Into<String>, e: Estimate) {
        self.quantities.insert(key.into(), e);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, gating: true, detail: detail.into() });
    }

    pub fn observe(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, gating: false, detail: detail.into() });
    }

    /// Sets `passed` from the gating checks and the attrition rule.
    pub fn finalize(&mut self) {
        let frac = self.attrition.fraction();
        if self.attrition.failed > 0 {
            self.notes.push(format!(
                "{} of {} members aborted ({:.3}%)",
                self.attrition.failed,
                self.attrition.members,
                100.0 * frac
            ));
        }
        let attrition_ok = frac <= Attrition::LIMIT;
        if !attrition_ok {
            self.checks.push(Check {
                name: "attrition".into(),
                passed: false,
                gating: true,
                detail: format!("{:.3}% of members aborted, limit 1%", 100.0 * frac),
            });
        }
        self.passed = self.checks.iter().filter(|c| c.gating).all(|c| c.passed);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        for (name, table) in &self.tables {
            let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Wall-clock record kept apart from the reproducible report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub suite: String,
    pub seconds: f64,
}

impl Timing {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
