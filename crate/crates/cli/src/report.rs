use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PipelineConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

/// One row of the schedule table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Series index for proper-function rows, absent for glue rows.
    pub n: Option<usize>,
    pub r: u64,
    pub eps: f64,
    pub t: f64,
    pub s: f64,
    pub o: u64,
    /// `|D|`.
    pub d_size: usize,
    pub region_size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub generated_unix_secs: u64,
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub space: Option<Value>,
    pub schedule: Vec<ScheduleEntry>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub summary: Summary,
}

impl Report {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            generated_unix_secs: now,
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            space: None,
            schedule: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
            summary: Summary::default(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Serialize) {
        let detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
        self.summarize();
    }

    fn summarize(&mut self) {
        let passed = self.checks.iter().filter(|c| c.passed).count();
        self.summary = Summary {
            checks: self.checks.len(),
            passed,
            failed: self.checks.len() - passed,
        };
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("report.json");
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Human-readable summary.
    pub fn render(&self) -> String {
        let mut out = format!("{} (seed {})\n", self.command, self.seed);
        if !self.schedule.is_empty() {
            out.push_str("  n     R  eps          t            S            o      |D|  region\n");
            for s in &self.schedule {
                let n = s.n.map_or("-".to_string(), |n| n.to_string());
                out.push_str(&format!(
                    "  {n:<4}{:>3}  {:<11}  {:<11.5e}  {:<11}  {:<6} {:>4}  {}\n",
                    s.r, s.eps, s.t, s.s, s.o, s.d_size, s.region_size
                ));
            }
        }
        for c in &self.checks {
            out.push_str(&format!("  [{}] {}\n", if c.passed { "pass" } else { "FAIL" }, c.name));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out.push_str(&format!(
            "  {} checks, {} passed, {} failed\n",
            self.summary.checks, self.summary.passed, self.summary.failed
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_tracks_checks() {
        let mut r = Report::new("test", &PipelineConfig::default());
        r.check("a", true, 1);
        r.check("b", false, "why");
        assert_eq!(r.summary, Summary { checks: 2, passed: 1, failed: 1 });
        assert!(!r.all_passed());
        assert!(r.render().contains("[FAIL] b"));
    }
}
