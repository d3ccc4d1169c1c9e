use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EngineConfig, ScriptResult, ScriptStatus, StepStatus};
use crate::recovery::PopupDefinition;

/// Timestamp written under `--fixed-clock`.
pub const FIXED_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub passed: usize,
    pub recovered: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub scripts: Tally,
    pub steps: Tally,
    pub events: usize,
}

impl Summary {
    pub fn tally(results: &[ScriptResult]) -> Summary {
        let mut s = Summary::default();
        for r in results {
            s.scripts.total += 1;
            match r.status {
                ScriptStatus::Passed => s.scripts.passed += 1,
                ScriptStatus::Recovered => s.scripts.recovered += 1,
                ScriptStatus::Failed => s.scripts.failed += 1,
            }
            for st in &r.steps {
                s.steps.total += 1;
                s.events += st.events.len();
                match st.status {
                    StepStatus::Passed => s.steps.passed += 1,
                    StepStatus::Recovered => s.steps.recovered += 1,
                    StepStatus::Failed => s.steps.failed += 1,
                    StepStatus::Skipped => s.steps.skipped += 1,
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub suite_id: String,
    pub config: EngineConfig,
    pub model_version: String,
    pub repo_version: String,
    pub seed: u64,
    pub scripts: Vec<ScriptResult>,
    pub summary: Summary,
    pub pending_keys: Vec<String>,
    #[serde(default)]
    pub learned_popups: Vec<PopupDefinition>,
    /// The only field that differs between identical runs.
    pub timestamp: String,
}

impl RunReport {
    pub fn load(document: &str) -> Result<Self, ReportError> {
        let r: RunReport =
            serde_json::from_str(document).map_err(|e| ReportError::Parse(e.to_string()))?;
        r.check()?;
        Ok(r)
    }

    /// The summary must agree with the step results.
    pub fn check(&self) -> Result<(), ReportError> {
        let recomputed = Summary::tally(&self.scripts);
        if recomputed != self.summary {
            return Err(ReportError::Inconsistent {
                stored: Box::new(self.summary),
                recomputed: Box::new(recomputed),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("report summary {stored:?} disagrees with its results {recomputed:?}")]
    Inconsistent {
        stored: Box<Summary>,
        recomputed: Box<Summary>,
    },
    #[error("invalid report: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Text,
}

fn status_word<T: Serialize>(s: &T) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn render_report(report: &RunReport, format: ReportFormat) -> Result<String, ReportError> {
    report.check()?;
    Ok(match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    })
}

fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    let s = &r.summary;
    let _ = writeln!(
        out,
        "suite {}  model {}  repo {}  seed {}",
        r.suite_id, r.model_version, r.repo_version, r.seed
    );
    let _ = writeln!(out, "generated {}", r.timestamp);
    let _ = writeln!(
        out,
        "scripts: {} total, {} passed, {} recovered, {} failed",
        s.scripts.total, s.scripts.passed, s.scripts.recovered, s.scripts.failed
    );
    let _ = writeln!(
        out,
        "steps:   {} total, {} passed, {} recovered, {} failed, {} skipped",
        s.steps.total, s.steps.passed, s.steps.recovered, s.steps.failed, s.steps.skipped
    );
    for sr in &r.scripts {
        let _ = writeln!(
            out,
            "\n{:<10} {}",
            status_word(&sr.status).to_uppercase(),
            sr.script_id
        );
        for st in &sr.steps {
            if st.status == StepStatus::Passed {
                continue;
            }
            let _ = write!(
                out,
                "  step {:>3} {:<13} {}",
                st.step,
                st.verb.as_str(),
                status_word(&st.status)
            );
            if let Some(m) = &st.message {
                let _ = write!(out, ": {m}");
            }
            out.push('\n');
            for e in &st.events {
                let _ = writeln!(
                    out,
                    "    {:<20} {:<9} {:<9} {}  key={}{}",
                    e.strategy.as_str(),
                    status_word(&e.outcome),
                    status_word(&e.decision),
                    e.detail.summary(),
                    e.decision_key,
                    if e.skipped {
                        "  (skipped: rejected earlier)"
                    } else {
                        ""
                    }
                );
            }
        }
    }
    if !r.pending_keys.is_empty() {
        let _ = writeln!(out, "\npending review:");
        for k in &r.pending_keys {
            let _ = writeln!(out, "  {k}");
        }
    }
    out
}
