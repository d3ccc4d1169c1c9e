//! Suite execution against the simulator, with or without adaptive
//! recovery, and the post-run review of recovery decisions.

mod config;
mod report;
mod review;
mod suite;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{validate, Severity, TestScript, ValidationIssue, Verb};
use crate::model::{start_session, AppModel};
use crate::recovery::{
    attempt_recovery, try_step, EventDecision, EventOutcome, KnowledgeBase, PopupDefinition,
    RecoveryContext, RecoveryEvent, StepAttempt,
};
use crate::repo::Repository;

pub use config::{EngineConfig, LegacyMode};
pub use report::{
    render_report, ReportError, ReportFormat, RunReport, Summary, Tally, FIXED_TIMESTAMP,
};
pub use review::{review, ReviewError, ReviewOutcome};
pub use suite::{load_suite, SuiteError, SuiteFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Passed,
    Recovered,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: usize,
    pub verb: Verb,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<RecoveryEvent>,
    pub duration_ticks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptStatus {
    Passed,
    Recovered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptResult {
    pub script_id: String,
    pub seed: u64,
    pub status: ScriptStatus,
    pub steps: Vec<StepResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<ValidationIssue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub learned_popups: Vec<PopupDefinition>,
}

impl ScriptResult {
    pub fn events(&self) -> impl Iterator<Item = &RecoveryEvent> {
        self.steps.iter().flat_map(|s| &s.events)
    }
}

fn script_status(steps: &[StepResult]) -> ScriptStatus {
    if steps.iter().any(|s| s.status == StepStatus::Failed) {
        ScriptStatus::Failed
    } else if steps.iter().any(|s| s.status == StepStatus::Recovered) {
        ScriptStatus::Recovered
    } else {
        ScriptStatus::Passed
    }
}

/// Runs one script in a fresh session seeded with `seed`.
pub fn execute_script(
    script: &TestScript,
    model: &Arc<AppModel>,
    repo: &Repository,
    config: &EngineConfig,
    kb: &KnowledgeBase,
    seed: u64,
) -> ScriptResult {
    let validation = validate(script, repo, Some(model));
    let errors: Vec<&ValidationIssue> = validation
        .iter()
        .filter(|i| i.severity == Severity::Error)
        .collect();
    if config.validate_before_run && !errors.is_empty() {
        // Blocked: report the offending steps as failed without running anything.
        let steps = script
            .steps
            .iter()
            .map(|st| {
                let mine: Vec<&str> = errors
                    .iter()
                    .filter(|i| i.step == st.index)
                    .map(|i| i.message.as_str())
                    .collect();
                StepResult {
                    step: st.index,
                    verb: st.verb,
                    status: if mine.is_empty() {
                        StepStatus::Skipped
                    } else {
                        StepStatus::Failed
                    },
                    events: vec![],
                    duration_ticks: 0,
                    message: (!mine.is_empty()).then(|| format!("validation: {}", mine.join("; "))),
                }
            })
            .collect::<Vec<_>>();
        return ScriptResult {
            script_id: script.id.clone(),
            seed,
            status: ScriptStatus::Failed,
            steps,
            validation,
            learned_popups: vec![],
        };
    }

    let recovery = config.recovery_config();
    let mut session = start_session(Arc::clone(model), seed);
    let mut learned: Vec<PopupDefinition> = Vec::new();
    let mut steps = Vec::with_capacity(script.steps.len());
    let mut halted = false;
    for step in &script.steps {
        if halted {
            steps.push(StepResult {
                step: step.index,
                verb: step.verb,
                status: StepStatus::Skipped,
                events: vec![],
                duration_ticks: 0,
                message: None,
            });
            continue;
        }
        let before = session.action_counter();
        let wait = match step.verb {
            Verb::Wait => step.arg().and_then(|a| a.parse::<u64>().ok()).unwrap_or(0),
            _ => 0,
        };
        let mut events = Vec::new();
        let (status, message) = match try_step(&mut session, step, repo, None, false) {
            StepAttempt::Passed => (StepStatus::Passed, None),
            StepAttempt::Failed(m) => (StepStatus::Failed, Some(m)),
            StepAttempt::Blocked(b) if !config.adaptive => (StepStatus::Failed, Some(b.message)),
            StepAttempt::Blocked(mut blocked) => {
                let ctx = RecoveryContext {
                    script_id: &script.id,
                    step,
                    repo,
                    config: &recovery,
                    similarity: &config.similarity,
                    heuristics: &config.heuristics,
                    kb,
                    learned: &learned,
                };
                let mut binding = None;
                let mut result = (StepStatus::Failed, Some(blocked.message.clone()));
                let mut new_defs = Vec::new();
                for _ in 0..recovery.max_passes.max(1) {
                    let out = attempt_recovery(&mut session, &ctx, &blocked, binding.take());
                    events.extend(out.events);
                    new_defs.extend(out.learned);
                    binding = out.binding;
                    if out.resume {
                        result = (StepStatus::Recovered, None);
                        break;
                    }
                    if let Some(f) = out.failure {
                        result = (StepStatus::Failed, Some(f));
                        break;
                    }
                    match out.next {
                        Some(next) => {
                            result = (StepStatus::Failed, Some(next.message.clone()));
                            blocked = next;
                        }
                        None => break,
                    }
                }
                learned.extend(new_defs);
                result
            }
        };
        if status == StepStatus::Failed {
            // Partial progress did not get the step through.
            for e in &mut events {
                e.outcome = EventOutcome::Exhausted;
            }
            halted = config.legacy_mode == LegacyMode::Abort;
        }
        steps.push(StepResult {
            step: step.index,
            verb: step.verb,
            status,
            events,
            duration_ticks: session.action_counter() - before + wait,
            message,
        });
    }
    ScriptResult {
        script_id: script.id.clone(),
        seed,
        status: script_status(&steps),
        steps,
        validation,
        learned_popups: learned,
    }
}

/// Runs every script in its own session (seed + ordinal), concurrently,
/// and assembles the report in script order.
#[allow(clippy::too_many_arguments)]
pub fn execute_suite(
    suite_id: &str,
    scripts: &[TestScript],
    model: &AppModel,
    repo: &Repository,
    config: &EngineConfig,
    kb: &KnowledgeBase,
    seed: u64,
    timestamp: String,
) -> RunReport {
    let model = Arc::new(model.clone());
    let results: Vec<ScriptResult> = scripts
        .par_iter()
        .enumerate()
        .map(|(i, s)| execute_script(s, &model, repo, config, kb, seed.wrapping_add(i as u64)))
        .collect();
    let pending_keys = pending_keys(&results);
    let mut learned_popups: Vec<PopupDefinition> = Vec::new();
    for d in results.iter().flat_map(|r| &r.learned_popups) {
        if !learned_popups.iter().any(|x| x.id == d.id) {
            learned_popups.push(d.clone());
        }
    }
    RunReport {
        suite_id: suite_id.to_string(),
        config: config.clone(),
        model_version: model.version.clone(),
        repo_version: repo.version.clone(),
        seed,
        summary: Summary::tally(&results),
        scripts: results,
        pending_keys,
        learned_popups,
        timestamp,
    }
}

fn pending_keys(results: &[ScriptResult]) -> Vec<String> {
    let mut keys = Vec::new();
    for e in results.iter().flat_map(|r| r.events()) {
        if e.outcome == EventOutcome::Resumed
            && e.decision == EventDecision::Pending
            && !keys.contains(&e.decision_key)
        {
            keys.push(e.decision_key.clone());
        }
    }
    keys
}

/// 0 all passed, 1 any failure, 3 no failure but recoveries await review.
pub fn exit_code(report: &RunReport) -> i32 {
    if report.summary.scripts.failed > 0 {
        1
    } else if !report.pending_keys.is_empty() {
        3
    } else {
        0
    }
}
