use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::RunReport;
use crate::dsl::TestScript;
use crate::maintainer::{apply_patches, MaintainError, PatchApplication, ScriptPatch};
use crate::model::AppModel;
use crate::recovery::{record_decision, Decision, KnowledgeBase, RecoveryError, RecoveryEvent};
use crate::repo::Repository;

#[derive(Debug, Error, PartialEq)]
pub enum ReviewError {
    #[error("decision key `{0}` does not appear in the report")]
    UnknownKey(String),
    #[error("decision key `{0}` is both accepted and rejected")]
    Conflict(String),
    #[error(transparent)]
    Patch(#[from] MaintainError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewOutcome {
    pub kb: KnowledgeBase,
    /// Patches produced by accepted adaptations.
    pub patches: Vec<ScriptPatch>,
    /// Present when the patches were applied.
    pub applied: Option<PatchApplication>,
}

/// Records tester decisions about a run. With `apply` set, the patches
/// that accepted rebinds produce are applied to `scripts` and `repo`,
/// validated against `model`.
pub fn review(
    report: &RunReport,
    decisions: &[(String, Decision)],
    kb: &KnowledgeBase,
    repo: &Repository,
    scripts: &[TestScript],
    apply: Option<&AppModel>,
) -> Result<ReviewOutcome, ReviewError> {
    let mut chosen: BTreeMap<&str, Decision> = BTreeMap::new();
    for (k, d) in decisions {
        match chosen.insert(k, *d) {
            Some(prev) if prev != *d => return Err(ReviewError::Conflict(k.clone())),
            _ => {}
        }
    }
    let events: Vec<RecoveryEvent> = report
        .scripts
        .iter()
        .flat_map(|s| s.events())
        .cloned()
        .collect();
    let mut kb = kb.clone();
    let mut patches: Vec<ScriptPatch> = Vec::new();
    // decisions apply in report order so the outcome does not depend on argument order
    let mut order: Vec<&str> = Vec::new();
    for e in &events {
        if chosen.contains_key(e.decision_key.as_str()) && !order.contains(&e.decision_key.as_str())
        {
            order.push(&e.decision_key);
        }
    }
    if let Some(k) = chosen.keys().find(|k| !order.contains(k)) {
        return Err(ReviewError::UnknownKey(k.to_string()));
    }
    for key in order {
        let (next, patch) =
            record_decision(&kb, &events, key, chosen[key], repo).map_err(|e| match e {
                RecoveryError::UnknownKey(k) => ReviewError::UnknownKey(k),
                other => ReviewError::UnknownKey(other.to_string()),
            })?;
        kb = next;
        if let Some(p) = patch {
            if !patches.iter().any(|x| x.key == p.key) {
                patches.push(p);
            }
        }
    }
    let applied = match apply {
        Some(model) => {
            let keys: BTreeSet<String> = patches.iter().map(|p| p.key.clone()).collect();
            Some(apply_patches(&patches, &keys, scripts, repo, model)?)
        }
        None => None,
    };
    Ok(ReviewOutcome {
        kb,
        patches,
        applied,
    })
}
