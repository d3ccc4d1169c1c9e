//! Script maintenance across application versions: diff two models,
//! propose patches to scripts and the repository, apply the accepted ones.

mod diff;
mod patches;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{ValidationIssue, Verb};
use crate::hash::fnv1a64_hex;
use crate::repo::{AttrKey, Attributes};

pub use diff::{
    diff_models, ChangedAttr, DiffConfig, DiffEntry, MatchedBy, ModelDiff, ObjectSummary,
};
pub use patches::{
    apply_patches, propose_patches, trace_screens, PatchApplication, ProposalContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    RenameRef,
    RemoveStep,
    AddStep,
    AddOptionScript,
    UpdateRepoDescriptor,
}

impl PatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchKind::RenameRef => "rename_ref",
            PatchKind::RemoveStep => "remove_step",
            PatchKind::AddStep => "add_step",
            PatchKind::AddOptionScript => "add_option_script",
            PatchKind::UpdateRepoDescriptor => "update_repo_descriptor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatchTarget {
    Step { script_id: String, step: usize },
    Script { script_id: String },
    Logical { logical_name: String },
}

impl PatchTarget {
    fn render(&self) -> String {
        match self {
            PatchTarget::Step { script_id, step } => format!("{script_id}#{step}"),
            PatchTarget::Script { script_id } => script_id.clone(),
            PatchTarget::Logical { logical_name } => logical_name.clone(),
        }
    }

    pub fn script_id(&self) -> Option<&str> {
        match self {
            PatchTarget::Step { script_id, .. } | PatchTarget::Script { script_id } => {
                Some(script_id)
            }
            PatchTarget::Logical { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PatchPayload {
    /// Replace literal argument occurrences of `from` with `to`.
    Replacement { from: String, to: String },
    /// The removed step, as canonical text, for the reviewer.
    Removal { step_text: String },
    /// Inserted immediately before the target step.
    NewStep {
        verb: Verb,
        object_ref: Option<String>,
        args: Vec<String>,
    },
    /// A complete new script.
    NewScript { name: String, text: String },
    /// Overlaid on the entry, or the entry to create when absent. Keys in
    /// `remove` are dropped from the entry.
    Descriptor {
        attributes: Attributes,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        remove: Vec<AttrKey>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchStatus {
    Pending,
    Applied,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptPatch {
    pub key: String,
    pub kind: PatchKind,
    pub target: PatchTarget,
    pub payload: PatchPayload,
    pub rationale: String,
    pub status: PatchStatus,
}

impl ScriptPatch {
    /// Builds a pending patch; the key hashes target and payload.
    ///
    /// Panics if `payload` does not fit `kind`.
    pub fn new(
        kind: PatchKind,
        target: PatchTarget,
        payload: PatchPayload,
        rationale: String,
    ) -> Self {
        assert!(
            consistent(kind, &target, &payload),
            "payload does not fit {}",
            kind.as_str()
        );
        let target_text = target.render();
        let canonical = serde_json::to_value(&payload)
            .expect("payload serializes")
            .to_string();
        let key = format!(
            "{}:{}:{}",
            kind.as_str(),
            target_text,
            fnv1a64_hex(canonical.as_bytes())
        );
        ScriptPatch {
            key,
            kind,
            target,
            payload,
            rationale,
            status: PatchStatus::Pending,
        }
    }

    pub fn is_consistent(&self) -> bool {
        consistent(self.kind, &self.target, &self.payload)
    }

    pub fn describe(&self) -> String {
        let what = match &self.payload {
            PatchPayload::Replacement { from, to } => format!("replace `{from}` with `{to}`"),
            PatchPayload::Removal { step_text } => format!("remove `{step_text}`"),
            PatchPayload::NewStep {
                verb,
                object_ref,
                args,
            } => {
                let mut s = verb.as_str().to_string();
                for t in object_ref.iter().chain(args) {
                    s.push_str(&format!(" {t:?}"));
                }
                format!("insert `{s}`")
            }
            PatchPayload::NewScript { name, .. } => format!("add script `{name}`"),
            PatchPayload::Descriptor { attributes, remove } => {
                let mut s = format!(
                    "set {}",
                    serde_json::to_string(attributes).expect("attributes serialize")
                );
                if !remove.is_empty() {
                    let keys: Vec<&str> = remove.iter().map(|k| k.as_str()).collect();
                    s.push_str(&format!(", drop {}", keys.join(", ")));
                }
                s
            }
        };
        format!(
            "[{}] {} at {}: {what} ({})",
            self.kind.as_str(),
            self.key,
            self.target.render(),
            self.rationale
        )
    }
}

fn consistent(kind: PatchKind, target: &PatchTarget, payload: &PatchPayload) -> bool {
    use PatchKind::*;
    match (kind, payload) {
        (RenameRef, PatchPayload::Replacement { .. })
        | (RemoveStep, PatchPayload::Removal { .. })
        | (AddStep, PatchPayload::NewStep { .. }) => matches!(target, PatchTarget::Step { .. }),
        (AddOptionScript, PatchPayload::NewScript { .. }) => {
            matches!(target, PatchTarget::Script { .. })
        }
        (UpdateRepoDescriptor, PatchPayload::Descriptor { attributes, remove }) => {
            matches!(target, PatchTarget::Logical { .. })
                && !(attributes.is_empty() && remove.is_empty())
        }
        _ => false,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MaintainError {
    #[error("accepted key `{0}` is not among the proposed patches")]
    UnknownKey(String),
    #[error(
        "patch `{key}` leaves script `{script}` invalid: {}",
        summarize(issues)
    )]
    Validation {
        key: String,
        script: String,
        issues: Vec<ValidationIssue>,
    },
    #[error("patch `{key}` cannot be applied: {reason}")]
    Inapplicable { key: String, reason: String },
}

fn summarize(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| i.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}
