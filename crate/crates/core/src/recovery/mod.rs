//! Runtime recovery: when a step is blocked, an ordered pipeline of
//! strategies tries to get the script going again. Every attempt is
//! recorded as a [`RecoveryEvent`] and keyed so that a tester can accept or
//! reject it; the [`KnowledgeBase`] carries those decisions into later runs.

mod pipeline;
mod strategies;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64_hex;
use crate::maintainer::{PatchKind, PatchPayload, PatchTarget, ScriptPatch};
use crate::repo::{AttrKey, Attributes, Repository};

pub use pipeline::{
    attempt_recovery, try_step, Blocked, RecoveryContext, RecoveryOutcome, StepAttempt,
};
pub use strategies::{
    classify_login_page, detect_and_resolve_popup, explore_adjacent, fill_required_fields,
    navigation_buttons, refresh_retry, relogin, CandidateFilter, PopupResolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    ObjectNotFound,
    BlockedByPopup,
    GuardUnsatisfied,
    LoadFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    PopupResolution,
    FillRequiredField,
    FuzzyRebind,
    RefreshRetry,
    Relogin,
    AdjacentExploration,
    Custom,
}

impl Strategy {
    pub const DEFAULT_ORDER: [Strategy; 7] = [
        Strategy::PopupResolution,
        Strategy::FillRequiredField,
        Strategy::FuzzyRebind,
        Strategy::RefreshRetry,
        Strategy::Relogin,
        Strategy::AdjacentExploration,
        Strategy::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PopupResolution => "popup_resolution",
            Strategy::FillRequiredField => "fill_required_field",
            Strategy::FuzzyRebind => "fuzzy_rebind",
            Strategy::RefreshRetry => "refresh_retry",
            Strategy::Relogin => "relogin",
            Strategy::AdjacentExploration => "adjacent_exploration",
            Strategy::Custom => "custom",
        }
    }

    /// Triggers the strategy may respond to.
    pub fn applies_to(self, trigger: TriggerKind) -> bool {
        use TriggerKind::*;
        match self {
            Strategy::PopupResolution => trigger == BlockedByPopup,
            Strategy::FillRequiredField => trigger == GuardUnsatisfied,
            Strategy::FuzzyRebind | Strategy::Relogin | Strategy::AdjacentExploration => {
                trigger == ObjectNotFound
            }
            Strategy::RefreshRetry => trigger == LoadFailure,
            Strategy::Custom => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOutcome {
    Resumed,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDecision {
    Pending,
    Accepted,
    Rejected,
}

impl From<Decision> for EventDecision {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Accepted => EventDecision::Accepted,
            Decision::Rejected => EventDecision::Rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledField {
    pub object: String,
    pub name: String,
    pub value: String,
}

/// What a strategy did. Only the identifying part (see [`RecoveryDetail::identity`])
/// feeds the decision key; scores and counters are diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryDetail {
    PopupResolution {
        popup_id: String,
        title: String,
        body_text: String,
        button: Option<String>,
        matched_definition: Option<String>,
        learned: bool,
    },
    FillRequiredField {
        fields: Vec<FilledField>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    FuzzyRebind {
        logical_name: String,
        screen: String,
        candidate: String,
        candidate_attributes: Attributes,
        score: f64,
        runner_up: Option<(String, f64)>,
    },
    RefreshRetry {
        screen: String,
        attempts: u32,
        max_attempts: u32,
    },
    Relogin {
        screen: String,
        username: String,
        landed_on: String,
    },
    AdjacentExploration {
        logical_name: String,
        path: Vec<String>,
        screen: String,
        candidate: String,
        candidate_attributes: Attributes,
        score: f64,
    },
    Custom {
        action: String,
        steps: usize,
    },
}

impl RecoveryDetail {
    pub fn strategy(&self) -> Strategy {
        match self {
            RecoveryDetail::PopupResolution { .. } => Strategy::PopupResolution,
            RecoveryDetail::FillRequiredField { .. } => Strategy::FillRequiredField,
            RecoveryDetail::FuzzyRebind { .. } => Strategy::FuzzyRebind,
            RecoveryDetail::RefreshRetry { .. } => Strategy::RefreshRetry,
            RecoveryDetail::Relogin { .. } => Strategy::Relogin,
            RecoveryDetail::AdjacentExploration { .. } => Strategy::AdjacentExploration,
            RecoveryDetail::Custom { .. } => Strategy::Custom,
        }
    }

    /// The fields that identify this adaptation, independent of scores.
    pub fn identity(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            RecoveryDetail::PopupResolution {
                popup_id, button, ..
            } => {
                json!({"popup_id": popup_id, "button": button})
            }
            RecoveryDetail::FillRequiredField { fields, .. } => json!({
                "fields": fields.iter().map(|f| json!([f.object, f.value])).collect::<Vec<_>>()
            }),
            RecoveryDetail::FuzzyRebind {
                logical_name,
                screen,
                candidate,
                ..
            } => {
                json!({"logical_name": logical_name, "screen": screen, "candidate": candidate})
            }
            RecoveryDetail::RefreshRetry { screen, .. } => json!({"screen": screen}),
            RecoveryDetail::Relogin {
                screen, username, ..
            } => {
                json!({"screen": screen, "username": username})
            }
            RecoveryDetail::AdjacentExploration {
                logical_name,
                path,
                candidate,
                ..
            } => {
                json!({"logical_name": logical_name, "path": path, "candidate": candidate})
            }
            RecoveryDetail::Custom { action, .. } => json!({"action": action}),
        }
    }

    /// Compact JSON of [`Self::identity`] with lexicographically sorted keys.
    pub fn canonical(&self) -> String {
        self.identity().to_string()
    }

    pub fn summary(&self) -> String {
        match self {
            RecoveryDetail::PopupResolution {
                popup_id, button, ..
            } => match button {
                Some(b) => format!("popup `{popup_id}` closed with `{b}`"),
                None => format!("popup `{popup_id}` has no dismissal button"),
            },
            RecoveryDetail::FillRequiredField { fields, error } => {
                let list: Vec<String> = fields
                    .iter()
                    .map(|f| format!("{}={:?}", f.name, f.value))
                    .collect();
                match error {
                    Some(e) => format!("could not fill: {e}"),
                    None => format!("filled {}", list.join(", ")),
                }
            }
            RecoveryDetail::FuzzyRebind {
                logical_name,
                candidate,
                score,
                ..
            } => {
                format!("`{logical_name}` rebound to `{candidate}` (score {score:.4})")
            }
            RecoveryDetail::RefreshRetry {
                screen,
                attempts,
                max_attempts,
            } => {
                format!("refreshed `{screen}` {attempts}/{max_attempts} time(s)")
            }
            RecoveryDetail::Relogin {
                username,
                landed_on,
                ..
            } => {
                format!("logged in as `{username}`, now on `{landed_on}`")
            }
            RecoveryDetail::AdjacentExploration {
                logical_name,
                path,
                candidate,
                screen,
                ..
            } => {
                format!(
                    "found `{logical_name}` as `{candidate}` on `{screen}` via [{}]",
                    path.join(" > ")
                )
            }
            RecoveryDetail::Custom { action, steps } => {
                format!("custom action `{action}` ({steps} steps)")
            }
        }
    }
}

pub fn decision_key(script_id: &str, step: usize, detail: &RecoveryDetail) -> String {
    format!(
        "{script_id}:{step}:{}:{}",
        detail.strategy(),
        fnv1a64_hex(detail.canonical().as_bytes())
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEvent {
    pub script_id: String,
    pub step: usize,
    pub trigger: TriggerKind,
    pub strategy: Strategy,
    pub detail: RecoveryDetail,
    pub outcome: EventOutcome,
    pub decision: EventDecision,
    pub decision_key: String,
    /// Not attempted because the tester rejected this adaptation before.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionSource {
    Builtin,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopupDefinition {
    pub id: String,
    pub title_pattern: String,
    pub text_pattern: String,
    pub resolution_button: String,
    pub source: DefinitionSource,
    pub confidence: f64,
}

/// Match condition for a custom action; every given field must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenPredicate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title_contains: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub has_object: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomStep {
    pub verb: crate::model::ActionVerb,
    /// Object name (or screen id / popup button for non-object verbs).
    #[serde(default)]
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomAction {
    pub name: String,
    pub screen: ScreenPredicate,
    /// Triggers the action responds to; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<TriggerKind>,
    pub actions: Vec<CustomStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeBase {
    pub popup_definitions: Vec<PopupDefinition>,
    pub decisions: BTreeMap<String, Decision>,
    pub custom_actions: Vec<CustomAction>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::builtin()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("invalid knowledge base: {0}")]
    Parse(String),
    #[error("unknown decision key `{0}`")]
    UnknownKey(String),
}

impl KnowledgeBase {
    pub fn empty() -> Self {
        KnowledgeBase {
            popup_definitions: vec![],
            decisions: BTreeMap::new(),
            custom_actions: vec![],
        }
    }

    /// Definitions for commonly seen interruptions.
    pub fn builtin() -> Self {
        let def = |id: &str, title: &str, text: &str, button: &str| PopupDefinition {
            id: id.into(),
            title_pattern: title.into(),
            text_pattern: text.into(),
            resolution_button: button.into(),
            source: DefinitionSource::Builtin,
            confidence: 1.0,
        };
        KnowledgeBase {
            popup_definitions: vec![
                def(
                    "builtin-certificate",
                    "Security Certificate Expired",
                    "The security certificate for this site has expired",
                    "Accept",
                ),
                def(
                    "builtin-terms",
                    "Terms and Conditions Updated",
                    "Please accept the updated terms and conditions to continue",
                    "Accept",
                ),
                def(
                    "builtin-duplicate-payment",
                    "Duplicate Payment",
                    "A payment was recently made with the same credit card",
                    "Continue",
                ),
                def(
                    "builtin-session-warning",
                    "Session Warning",
                    "Your session is about to expire",
                    "OK",
                ),
            ],
            decisions: BTreeMap::new(),
            custom_actions: vec![],
        }
    }

    pub fn load(document: &str) -> Result<Self, RecoveryError> {
        let kb: KnowledgeBase =
            serde_json::from_str(document).map_err(|e| RecoveryError::Parse(e.to_string()))?;
        if let Some(d) = kb
            .popup_definitions
            .iter()
            .find(|d| d.resolution_button.is_empty() || !(0.0..=1.0).contains(&d.confidence))
        {
            return Err(RecoveryError::Parse(format!(
                "popup definition `{}` is invalid",
                d.id
            )));
        }
        Ok(kb)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("kb serializes");
        s.push('\n');
        s
    }

    pub fn decision(&self, key: &str) -> Option<Decision> {
        self.decisions.get(key).copied()
    }

    pub fn is_rejected(&self, key: &str) -> bool {
        self.decision(key) == Some(Decision::Rejected)
    }

    fn upsert_definition(&mut self, def: PopupDefinition) {
        match self.popup_definitions.iter_mut().find(|d| d.id == def.id) {
            Some(existing) => *existing = def,
            None => self.popup_definitions.push(def),
        }
    }
}

/// Id of the definition learned from an unknown popup.
pub fn learned_definition_id(popup_id: &str) -> String {
    format!("learned-{popup_id}")
}

/// Stores a tester decision about `event`. Accepting a fuzzy rebind yields a
/// repository patch making the new binding permanent; accepting a popup
/// resolution raises its definition to full confidence.
///
/// `events` are the reported events; the key must belong to one of them.
pub fn record_decision(
    kb: &KnowledgeBase,
    events: &[RecoveryEvent],
    key: &str,
    decision: Decision,
    repo: &Repository,
) -> Result<(KnowledgeBase, Option<ScriptPatch>), RecoveryError> {
    let event = events
        .iter()
        .find(|e| e.decision_key == key)
        .ok_or_else(|| RecoveryError::UnknownKey(key.to_string()))?;
    let mut kb = kb.clone();
    kb.decisions.insert(event.decision_key.clone(), decision);
    let mut patch = None;
    match (&event.detail, decision) {
        (
            RecoveryDetail::FuzzyRebind {
                logical_name,
                candidate_attributes,
                ..
            }
            | RecoveryDetail::AdjacentExploration {
                logical_name,
                candidate_attributes,
                ..
            },
            Decision::Accepted,
        ) => {
            if let Some(d) = repo.get(logical_name) {
                let keys: Vec<AttrKey> = d.attributes.keys();
                let attrs = restrict(candidate_attributes, &keys);
                // e.g. a descriptor naming a parent the candidate does not have
                let remove: Vec<AttrKey> =
                    keys.iter().copied().filter(|k| !attrs.has(*k)).collect();
                patch = Some(ScriptPatch::new(
                    PatchKind::UpdateRepoDescriptor,
                    PatchTarget::Logical {
                        logical_name: logical_name.clone(),
                    },
                    PatchPayload::Descriptor {
                        attributes: attrs,
                        remove,
                    },
                    format!(
                        "tester accepted rebinding `{logical_name}` during `{}` step {}",
                        event.script_id, event.step
                    ),
                ));
            }
        }
        (
            RecoveryDetail::PopupResolution {
                popup_id,
                title,
                body_text,
                button: Some(button),
                matched_definition,
                ..
            },
            _,
        ) => {
            let confidence = if decision == Decision::Accepted {
                1.0
            } else {
                0.0
            };
            let id = matched_definition
                .clone()
                .unwrap_or_else(|| learned_definition_id(popup_id));
            match kb.popup_definitions.iter_mut().find(|d| d.id == id) {
                Some(d) => d.confidence = confidence,
                None => kb.upsert_definition(PopupDefinition {
                    id,
                    title_pattern: title.clone(),
                    text_pattern: body_text.clone(),
                    resolution_button: button.clone(),
                    source: DefinitionSource::Learned,
                    confidence,
                }),
            }
        }
        _ => {}
    }
    Ok((kb, patch))
}

fn restrict(a: &Attributes, keys: &[AttrKey]) -> Attributes {
    let mut out = Attributes::default();
    for k in keys {
        match k {
            AttrKey::Name => out.name = a.name.clone(),
            AttrKey::ObjType => out.obj_type = a.obj_type,
            AttrKey::ParentName => out.parent_name = a.parent_name.clone(),
            AttrKey::Text => out.text = a.text.clone(),
            AttrKey::Position => out.position = a.position,
            AttrKey::Size => out.size = a.size,
        }
    }
    out
}

/// Tunables for the strategy pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    pub strategy_order: Vec<Strategy>,
    pub credentials: Option<Credentials>,
    pub dismissal_lexicon: Vec<String>,
    pub navigation_lexicon: Vec<String>,
    pub popup_match_threshold: f64,
    pub min_popup_confidence: f64,
    pub learned_popup_confidence: f64,
    pub refresh_max_attempts: u32,
    pub explore_max_depth: usize,
    pub max_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        let words = |w: &[&str]| w.iter().map(|s| s.to_string()).collect();
        RecoveryConfig {
            strategy_order: Strategy::DEFAULT_ORDER.to_vec(),
            credentials: None,
            dismissal_lexicon: words(&["OK", "Close", "Dismiss", "Accept", "Cancel", "No thanks"]),
            navigation_lexicon: words(&["Next", ">", "Continue", "Previous", "<", "Back"]),
            popup_match_threshold: 0.8,
            min_popup_confidence: 0.5,
            learned_popup_confidence: 0.5,
            refresh_max_attempts: 3,
            explore_max_depth: 2,
            max_passes: 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rebind_detail(candidate: &str) -> RecoveryDetail {
        RecoveryDetail::FuzzyRebind {
            logical_name: "CitiesDropDown".into(),
            screen: "home".into(),
            candidate: candidate.into(),
            candidate_attributes: Attributes {
                name: Some("CitiesList".into()),
                ..Default::default()
            },
            score: 0.8,
            runner_up: None,
        }
    }

    #[test]
    fn key_depends_on_identity_not_score() {
        let a = rebind_detail("cities");
        let mut b = a.clone();
        if let RecoveryDetail::FuzzyRebind { score, .. } = &mut b {
            *score = 0.9;
        }
        assert_eq!(decision_key("s", 2, &a), decision_key("s", 2, &b));
        assert_ne!(
            decision_key("s", 2, &a),
            decision_key("s", 2, &rebind_detail("other"))
        );
        let key = decision_key("s", 2, &a);
        assert!(key.starts_with("s:2:fuzzy_rebind:"));
        assert_eq!(key.rsplit(':').next().unwrap().len(), 16);
    }

    #[test]
    fn canonical_detail_has_sorted_keys() {
        assert_eq!(
            rebind_detail("cities").canonical(),
            r#"{"candidate":"cities","logical_name":"CitiesDropDown","screen":"home"}"#
        );
    }

    #[test]
    fn kb_round_trip() {
        let mut kb = KnowledgeBase::builtin();
        kb.decisions
            .insert("a:1:relogin:0000000000000000".into(), Decision::Rejected);
        let back = KnowledgeBase::load(&kb.to_json()).unwrap();
        assert_eq!(back, kb);
        assert_eq!(KnowledgeBase::load("{}").unwrap(), KnowledgeBase::builtin());
    }

    #[test]
    fn accepting_learned_popup_raises_confidence() {
        let detail = RecoveryDetail::PopupResolution {
            popup_id: "promo".into(),
            title: "Promo".into(),
            body_text: "Buy now".into(),
            button: Some("OK".into()),
            matched_definition: None,
            learned: true,
        };
        let event = RecoveryEvent {
            script_id: "s".into(),
            step: 1,
            trigger: TriggerKind::BlockedByPopup,
            strategy: Strategy::PopupResolution,
            decision_key: decision_key("s", 1, &detail),
            detail,
            outcome: EventOutcome::Resumed,
            decision: EventDecision::Pending,
            skipped: false,
        };
        let repo = Repository::new("1");
        let (kb, patch) = record_decision(
            &KnowledgeBase::empty(),
            std::slice::from_ref(&event),
            &event.decision_key,
            Decision::Accepted,
            &repo,
        )
        .unwrap();
        assert_eq!(
            record_decision(
                &kb,
                std::slice::from_ref(&event),
                "nope",
                Decision::Accepted,
                &repo
            ),
            Err(RecoveryError::UnknownKey("nope".into()))
        );
        assert!(patch.is_none());
        assert_eq!(kb.popup_definitions[0].confidence, 1.0);
        assert_eq!(kb.popup_definitions[0].source, DefinitionSource::Learned);
        assert_eq!(kb.decision(&event.decision_key), Some(Decision::Accepted));
    }

    #[test]
    fn applicability_table() {
        assert!(Strategy::PopupResolution.applies_to(TriggerKind::BlockedByPopup));
        assert!(!Strategy::PopupResolution.applies_to(TriggerKind::ObjectNotFound));
        assert!(Strategy::FillRequiredField.applies_to(TriggerKind::GuardUnsatisfied));
        assert!(!Strategy::RefreshRetry.applies_to(TriggerKind::GuardUnsatisfied));
        assert!(Strategy::Custom.applies_to(TriggerKind::LoadFailure));
    }
}
