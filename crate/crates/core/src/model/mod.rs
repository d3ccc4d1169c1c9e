//! The simulated application under test.
//!
//! An [`AppModel`] is a set of screens holding attributed UI objects, the
//! transitions between screens, popups that interrupt the flow, and
//! flaky-load settings. Models are immutable once loaded; a [`SimSession`]
//! executes actions against one.

mod mutation;
mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mutation::{apply_mutation, load_mutations, MutationError, MutationOp};
pub use session::{
    start_session, Action, ActionOutcome, ActionVerb, ObjectView, PopupView, ScreenView,
    SimSession, Snapshot,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjType {
    Button,
    Textfield,
    PasswordField,
    Listbox,
    Combobox,
    Checkbox,
    Link,
    Label,
}

impl ObjType {
    pub const ALL: [ObjType; 8] = [
        ObjType::Button,
        ObjType::Textfield,
        ObjType::PasswordField,
        ObjType::Listbox,
        ObjType::Combobox,
        ObjType::Checkbox,
        ObjType::Link,
        ObjType::Label,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjType::Button => "button",
            ObjType::Textfield => "textfield",
            ObjType::PasswordField => "password_field",
            ObjType::Listbox => "listbox",
            ObjType::Combobox => "combobox",
            ObjType::Checkbox => "checkbox",
            ObjType::Link => "link",
            ObjType::Label => "label",
        }
    }

    pub fn has_options(self) -> bool {
        matches!(self, ObjType::Listbox | ObjType::Combobox)
    }

    /// Objects a user types into, picks from, or ticks.
    pub fn is_input(self) -> bool {
        matches!(
            self,
            ObjType::Textfield
                | ObjType::PasswordField
                | ObjType::Listbox
                | ObjType::Combobox
                | ObjType::Checkbox
        )
    }
}

impl fmt::Display for ObjType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UiObject {
    pub id: String,
    pub name: String,
    pub obj_type: ObjType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default)]
    pub text: String,
    pub position: (i64, i64),
    pub size: (u32, u32),
    #[serde(default, skip_serializing_if = "is_false")]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub enabled: bool,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub object: String,
    pub action: ActionVerb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub trigger: Trigger,
    pub target: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub id: String,
    pub title: String,
    pub dimensions: (u32, u32),
    #[serde(default)]
    pub objects: Vec<UiObject>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_loading_stub: bool,
    /// Entering this screen while logged out redirects to the login screen.
    #[serde(default, skip_serializing_if = "is_false")]
    pub requires_login: bool,
}

impl Screen {
    pub fn object(&self, id: &str) -> Option<&UiObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut UiObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    /// Name of the parent object of `obj`, if it has one on this screen.
    pub fn parent_name(&self, obj: &UiObject) -> Option<&str> {
        obj.parent_id
            .as_deref()
            .and_then(|pid| self.object(pid))
            .map(|p| p.name.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButtonEffect {
    Dismiss,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopupButton {
    pub text: String,
    pub effect: ButtonEffect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopupTrigger {
    pub screen: String,
    pub fire_on_nth_action: u32,
    #[serde(default = "default_true")]
    pub one_shot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopupSpec {
    pub id: String,
    pub title: String,
    pub body_text: String,
    pub buttons: Vec<PopupButton>,
    pub trigger: PopupTrigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LoadFailure {
    pub probability: f64,
    #[serde(default)]
    pub screens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginScreen {
    pub screen: String,
    pub username_field: String,
    pub password_field: String,
    pub submit: String,
    /// Credentials the application accepts.
    pub username: String,
    pub password: String,
    /// Where a successful login lands when no redirect is pending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landing: Option<String>,
    /// The login lapses after this many actions; models session expiry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_after_actions: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppModel {
    pub version: String,
    pub start_screen: String,
    pub screens: Vec<Screen>,
    #[serde(default)]
    pub popups: Vec<PopupSpec>,
    #[serde(default)]
    pub load_failure: LoadFailure,
    #[serde(default)]
    pub login_screen: Option<LoginScreen>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unresolved reference to `{id}` ({context})")]
    Reference { id: String, context: String },
    #[error("invalid model: {0}")]
    Invariant(String),
}

/// Parses and validates a model document.
pub fn load_model(document: &str) -> Result<AppModel, ModelError> {
    let model: AppModel = serde_json::from_str(document).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    model.validate()?;
    Ok(model)
}

impl AppModel {
    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn screen_mut(&mut self, id: &str) -> Option<&mut Screen> {
        self.screens.iter_mut().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Checks every structural invariant and cross-reference.
    pub fn validate(&self) -> Result<(), ModelError> {
        let reference = |id: &str, context: String| ModelError::Reference {
            id: id.to_string(),
            context,
        };
        let mut screen_ids = BTreeSet::new();
        for s in &self.screens {
            if !screen_ids.insert(s.id.as_str()) {
                return Err(ModelError::Invariant(format!(
                    "duplicate screen id `{}`",
                    s.id
                )));
            }
        }
        if !screen_ids.contains(self.start_screen.as_str()) {
            return Err(reference(&self.start_screen, "start_screen".into()));
        }
        for s in &self.screens {
            if s.dimensions.0 == 0 || s.dimensions.1 == 0 {
                return Err(ModelError::Invariant(format!(
                    "screen `{}` has zero dimension",
                    s.id
                )));
            }
            let mut ids = BTreeSet::new();
            for o in &s.objects {
                if !ids.insert(o.id.as_str()) {
                    return Err(ModelError::Invariant(format!(
                        "duplicate object id `{}` on screen `{}`",
                        o.id, s.id
                    )));
                }
                if o.size.0 == 0 || o.size.1 == 0 {
                    return Err(ModelError::Invariant(format!(
                        "object `{}` has zero size",
                        o.id
                    )));
                }
                if o.obj_type.has_options() == o.options.is_empty() {
                    return Err(ModelError::Invariant(format!(
                        "object `{}`: options must be non-empty exactly for listbox/combobox",
                        o.id
                    )));
                }
            }
            for o in &s.objects {
                if let Some(pid) = &o.parent_id {
                    if !ids.contains(pid.as_str()) {
                        return Err(reference(
                            pid,
                            format!("parent of `{}` on `{}`", o.id, s.id),
                        ));
                    }
                }
            }
            for t in &s.transitions {
                if !ids.contains(t.trigger.object.as_str()) {
                    return Err(reference(
                        &t.trigger.object,
                        format!("transition trigger on `{}`", s.id),
                    ));
                }
                if !screen_ids.contains(t.target.as_str()) {
                    return Err(reference(
                        &t.target,
                        format!("transition target from `{}`", s.id),
                    ));
                }
                for g in &t.guards {
                    if !ids.contains(g.as_str()) {
                        return Err(reference(g, format!("transition guard on `{}`", s.id)));
                    }
                }
            }
        }
        for p in &self.popups {
            if p.buttons.is_empty() {
                return Err(ModelError::Invariant(format!(
                    "popup `{}` has no buttons",
                    p.id
                )));
            }
            let dismiss = p
                .buttons
                .iter()
                .filter(|b| b.effect == ButtonEffect::Dismiss)
                .count();
            if dismiss != 1 {
                return Err(ModelError::Invariant(format!(
                    "popup `{}` must have exactly one dismiss button",
                    p.id
                )));
            }
            if p.trigger.fire_on_nth_action == 0 {
                return Err(ModelError::Invariant(format!(
                    "popup `{}`: fire_on_nth_action must be positive",
                    p.id
                )));
            }
            if !screen_ids.contains(p.trigger.screen.as_str()) {
                return Err(reference(
                    &p.trigger.screen,
                    format!("trigger of popup `{}`", p.id),
                ));
            }
        }
        let p = self.load_failure.probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::Invariant(format!(
                "load_failure probability {p} not in [0,1]"
            )));
        }
        for s in &self.load_failure.screens {
            if !screen_ids.contains(s.as_str()) {
                return Err(reference(s, "load_failure screens".into()));
            }
        }
        if let Some(login) = &self.login_screen {
            let screen = self
                .screen(&login.screen)
                .ok_or_else(|| reference(&login.screen, "login_screen".into()))?;
            for field in [&login.username_field, &login.password_field, &login.submit] {
                if screen.object(field).is_none() {
                    return Err(reference(field, "login_screen field".into()));
                }
            }
            if let Some(landing) = &login.landing {
                if !screen_ids.contains(landing.as_str()) {
                    return Err(reference(landing, "login landing".into()));
                }
            }
        } else if let Some(s) = self.screens.iter().find(|s| s.requires_login) {
            return Err(ModelError::Invariant(format!(
                "screen `{}` requires login but the model has no login_screen",
                s.id
            )));
        }
        Ok(())
    }

    /// Screen ids reachable from the start screen through transitions.
    pub fn reachable_screens(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = std::collections::VecDeque::from([self.start_screen.clone()]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id.clone()) {
                continue;
            }
            if let Some(s) = self.screen(&id) {
                for t in &s.transitions {
                    if !seen.contains(&t.target) {
                        queue.push_back(t.target.clone());
                    }
                }
            }
        }
        seen
    }

    /// A session-free view of a screen: every visible object with empty values.
    pub fn static_view(&self, screen_id: &str) -> Option<ScreenView> {
        let screen = self.screen(screen_id)?;
        Some(ScreenView::of_screen(
            screen,
            &BTreeMap::new(),
            None,
            false,
            false,
        ))
    }
}

/// Increments the trailing integer of a version string (`v1` → `v2`);
/// versions without one gain a `.1` suffix.
pub fn bump_version(version: &str) -> String {
    let digits = version
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .count();
    if digits == 0 {
        return format!("{version}.1");
    }
    let (head, tail) = version.split_at(version.len() - digits);
    match tail.parse::<u64>() {
        Ok(n) => format!("{head}{}", n + 1),
        Err(_) => format!("{version}.1"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": "v1",
        "start_screen": "home",
        "screens": [
            {"id": "home", "title": "Home", "dimensions": [800, 600],
             "objects": [{"id": "ok", "name": "OKButton", "obj_type": "button",
                          "text": "OK", "position": [10, 10], "size": [80, 20]}]}
        ]
    }"#;

    #[test]
    fn loads_minimal_model() {
        let m = load_model(MINIMAL).unwrap();
        assert_eq!(m.screens.len(), 1);
        assert_eq!(m.screens[0].objects.len(), 1);
        assert!(m.screens[0].objects[0].enabled);
    }

    #[test]
    fn dangling_transition_target_is_named() {
        let doc = MINIMAL.replace(
            r#""size": [80, 20]}]"#,
            r#""size": [80, 20]}],
               "transitions": [{"trigger": {"object": "ok", "action": "click"}, "target": "X"}]"#,
        );
        match load_model(&doc) {
            Err(ModelError::Reference { id, .. }) => assert_eq!(id, "X"),
            other => panic!("expected reference error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_location() {
        match load_model("{\n  \"version\": \n}") {
            Err(ModelError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn options_required_for_lists_only() {
        let doc = MINIMAL.replace(r#""obj_type": "button""#, r#""obj_type": "listbox""#);
        assert!(matches!(load_model(&doc), Err(ModelError::Invariant(_))));
    }

    #[test]
    fn probability_out_of_range_rejected() {
        let doc = MINIMAL.replacen(
            r#""start_screen": "home","#,
            r#""start_screen": "home", "load_failure": {"probability": 1.5, "screens": ["home"]},"#,
            1,
        );
        assert!(matches!(load_model(&doc), Err(ModelError::Invariant(_))));
    }

    #[test]
    fn serialization_round_trips() {
        let m = load_model(MINIMAL).unwrap();
        assert_eq!(load_model(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn version_bumping() {
        assert_eq!(bump_version("v1"), "v2");
        assert_eq!(bump_version("v19"), "v20");
        assert_eq!(bump_version("release"), "release.1");
    }
}
