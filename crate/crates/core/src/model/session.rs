use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AppModel, ButtonEffect, ObjType, PopupSpec, Screen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVerb {
    Click,
    Enter,
    Select,
    Check,
    Open,
    Refresh,
    PopupClick,
}

impl ActionVerb {
    /// Object types the verb can act on; `None` for verbs without an object.
    pub fn accepts(self, t: ObjType) -> Option<bool> {
        use ObjType::*;
        let ok = match self {
            ActionVerb::Click => matches!(t, Button | Link | Checkbox),
            ActionVerb::Enter => matches!(t, Textfield | PasswordField),
            ActionVerb::Select => matches!(t, Listbox | Combobox),
            ActionVerb::Check => t == Checkbox,
            ActionVerb::Open | ActionVerb::Refresh | ActionVerb::PopupClick => return None,
        };
        Some(ok)
    }
}

/// One user action. `target` is an object id for object verbs, a screen id
/// for `open`, a button label for `popup_click`, and ignored for `refresh`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub verb: ActionVerb,
    #[serde(default)]
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Action {
    pub fn new(verb: ActionVerb, target: impl Into<String>, value: Option<String>) -> Self {
        Action {
            verb,
            target: target.into(),
            value,
        }
    }

    pub fn click(target: impl Into<String>) -> Self {
        Action::new(ActionVerb::Click, target, None)
    }

    pub fn enter(target: impl Into<String>, value: impl Into<String>) -> Self {
        Action::new(ActionVerb::Enter, target, Some(value.into()))
    }

    pub fn select(target: impl Into<String>, value: impl Into<String>) -> Self {
        Action::new(ActionVerb::Select, target, Some(value.into()))
    }

    pub fn open(screen: impl Into<String>) -> Self {
        Action::new(ActionVerb::Open, screen, None)
    }

    pub fn refresh() -> Self {
        Action::new(ActionVerb::Refresh, "", None)
    }

    pub fn popup_click(button: impl Into<String>) -> Self {
        Action::new(ActionVerb::PopupClick, button, None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ActionOutcome {
    Ok,
    NoSuchObject,
    BlockedByPopup,
    GuardUnsatisfied { unmet: Vec<String> },
    LoadFailure,
    InvalidAction { reason: String },
}

impl ActionOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, ActionOutcome::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: String,
    pub name: String,
    pub obj_type: ObjType,
    pub parent_id: Option<String>,
    pub parent_name: Option<String>,
    pub text: String,
    pub position: (i64, i64),
    pub size: (u32, u32),
    pub required: bool,
    pub options: Vec<String>,
    pub value: String,
    pub enabled: bool,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopupView {
    pub id: String,
    pub title: String,
    pub body_text: String,
    pub buttons: Vec<String>,
}

/// What the current page exposes to a test driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenView {
    pub screen_id: String,
    pub title: String,
    pub dimensions: (u32, u32),
    pub loading: bool,
    pub logged_in: bool,
    pub popup: Option<PopupView>,
    pub objects: Vec<ObjectView>,
}

impl ScreenView {
    pub(crate) fn of_screen(
        screen: &Screen,
        values: &BTreeMap<String, String>,
        popup: Option<&PopupSpec>,
        loading: bool,
        logged_in: bool,
    ) -> ScreenView {
        let blocked = popup.is_some();
        let objects = if loading {
            Vec::new()
        } else {
            screen
                .objects
                .iter()
                .filter(|o| o.visible)
                .map(|o| ObjectView {
                    id: o.id.clone(),
                    name: o.name.clone(),
                    obj_type: o.obj_type,
                    parent_id: o.parent_id.clone(),
                    parent_name: screen.parent_name(o).map(str::to_string),
                    text: o.text.clone(),
                    position: o.position,
                    size: o.size,
                    required: o.required,
                    options: o.options.clone(),
                    value: values.get(&o.id).cloned().unwrap_or_default(),
                    enabled: o.enabled,
                    blocked,
                })
                .collect()
        };
        ScreenView {
            screen_id: screen.id.clone(),
            title: screen.title.clone(),
            dimensions: screen.dimensions,
            loading,
            logged_in,
            popup: popup.map(|p| PopupView {
                id: p.id.clone(),
                title: p.title.clone(),
                body_text: p.body_text.clone(),
                buttons: p.buttons.iter().map(|b| b.text.clone()).collect(),
            }),
            objects,
        }
    }

    pub fn object(&self, id: &str) -> Option<&ObjectView> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("view serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SessionState {
    current_screen: String,
    /// screen id → object id → value
    values: BTreeMap<String, BTreeMap<String, String>>,
    active_popup: Option<String>,
    fired_popups: BTreeSet<String>,
    /// Stub screens already shown once; they load normally afterwards.
    stubs_shown: BTreeSet<String>,
    screen_actions: BTreeMap<String, u32>,
    action_counter: u64,
    rng: ChaCha8Rng,
    logged_in: bool,
    loading: bool,
    return_to: Option<String>,
    actions_since_login: u32,
}

/// Opaque copy of a session's full mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot(SessionState);

/// A single-threaded simulation run over a shared, immutable model.
#[derive(Debug, Clone)]
pub struct SimSession {
    model: Arc<AppModel>,
    state: SessionState,
}

pub fn start_session(model: Arc<AppModel>, seed: u64) -> SimSession {
    let state = SessionState {
        current_screen: model.start_screen.clone(),
        values: BTreeMap::new(),
        active_popup: None,
        fired_popups: BTreeSet::new(),
        stubs_shown: BTreeSet::new(),
        screen_actions: BTreeMap::new(),
        action_counter: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
        logged_in: false,
        loading: false,
        return_to: None,
        actions_since_login: 0,
    };
    let mut session = SimSession { model, state };
    let start = session.model.start_screen.clone();
    session.enter_screen(&start);
    session
}

impl SimSession {
    pub fn model(&self) -> &Arc<AppModel> {
        &self.model
    }

    pub fn current_screen(&self) -> &str {
        &self.state.current_screen
    }

    pub fn logged_in(&self) -> bool {
        self.state.logged_in
    }

    pub fn action_counter(&self) -> u64 {
        self.state.action_counter
    }

    pub fn has_popup(&self) -> bool {
        self.state.active_popup.is_some()
    }

    fn screen(&self) -> &Screen {
        self.model
            .screen(&self.state.current_screen)
            .expect("session screen exists in model")
    }

    fn popup(&self) -> Option<&PopupSpec> {
        let id = self.state.active_popup.as_ref()?;
        self.model.popups.iter().find(|p| &p.id == id)
    }

    pub fn observe(&self) -> ScreenView {
        let empty = BTreeMap::new();
        let values = self
            .state
            .values
            .get(&self.state.current_screen)
            .unwrap_or(&empty);
        ScreenView::of_screen(
            self.screen(),
            values,
            self.popup(),
            self.state.loading,
            self.state.logged_in,
        )
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.state.clone())
    }

    pub fn restore(&mut self, snapshot: &Snapshot) {
        self.state = snapshot.0.clone();
    }

    /// Moves to `id`, applying the login redirect and drawing load failure.
    fn enter_screen(&mut self, id: &str) {
        let mut target = id.to_string();
        if let Some(login) = &self.model.login_screen {
            let requires = self.model.screen(id).is_some_and(|s| s.requires_login);
            if requires && !self.state.logged_in {
                self.state.return_to = Some(target);
                target = login.screen.clone();
            }
        }
        let screen = self.model.screen(&target).expect("validated target");
        let mut loading = screen.is_loading_stub && self.state.stubs_shown.insert(target.clone());
        let lf = &self.model.load_failure;
        if lf.screens.iter().any(|s| s == &target) {
            let draw: f64 = self.state.rng.gen();
            loading |= draw < lf.probability;
        }
        self.state.loading = loading;
        self.state.current_screen = target;
    }

    pub fn perform(&mut self, action: &Action) -> ActionOutcome {
        self.state.action_counter += 1;
        if action.verb == ActionVerb::PopupClick {
            return self.click_popup(&action.target);
        }
        if self.state.active_popup.is_some() {
            return ActionOutcome::BlockedByPopup;
        }
        match action.verb {
            ActionVerb::Refresh => {
                let current = self.state.current_screen.clone();
                self.enter_screen(&current);
                ActionOutcome::Ok
            }
            ActionVerb::Open => {
                if self.model.screen(&action.target).is_none() {
                    return ActionOutcome::NoSuchObject;
                }
                self.enter_screen(&action.target);
                if self.state.loading {
                    ActionOutcome::LoadFailure
                } else {
                    ActionOutcome::Ok
                }
            }
            _ => self.act_on_object(action),
        }
    }

    fn click_popup(&mut self, label: &str) -> ActionOutcome {
        let Some(popup) = self.popup() else {
            return ActionOutcome::InvalidAction {
                reason: "no popup is open".into(),
            };
        };
        let Some(button) = popup.buttons.iter().find(|b| b.text == label) else {
            return ActionOutcome::NoSuchObject;
        };
        let effect = button.effect;
        self.state.active_popup = None;
        if effect == ButtonEffect::Abort {
            let start = self.model.start_screen.clone();
            self.enter_screen(&start);
        }
        ActionOutcome::Ok
    }

    fn act_on_object(&mut self, action: &Action) -> ActionOutcome {
        if self.state.loading {
            return ActionOutcome::LoadFailure;
        }
        let model = Arc::clone(&self.model);
        let screen_id = self.state.current_screen.clone();
        let screen = model.screen(&screen_id).expect("validated screen");
        let Some(obj) = screen.object(&action.target).filter(|o| o.visible) else {
            return ActionOutcome::NoSuchObject;
        };
        if !obj.enabled {
            return ActionOutcome::InvalidAction {
                reason: format!("`{}` is disabled", obj.id),
            };
        }
        if action.verb.accepts(obj.obj_type) != Some(true) {
            return ActionOutcome::InvalidAction {
                reason: format!("cannot {:?} a {}", action.verb, obj.obj_type),
            };
        }
        let value = action.value.clone().unwrap_or_default();
        let new_value = match action.verb {
            ActionVerb::Enter => Some(value),
            ActionVerb::Select => {
                if obj.obj_type == ObjType::Listbox && !obj.options.contains(&value) {
                    return ActionOutcome::InvalidAction {
                        reason: format!("`{value}` is not an option of `{}`", obj.id),
                    };
                }
                Some(value)
            }
            ActionVerb::Check => match value.to_ascii_lowercase().as_str() {
                "on" | "true" | "yes" | "1" => Some("on".to_string()),
                "off" | "false" | "no" | "0" => Some(String::new()),
                _ => {
                    return ActionOutcome::InvalidAction {
                        reason: format!("check expects on/off, got `{value}`"),
                    }
                }
            },
            ActionVerb::Click if obj.obj_type == ObjType::Checkbox => {
                let on = self.value_of(&screen_id, &obj.id).is_empty();
                Some(if on { "on".to_string() } else { String::new() })
            }
            _ => None,
        };
        if let Some(v) = new_value {
            self.state
                .values
                .entry(screen_id.clone())
                .or_default()
                .insert(obj.id.clone(), v);
        }

        let transition = screen
            .transitions
            .iter()
            .find(|t| t.trigger.object == obj.id && t.trigger.action == action.verb);
        let login_submit = model
            .login_screen
            .as_ref()
            .filter(|l| l.screen == screen_id && l.submit == obj.id);

        let mut outcome = ActionOutcome::Ok;
        if let Some(t) = transition {
            let unmet: Vec<String> = t
                .guards
                .iter()
                .filter(|g| self.value_of(&screen_id, g).is_empty())
                .cloned()
                .collect();
            if !unmet.is_empty() {
                outcome = ActionOutcome::GuardUnsatisfied { unmet };
            }
        }
        if outcome.is_ok() {
            if let Some(login) = login_submit {
                if self.value_of(&screen_id, &login.username_field) == login.username
                    && self.value_of(&screen_id, &login.password_field) == login.password
                {
                    self.state.logged_in = true;
                    self.state.actions_since_login = 0;
                    let next = self
                        .state
                        .return_to
                        .take()
                        .or_else(|| transition.map(|t| t.target.clone()))
                        .or_else(|| login.landing.clone());
                    if let Some(next) = next {
                        self.enter_screen(&next);
                    }
                }
            } else if let Some(t) = transition {
                self.enter_screen(&t.target);
            }
            self.after_action(&screen_id);
        }
        outcome
    }

    fn value_of(&self, screen: &str, obj: &str) -> &str {
        self.state
            .values
            .get(screen)
            .and_then(|m| m.get(obj))
            .map(String::as_str)
            .unwrap_or("")
    }

    /// Counts a completed action on `acted_on`, fires popups, and ages the login.
    fn after_action(&mut self, acted_on: &str) {
        let count = {
            let c = self
                .state
                .screen_actions
                .entry(acted_on.to_string())
                .or_insert(0);
            *c += 1;
            *c
        };
        if self.state.active_popup.is_none() {
            let fired = self.model.popups.iter().find(|p| {
                p.trigger.screen == acted_on
                    && if p.trigger.one_shot {
                        count == p.trigger.fire_on_nth_action
                            && !self.state.fired_popups.contains(&p.id)
                    } else {
                        count % p.trigger.fire_on_nth_action == 0
                    }
            });
            if let Some(p) = fired {
                self.state.active_popup = Some(p.id.clone());
                self.state.fired_popups.insert(p.id.clone());
            }
        }
        let expiry = self
            .model
            .login_screen
            .as_ref()
            .and_then(|l| l.expires_after_actions);
        if let (true, Some(limit)) = (self.state.logged_in, expiry) {
            self.state.actions_since_login += 1;
            if self.state.actions_since_login >= limit {
                self.state.logged_in = false;
                if self.screen().requires_login {
                    let current = self.state.current_screen.clone();
                    self.enter_screen(&current);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;

    fn model(doc: &str) -> Arc<AppModel> {
        Arc::new(load_model(doc).unwrap())
    }

    const FORM: &str = r#"{
        "version": "v1", "start_screen": "form",
        "screens": [
          {"id": "form", "title": "Form", "dimensions": [800, 600],
           "objects": [
             {"id": "name", "name": "NameField", "obj_type": "textfield", "position": [10, 10], "size": [200, 20]},
             {"id": "kind", "name": "KindBox", "obj_type": "listbox", "position": [10, 40], "size": [200, 20], "options": ["A", "B"]},
             {"id": "go", "name": "GoButton", "obj_type": "button", "text": "Go", "position": [10, 80], "size": [60, 20]},
             {"id": "hint", "name": "Hint", "obj_type": "label", "text": "hi", "position": [10, 120], "size": [60, 20]}
           ],
           "transitions": [{"trigger": {"object": "go", "action": "click"}, "target": "done", "guards": ["name", "kind"]}]},
          {"id": "done", "title": "Done", "dimensions": [800, 600]}
        ],
        "popups": [
          {"id": "warn", "title": "Warning", "body_text": "Careful", "buttons": [{"text": "Later", "effect": "abort"}, {"text": "OK", "effect": "dismiss"}],
           "trigger": {"screen": "form", "fire_on_nth_action": 2, "one_shot": true}}
        ]
    }"#;

    #[test]
    fn guard_blocks_until_all_fields_set() {
        let mut s = start_session(model(FORM), 1);
        assert_eq!(
            s.perform(&Action::click("go")),
            ActionOutcome::GuardUnsatisfied {
                unmet: vec!["name".into(), "kind".into()]
            }
        );
        assert_eq!(
            s.perform(&Action::enter("name", "Alice")),
            ActionOutcome::Ok
        );
        assert_eq!(s.observe().object("name").unwrap().value, "Alice");
        // second counted action on the screen fires the popup
        assert_eq!(s.perform(&Action::select("kind", "B")), ActionOutcome::Ok);
        assert!(s.observe().popup.is_some());
        assert!(s.observe().objects.iter().all(|o| o.blocked));
        assert_eq!(
            s.perform(&Action::click("go")),
            ActionOutcome::BlockedByPopup
        );
        assert_eq!(s.perform(&Action::popup_click("OK")), ActionOutcome::Ok);
        assert_eq!(s.perform(&Action::click("go")), ActionOutcome::Ok);
        assert_eq!(s.current_screen(), "done");
        assert_eq!(s.action_counter(), 6);
    }

    #[test]
    fn invalid_verb_for_type() {
        let mut s = start_session(model(FORM), 1);
        assert!(matches!(
            s.perform(&Action::enter("go", "x")),
            ActionOutcome::InvalidAction { .. }
        ));
        assert!(matches!(
            s.perform(&Action::select("kind", "Z")),
            ActionOutcome::InvalidAction { .. }
        ));
        assert_eq!(
            s.perform(&Action::click("nope")),
            ActionOutcome::NoSuchObject
        );
    }

    #[test]
    fn abort_button_returns_to_start() {
        let mut s = start_session(model(FORM), 1);
        s.perform(&Action::enter("name", "a"));
        s.perform(&Action::enter("name", "b"));
        assert!(s.has_popup());
        assert_eq!(s.perform(&Action::popup_click("Later")), ActionOutcome::Ok);
        assert!(!s.has_popup());
        assert_eq!(s.current_screen(), "form");
    }

    #[test]
    fn snapshot_restores_popup_and_values() {
        let mut s = start_session(model(FORM), 3);
        s.perform(&Action::enter("name", "a"));
        s.perform(&Action::enter("name", "b"));
        let snap = s.snapshot();
        let before = s.observe();
        s.perform(&Action::popup_click("OK"));
        s.perform(&Action::select("kind", "A"));
        s.perform(&Action::click("go"));
        s.restore(&snap);
        assert_eq!(s.observe(), before);
        assert!(s.has_popup());
        s.restore(&snap);
        assert_eq!(s.snapshot(), snap);
    }

    #[test]
    fn stub_screen_hides_objects() {
        let doc = FORM.replace(
            r#""title": "Form","#,
            r#""title": "Form", "is_loading_stub": true,"#,
        );
        let mut s = start_session(model(&doc), 1);
        let v = s.observe();
        assert!(v.loading);
        assert!(v.objects.is_empty());
        assert_eq!(s.perform(&Action::click("go")), ActionOutcome::LoadFailure);
    }

    #[test]
    fn load_failure_certain_and_never() {
        let always = FORM.replacen(
            r#""start_screen": "form","#,
            r#""start_screen": "form", "load_failure": {"probability": 1.0, "screens": ["form"]},"#,
            1,
        );
        let mut s = start_session(model(&always), 1);
        assert!(s.observe().loading);
        s.perform(&Action::refresh());
        assert!(s.observe().loading);

        let never = always.replace(r#""probability": 1.0"#, r#""probability": 0.0"#);
        let s = start_session(model(&never), 1);
        assert!(!s.observe().loading);
    }
}
