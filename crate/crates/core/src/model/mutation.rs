//! Controlled model changes that reproduce the ways scripts break: renamed,
//! retyped, moved, reparented, deleted and added objects, new list options,
//! unexpected popups and flaky loads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{bump_version, AppModel, ModelError, ObjType, PopupSpec, UiObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MutationOp {
    RenameObject {
        screen: String,
        target: String,
        new_name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_id: Option<String>,
    },
    RetypeObject {
        screen: String,
        target: String,
        new_type: ObjType,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        options: Vec<String>,
    },
    ReparentObject {
        screen: String,
        target: String,
        new_parent: Option<String>,
    },
    MoveObject {
        screen: String,
        target: String,
        position: (i64, i64),
    },
    DeleteObject {
        screen: String,
        target: String,
    },
    /// Adds an object; every transition triggered by one of `guard_triggers`
    /// gains the new object as a guard.
    AddObject {
        screen: String,
        object: UiObject,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        guard_triggers: Vec<String>,
    },
    AddSelectOption {
        screen: String,
        target: String,
        option: String,
    },
    AddPopup {
        popup: PopupSpec,
    },
    SetLoadFailure {
        probability: f64,
        screens: Vec<String>,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum MutationError {
    #[error("unknown mutation target `{0}`")]
    UnknownTarget(String),
    #[error("mutation leaves the model invalid: {0}")]
    Invalid(#[from] ModelError),
    #[error("malformed mutation script: {0}")]
    Parse(String),
}

/// Parses a JSON list of mutation records.
pub fn load_mutations(document: &str) -> Result<Vec<MutationOp>, MutationError> {
    serde_json::from_str(document).map_err(|e| MutationError::Parse(e.to_string()))
}

/// Returns a mutated copy of `model` with a bumped version.
pub fn apply_mutation(model: &AppModel, op: &MutationOp) -> Result<AppModel, MutationError> {
    let mut m = model.clone();
    let unknown = |id: &str| MutationError::UnknownTarget(id.to_string());

    fn object<'a>(
        m: &'a mut AppModel,
        screen: &str,
        target: &str,
    ) -> Result<&'a mut UiObject, MutationError> {
        m.screen_mut(screen)
            .ok_or_else(|| MutationError::UnknownTarget(screen.to_string()))?
            .object_mut(target)
            .ok_or_else(|| MutationError::UnknownTarget(format!("{screen}/{target}")))
    }

    match op {
        MutationOp::RenameObject {
            screen,
            target,
            new_name,
            new_id,
        } => {
            object(&mut m, screen, target)?.name = new_name.clone();
            if let Some(new_id) = new_id {
                let s = m.screen_mut(screen).expect("checked above");
                for o in &mut s.objects {
                    if &o.id == target {
                        o.id = new_id.clone();
                    }
                    if o.parent_id.as_ref() == Some(target) {
                        o.parent_id = Some(new_id.clone());
                    }
                }
                for t in &mut s.transitions {
                    if &t.trigger.object == target {
                        t.trigger.object = new_id.clone();
                    }
                    for g in &mut t.guards {
                        if g == target {
                            *g = new_id.clone();
                        }
                    }
                }
                if let Some(login) = m.login_screen.as_mut().filter(|l| &l.screen == screen) {
                    for f in [
                        &mut login.username_field,
                        &mut login.password_field,
                        &mut login.submit,
                    ] {
                        if f == target {
                            *f = new_id.clone();
                        }
                    }
                }
            }
        }
        MutationOp::RetypeObject {
            screen,
            target,
            new_type,
            options,
        } => {
            let o = object(&mut m, screen, target)?;
            o.obj_type = *new_type;
            if new_type.has_options() {
                if !options.is_empty() {
                    o.options = options.clone();
                }
            } else {
                o.options.clear();
            }
        }
        MutationOp::ReparentObject {
            screen,
            target,
            new_parent,
        } => {
            object(&mut m, screen, target)?.parent_id = new_parent.clone();
        }
        MutationOp::MoveObject {
            screen,
            target,
            position,
        } => {
            object(&mut m, screen, target)?.position = *position;
        }
        MutationOp::DeleteObject { screen, target } => {
            let s = m.screen_mut(screen).ok_or_else(|| unknown(screen))?;
            let idx = s
                .objects
                .iter()
                .position(|o| &o.id == target)
                .ok_or_else(|| unknown(&format!("{screen}/{target}")))?;
            let removed = s.objects.remove(idx);
            for o in &mut s.objects {
                if o.parent_id.as_ref() == Some(target) {
                    o.parent_id = removed.parent_id.clone();
                }
            }
            s.transitions.retain(|t| &t.trigger.object != target);
            for t in &mut s.transitions {
                t.guards.retain(|g| g != target);
            }
        }
        MutationOp::AddObject {
            screen,
            object,
            guard_triggers,
        } => {
            let s = m.screen_mut(screen).ok_or_else(|| unknown(screen))?;
            if s.object(&object.id).is_some() {
                return Err(ModelError::Invariant(format!(
                    "object id `{}` already exists on `{screen}`",
                    object.id
                ))
                .into());
            }
            s.objects.push(object.clone());
            for trig in guard_triggers {
                if s.object(trig).is_none() {
                    return Err(unknown(&format!("{screen}/{trig}")));
                }
                for t in s
                    .transitions
                    .iter_mut()
                    .filter(|t| &t.trigger.object == trig)
                {
                    t.guards.push(object.id.clone());
                }
            }
        }
        MutationOp::AddSelectOption {
            screen,
            target,
            option,
        } => {
            let o = object(&mut m, screen, target)?;
            if !o.obj_type.has_options() {
                return Err(ModelError::Invariant(format!("`{target}` is not a select")).into());
            }
            o.options.push(option.clone());
        }
        MutationOp::AddPopup { popup } => m.popups.push(popup.clone()),
        MutationOp::SetLoadFailure {
            probability,
            screens,
        } => {
            m.load_failure.probability = *probability;
            m.load_failure.screens = screens.clone();
        }
    }
    m.validate()?;
    m.version = bump_version(&model.version);
    Ok(m)
}
