use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::diff::object_view;
use super::{
    MaintainError, ModelDiff, PatchKind, PatchPayload, PatchStatus, PatchTarget, ScriptPatch,
};
use crate::dsl::{parse, validate, Severity, Step, TestScript, Verb};
use crate::model::{AppModel, ObjType, Screen, UiObject};
use crate::repo::{AttrKey, Attributes, ObjectDescriptor, Repository};
use crate::testgen::{derive_descriptor, heuristic_value_of, ValueHeuristic};

/// Everything patch proposal needs besides the diff.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub old: &'a AppModel,
    pub new: &'a AppModel,
    pub scripts: &'a [TestScript],
    pub repo: &'a Repository,
    pub heuristics: &'a [ValueHeuristic],
}

fn find_object<'m>(
    model: &'m AppModel,
    screen: &str,
    id: &str,
) -> Option<(&'m Screen, &'m UiObject)> {
    let s = model.screen(screen)?;
    Some((s, s.object(id)?))
}

/// The object on `screen` a repository entry identifies, if any.
fn resolve_static<'m>(
    model: &'m AppModel,
    screen: &str,
    descriptor: &ObjectDescriptor,
) -> Option<&'m UiObject> {
    let s = model.screen(screen)?;
    s.objects
        .iter()
        .find(|o| o.visible && descriptor.attributes.matches(&object_view(s, o)))
}

fn bound_names(repo: &Repository, screen: &Screen, o: &UiObject) -> Vec<String> {
    let view = object_view(screen, o);
    repo.iter()
        .filter(|d| d.attributes.matches(&view))
        .map(|d| d.logical_name.clone())
        .collect()
}

/// The screen each step is expected to run on, following `open`,
/// `assert_screen` and the transitions steps trigger. `None` once the
/// script's position is unknown.
pub fn trace_screens(
    script: &TestScript,
    repo: &Repository,
    model: &AppModel,
) -> Vec<Option<String>> {
    let mut cur = Some(model.start_screen.clone());
    let mut out = Vec::with_capacity(script.steps.len());
    for step in &script.steps {
        out.push(cur.clone());
        match step.verb {
            Verb::Open | Verb::AssertScreen => {
                cur = step
                    .arg()
                    .filter(|s| model.screen(s).is_some())
                    .map(str::to_string);
            }
            v => {
                let (Some(action), Some(screen_id)) = (v.action_verb(), cur.clone()) else {
                    continue;
                };
                let obj = step
                    .object_ref
                    .as_deref()
                    .and_then(|r| repo.get(r))
                    .and_then(|d| resolve_static(model, &screen_id, d));
                if let Some(o) = obj {
                    let screen = model.screen(&screen_id).expect("traced screen exists");
                    if let Some(t) = screen
                        .transitions
                        .iter()
                        .find(|t| t.trigger.object == o.id && t.trigger.action == action)
                    {
                        cur = Some(t.target.clone());
                    }
                }
            }
        }
    }
    out
}

fn step_target(script: &TestScript, step: usize) -> PatchTarget {
    PatchTarget::Step {
        script_id: script.id.clone(),
        step,
    }
}

fn step_text(step: &Step) -> String {
    let mut s = step.verb.as_str().to_string();
    for t in step.object_ref.iter().chain(&step.args) {
        s.push_str(&format!(" {t:?}"));
    }
    s
}

fn slug(value: &str) -> String {
    let mut out = String::new();
    for c in value.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn fill_step(obj: &UiObject, heuristics: &[ValueHeuristic]) -> Option<(Verb, Vec<String>)> {
    let verb = match obj.obj_type {
        ObjType::Textfield | ObjType::PasswordField => Verb::Enter,
        ObjType::Listbox | ObjType::Combobox => Verb::Select,
        ObjType::Checkbox => Verb::Check,
        _ => return None,
    };
    let value = heuristic_value_of(obj, heuristics)?.valid;
    Some((verb, vec![value]))
}

/// Turns a model diff into reviewable patches for the suite and repository.
pub fn propose_patches(diff: &ModelDiff, ctx: &ProposalContext<'_>) -> Vec<ScriptPatch> {
    let mut out: Vec<ScriptPatch> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |p: ScriptPatch| {
        if seen.insert(p.key.clone()) {
            out.push(p);
        }
    };
    let traces: Vec<Vec<Option<String>>> = ctx
        .scripts
        .iter()
        .map(|s| trace_screens(s, ctx.repo, ctx.old))
        .collect();

    for e in diff.renamed.iter().chain(&diff.modified) {
        let Some((os, o)) = find_object(ctx.old, &e.old.screen, &e.old.id) else {
            continue;
        };
        let Some((ns, n)) = find_object(ctx.new, &e.new.screen, &e.new.id) else {
            continue;
        };
        let new_view = object_view(ns, n);
        let names = bound_names(ctx.repo, os, o);
        for logical in &names {
            let d = ctx.repo.get(logical).expect("bound name exists");
            if d.attributes.matches(&new_view) {
                continue;
            }
            let mut attributes = Attributes::default();
            let mut remove = Vec::new();
            let fresh = Attributes::of_object(&new_view, &d.attributes.keys());
            for k in d.attributes.keys() {
                match k {
                    AttrKey::ParentName if new_view.parent_name.is_none() => remove.push(k),
                    AttrKey::Name if fresh.name != d.attributes.name => {
                        attributes.name = fresh.name.clone()
                    }
                    AttrKey::ObjType if fresh.obj_type != d.attributes.obj_type => {
                        attributes.obj_type = fresh.obj_type
                    }
                    AttrKey::ParentName if fresh.parent_name != d.attributes.parent_name => {
                        attributes.parent_name = fresh.parent_name.clone()
                    }
                    AttrKey::Text if fresh.text != d.attributes.text => {
                        attributes.text = fresh.text.clone()
                    }
                    AttrKey::Position if fresh.position != d.attributes.position => {
                        attributes.position = fresh.position
                    }
                    AttrKey::Size if fresh.size != d.attributes.size => {
                        attributes.size = fresh.size
                    }
                    _ => {}
                }
            }
            let what: Vec<&str> = e
                .changed
                .iter()
                .map(|c| match c {
                    super::ChangedAttr::Name => "name",
                    super::ChangedAttr::ObjType => "type",
                    super::ChangedAttr::Parent => "parent",
                    super::ChangedAttr::Text => "text",
                    super::ChangedAttr::Position => "position",
                    super::ChangedAttr::Size => "size",
                    super::ChangedAttr::Options => "options",
                    super::ChangedAttr::Required => "required",
                    super::ChangedAttr::Enabled => "enabled",
                    super::ChangedAttr::Visible => "visible",
                })
                .collect();
            push(ScriptPatch::new(
                PatchKind::UpdateRepoDescriptor,
                PatchTarget::Logical {
                    logical_name: logical.clone(),
                },
                PatchPayload::Descriptor { attributes, remove },
                format!(
                    "`{}` on `{}` changed ({}) in {}; similarity {:.4}",
                    e.old.name,
                    e.old.screen,
                    what.join(", "),
                    diff.new_version,
                    e.score
                ),
            ));
        }

        if e.old.name != e.new.name {
            for script in ctx.scripts {
                for step in &script.steps {
                    if step.args.iter().any(|a| a == &e.old.name) {
                        push(ScriptPatch::new(
                            PatchKind::RenameRef,
                            step_target(script, step.index),
                            PatchPayload::Replacement {
                                from: e.old.name.clone(),
                                to: e.new.name.clone(),
                            },
                            format!("`{}` was renamed to `{}`", e.old.name, e.new.name),
                        ));
                    }
                }
            }
        }

        if !e.options_added.is_empty() {
            for logical in &names {
                let template = ctx.scripts.iter().find_map(|s| {
                    s.steps
                        .iter()
                        .find(|st| {
                            st.verb == Verb::Select
                                && st.object_ref.as_deref() == Some(logical.as_str())
                                && st.arg().is_some_and(|v| o.options.iter().any(|x| x == v))
                        })
                        .map(|st| (s, st.index))
                });
                let Some((script, at)) = template else {
                    continue;
                };
                let old_value = script.steps[at]
                    .arg()
                    .expect("select has a value")
                    .to_string();
                for added in &e.options_added {
                    let mut clone = script.clone();
                    let mut name = format!("{}-{}", script.name, slug(added));
                    while ctx.scripts.iter().any(|s| s.name == name) {
                        name.push('_');
                    }
                    clone.rename(name.clone());
                    for st in &mut clone.steps {
                        if st.object_ref.as_deref() == Some(logical.as_str()) {
                            for a in &mut st.args {
                                if *a == old_value {
                                    *a = added.clone();
                                }
                            }
                        }
                    }
                    push(ScriptPatch::new(
                        PatchKind::AddOptionScript,
                        PatchTarget::Script { script_id: script.id.clone() },
                        PatchPayload::NewScript { name, text: clone.to_text() },
                        format!(
                            "new option `{added}` on `{logical}`; cloned from the `{old_value}` case in `{}`",
                            script.id
                        ),
                    ));
                }
            }
        }
    }

    for d in &diff.deleted {
        let Some((os, o)) = find_object(ctx.old, &d.screen, &d.id) else {
            continue;
        };
        let names = bound_names(ctx.repo, os, o);
        for (script, trace) in ctx.scripts.iter().zip(&traces) {
            let mut cut_from: Option<(usize, String)> = None;
            for step in &script.steps {
                let on_screen = trace[step.index].as_deref().is_none_or(|s| s == d.screen);
                let refers = step.object_ref.as_ref().is_some_and(|r| names.contains(r));
                if refers && on_screen {
                    push(ScriptPatch::new(
                        PatchKind::RemoveStep,
                        step_target(script, step.index),
                        PatchPayload::Removal {
                            step_text: step_text(step),
                        },
                        format!("`{}` was deleted from `{}`", d.name, d.screen),
                    ));
                    let leads = os.transitions.iter().find(|t| {
                        t.trigger.object == o.id
                            && Some(t.trigger.action) == step.verb.action_verb()
                    });
                    if let (None, Some(t)) = (&cut_from, leads) {
                        cut_from = Some((step.index + 1, t.target.clone()));
                    }
                }
            }
            // Steps after a deleted transition trigger run on a screen the
            // script can no longer reach, up to the next `open`.
            if let Some((from, target)) = cut_from {
                for step in script.steps[from..]
                    .iter()
                    .take_while(|s| s.verb != Verb::Open)
                {
                    push(ScriptPatch::new(
                        PatchKind::RemoveStep,
                        step_target(script, step.index),
                        PatchPayload::Removal {
                            step_text: step_text(step),
                        },
                        format!(
                            "unreachable: deleted `{}` was the way to `{target}`",
                            d.name
                        ),
                    ));
                }
            }
        }
    }

    for a in &diff.added {
        let Some((ns, n)) = find_object(ctx.new, &a.screen, &a.id) else {
            continue;
        };
        if !(n.required && n.obj_type.is_input()) {
            continue;
        }
        let guarded: Vec<_> = ns
            .transitions
            .iter()
            .filter(|t| t.guards.contains(&n.id))
            .collect();
        if guarded.is_empty() {
            continue;
        }
        let attributes = derive_descriptor(ns, n);
        let (logical, create) = match ctx.repo.get(&n.name) {
            Some(d) if d.attributes == attributes => (n.name.clone(), false),
            Some(_) => (format!("{}.{}", ns.id, n.name), true),
            None => (n.name.clone(), true),
        };
        let Some((verb, args)) = fill_step(n, ctx.heuristics) else {
            continue;
        };
        let mut any = false;
        for (script, trace) in ctx.scripts.iter().zip(&traces) {
            let blocked = script.steps.iter().find(|st| {
                trace[st.index].as_deref() == Some(ns.id.as_str())
                    && st.verb.action_verb().is_some_and(|av| {
                        st.object_ref
                            .as_deref()
                            .and_then(|r| ctx.repo.get(r))
                            .and_then(|d| resolve_static(ctx.new, &ns.id, d))
                            .is_some_and(|o| {
                                guarded
                                    .iter()
                                    .any(|t| t.trigger.object == o.id && t.trigger.action == av)
                            })
                    })
            });
            let Some(st) = blocked else { continue };
            any = true;
            push(ScriptPatch::new(
                PatchKind::AddStep,
                step_target(script, st.index),
                PatchPayload::NewStep {
                    verb,
                    object_ref: Some(logical.clone()),
                    args: args.clone(),
                },
                format!(
                    "new required field `{}` on `{}` must be set before `{}`",
                    n.name,
                    ns.id,
                    step_text(st)
                ),
            ));
        }
        if any && create {
            push(ScriptPatch::new(
                PatchKind::UpdateRepoDescriptor,
                PatchTarget::Logical {
                    logical_name: logical.clone(),
                },
                PatchPayload::Descriptor {
                    attributes,
                    remove: vec![],
                },
                format!("descriptor for new field `{}` on `{}`", n.name, ns.id),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchApplication {
    pub scripts: Vec<TestScript>,
    pub repo: Repository,
    /// Every proposed patch, now applied or declined.
    pub patches: Vec<ScriptPatch>,
}

fn inapplicable(p: &ScriptPatch, reason: impl Into<String>) -> MaintainError {
    MaintainError::Inapplicable {
        key: p.key.clone(),
        reason: reason.into(),
    }
}

/// Applies the accepted patches as one batch. Any patch that leaves a script
/// invalid against the new repository and model fails the whole batch.
pub fn apply_patches(
    patches: &[ScriptPatch],
    accepted: &BTreeSet<String>,
    scripts: &[TestScript],
    repo: &Repository,
    model: &AppModel,
) -> Result<PatchApplication, MaintainError> {
    if let Some(k) = accepted
        .iter()
        .find(|k| !patches.iter().any(|p| &p.key == *k))
    {
        return Err(MaintainError::UnknownKey(k.clone()));
    }
    let chosen: Vec<&ScriptPatch> = patches
        .iter()
        .filter(|p| accepted.contains(&p.key))
        .collect();

    let mut new_repo = repo.clone();
    let mut repo_patches: BTreeMap<String, &ScriptPatch> = BTreeMap::new();
    for p in chosen
        .iter()
        .filter(|p| p.kind == PatchKind::UpdateRepoDescriptor)
    {
        let (
            PatchTarget::Logical { logical_name },
            PatchPayload::Descriptor { attributes, remove },
        ) = (&p.target, &p.payload)
        else {
            return Err(inapplicable(p, "payload does not fit the patch kind"));
        };
        let mut attrs = match new_repo.remove(logical_name) {
            Some(d) => d.attributes.overlay(attributes),
            None => attributes.clone(),
        };
        for k in remove {
            match k {
                AttrKey::Name => attrs.name = None,
                AttrKey::ObjType => attrs.obj_type = None,
                AttrKey::ParentName => attrs.parent_name = None,
                AttrKey::Text => attrs.text = None,
                AttrKey::Position => attrs.position = None,
                AttrKey::Size => attrs.size = None,
            }
        }
        if attrs.is_empty() {
            return Err(inapplicable(p, "descriptor would have no attributes"));
        }
        let mut desc = ObjectDescriptor::new(logical_name.clone(), attrs);
        desc.weights = repo.get(logical_name).and_then(|d| d.weights.clone());
        new_repo
            .insert(desc)
            .map_err(|e| inapplicable(p, e.to_string()))?;
        repo_patches.insert(logical_name.clone(), p);
    }
    if !repo_patches.is_empty() {
        new_repo.version = crate::model::bump_version(&repo.version);
    }

    let mut out_scripts = Vec::with_capacity(scripts.len());
    let mut touched: BTreeMap<String, &ScriptPatch> = BTreeMap::new();
    for script in scripts {
        let mine: Vec<&&ScriptPatch> = chosen
            .iter()
            .filter(|p| matches!(&p.target, PatchTarget::Step { script_id, .. } if script_id == &script.id))
            .collect();
        if mine.is_empty() {
            out_scripts.push(script.clone());
            continue;
        }
        let mut removed = BTreeSet::new();
        let mut inserts: BTreeMap<usize, Vec<Step>> = BTreeMap::new();
        let mut replacements: BTreeMap<usize, Vec<(&str, &str)>> = BTreeMap::new();
        for p in &mine {
            let PatchTarget::Step { step, .. } = p.target else {
                unreachable!()
            };
            if step >= script.steps.len() {
                return Err(inapplicable(
                    p,
                    format!("script `{}` has no step {step}", script.id),
                ));
            }
            match &p.payload {
                PatchPayload::Removal { .. } => {
                    removed.insert(step);
                }
                PatchPayload::NewStep {
                    verb,
                    object_ref,
                    args,
                } => {
                    let args: Vec<&str> = args.iter().map(String::as_str).collect();
                    inserts.entry(step).or_default().push(Step::new(
                        *verb,
                        object_ref.as_deref(),
                        &args,
                    ));
                }
                PatchPayload::Replacement { from, to } => {
                    replacements.entry(step).or_default().push((from, to));
                }
                _ => return Err(inapplicable(p, "payload does not fit the patch kind")),
            }
        }
        let mut steps = Vec::new();
        for (i, st) in script.steps.iter().enumerate() {
            steps.extend(inserts.remove(&i).unwrap_or_default());
            if removed.contains(&i) {
                continue;
            }
            let mut st = st.clone();
            for (from, to) in replacements.get(&i).into_iter().flatten() {
                for a in &mut st.args {
                    if a == from {
                        *a = to.to_string();
                    }
                }
            }
            steps.push(st);
        }
        let mut s = TestScript::new(script.name.clone(), steps);
        s.id = script.id.clone();
        touched.insert(s.id.clone(), mine[0]);
        out_scripts.push(s);
    }

    for p in chosen
        .iter()
        .filter(|p| p.kind == PatchKind::AddOptionScript)
    {
        let PatchPayload::NewScript { name, text } = &p.payload else {
            return Err(inapplicable(p, "payload does not fit the patch kind"));
        };
        let s = parse(text)
            .map_err(|e| inapplicable(p, format!("script text does not parse: {e:?}")))?;
        if &s.name != name || out_scripts.iter().any(|x| x.id == s.id) {
            return Err(inapplicable(
                p,
                format!("script `{name}` already exists or is misnamed"),
            ));
        }
        touched.insert(s.id.clone(), p);
        out_scripts.push(s);
    }

    for s in &out_scripts {
        let blame = touched.get(&s.id).copied().or_else(|| {
            s.steps
                .iter()
                .filter_map(|st| st.object_ref.as_ref())
                .find_map(|r| repo_patches.get(r).copied())
        });
        let Some(blame) = blame else { continue };
        let errors: Vec<_> = validate(s, &new_repo, Some(model))
            .into_iter()
            .filter(|i| i.severity == Severity::Error)
            .collect();
        if !errors.is_empty() {
            return Err(MaintainError::Validation {
                key: blame.key.clone(),
                script: s.id.clone(),
                issues: errors,
            });
        }
    }

    let patches = patches
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.status = if accepted.contains(&p.key) {
                PatchStatus::Applied
            } else {
                PatchStatus::Declined
            };
            p
        })
        .collect();
    Ok(PatchApplication {
        scripts: out_scripts,
        repo: new_repo,
        patches,
    })
}
