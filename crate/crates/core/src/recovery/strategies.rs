use std::collections::{BTreeSet, VecDeque};

use super::{
    learned_definition_id, CustomAction, DefinitionSource, FilledField, KnowledgeBase,
    PopupDefinition, RecoveryConfig, RecoveryDetail, TriggerKind,
};
use crate::matcher::{fuzzy_match, string_similarity, SimilarityConfig};
use crate::model::{Action, ActionVerb, ObjType, ObjectView, ScreenView, SimSession};
use crate::repo::{resolve_exact, AttrKey, Attributes, ObjectDescriptor, Repository};
use crate::testgen::{heuristic_value, ValueHeuristic};

/// A planned or executed popup resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PopupResolution {
    pub detail: RecoveryDetail,
    /// The popup is gone afterwards.
    pub resolved: bool,
    /// Definition to remember when no known one matched.
    pub learned: Option<PopupDefinition>,
}

pub(crate) fn plan_popup(
    view: &ScreenView,
    kb: &KnowledgeBase,
    extra: &[PopupDefinition],
    config: &RecoveryConfig,
) -> Option<PopupResolution> {
    let popup = view.popup.as_ref()?;
    let has_button = |b: &str| popup.buttons.iter().any(|x| x == b);
    let known =
        kb.popup_definitions
            .iter()
            .chain(extra)
            .filter(|d| {
                d.confidence >= config.min_popup_confidence && has_button(&d.resolution_button)
            })
            .map(|d| {
                let s = string_similarity(&popup.title, &d.title_pattern, true)
                    .max(string_similarity(&popup.body_text, &d.text_pattern, true));
                (d, s)
            })
            .filter(|(_, s)| *s >= config.popup_match_threshold)
            .fold(None::<(&PopupDefinition, f64)>, |best, (d, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((d, s)),
            });

    let (button, matched, learned) = match known {
        Some((d, _)) => (Some(d.resolution_button.clone()), Some(d.id.clone()), None),
        None => {
            // lexicon order decides, not button order
            let button = config
                .dismissal_lexicon
                .iter()
                .find_map(|w| popup.buttons.iter().find(|b| w.eq_ignore_ascii_case(b)));
            let learned = button.map(|b| PopupDefinition {
                id: learned_definition_id(&popup.id),
                title_pattern: popup.title.clone(),
                text_pattern: popup.body_text.clone(),
                resolution_button: b.clone(),
                source: DefinitionSource::Learned,
                confidence: config.learned_popup_confidence,
            });
            (button.cloned(), None, learned)
        }
    };
    Some(PopupResolution {
        detail: RecoveryDetail::PopupResolution {
            popup_id: popup.id.clone(),
            title: popup.title.clone(),
            body_text: popup.body_text.clone(),
            button,
            learned: learned.is_some(),
            matched_definition: matched,
        },
        resolved: false,
        learned,
    })
}

pub(crate) fn apply_popup(session: &mut SimSession, detail: &RecoveryDetail) -> bool {
    let RecoveryDetail::PopupResolution {
        button: Some(b), ..
    } = detail
    else {
        return false;
    };
    session.perform(&Action::popup_click(b.clone())).is_ok() && !session.has_popup()
}

/// Closes the active popup, using a known definition when one matches and
/// the dismissal lexicon otherwise. `None` when no popup is open.
pub fn detect_and_resolve_popup(
    session: &mut SimSession,
    kb: &KnowledgeBase,
    config: &RecoveryConfig,
) -> Option<PopupResolution> {
    let mut plan = plan_popup(&session.observe(), kb, &[], config)?;
    plan.resolved = apply_popup(session, &plan.detail);
    Some(plan)
}

fn fill_action(o: &ObjectView, value: &str) -> Option<Action> {
    let verb = match o.obj_type {
        ObjType::Textfield | ObjType::PasswordField => ActionVerb::Enter,
        ObjType::Listbox | ObjType::Combobox => ActionVerb::Select,
        ObjType::Checkbox => ActionVerb::Check,
        _ => return None,
    };
    Some(Action::new(verb, o.id.clone(), Some(value.to_string())))
}

pub(crate) fn plan_fill(
    view: &ScreenView,
    unmet: &[String],
    heuristics: &[ValueHeuristic],
) -> RecoveryDetail {
    let mut fields = Vec::new();
    let mut problems = Vec::new();
    for id in unmet {
        let Some(o) = view.object(id) else {
            problems.push(format!("`{id}` is not on screen"));
            continue;
        };
        match heuristic_value(o, heuristics) {
            Some(v) if o.enabled => fields.push(FilledField {
                object: o.id.clone(),
                name: o.name.clone(),
                value: v.valid,
            }),
            _ => problems.push(format!("`{}` ({}) accepts no value", o.name, o.obj_type)),
        }
    }
    let error = (!problems.is_empty() || fields.is_empty()).then(|| {
        if problems.is_empty() {
            "no unmet guard reported".to_string()
        } else {
            problems.join("; ")
        }
    });
    RecoveryDetail::FillRequiredField { fields, error }
}

pub(crate) fn apply_fill(session: &mut SimSession, detail: &RecoveryDetail) -> bool {
    let RecoveryDetail::FillRequiredField {
        fields,
        error: None,
    } = detail
    else {
        return false;
    };
    fields.iter().all(|f| {
        let view = session.observe();
        let Some(action) = view
            .object(&f.object)
            .and_then(|o| fill_action(o, &f.value))
        else {
            return false;
        };
        // The guard is satisfied once the value is stored, even if the
        // field itself triggers a guarded transition.
        !matches!(
            session.perform(&action),
            crate::model::ActionOutcome::NoSuchObject
                | crate::model::ActionOutcome::BlockedByPopup
                | crate::model::ActionOutcome::LoadFailure
                | crate::model::ActionOutcome::InvalidAction { .. }
        )
    })
}

/// Gives every unmet guard a heuristic value. Returns the detail and whether
/// every field was set.
pub fn fill_required_fields(
    session: &mut SimSession,
    unmet: &[String],
    heuristics: &[ValueHeuristic],
) -> (RecoveryDetail, bool) {
    let detail = plan_fill(&session.observe(), unmet, heuristics);
    let ok = apply_fill(session, &detail);
    (detail, ok)
}

/// Re-enters the current screen until it loads, at most `max_attempts` times.
pub fn refresh_retry(session: &mut SimSession, max_attempts: u32) -> (RecoveryDetail, bool) {
    let screen = session.current_screen().to_string();
    let mut attempts = 0;
    let mut loaded = !session.observe().loading;
    while !loaded && attempts < max_attempts {
        attempts += 1;
        session.perform(&Action::refresh());
        loaded = !session.observe().loading;
    }
    (
        RecoveryDetail::RefreshRetry {
            screen,
            attempts,
            max_attempts,
        },
        loaded,
    )
}

/// A login page has at least one password field, text field and button.
pub fn classify_login_page(view: &ScreenView) -> bool {
    let has = |t: ObjType| view.objects.iter().any(|o| o.obj_type == t && o.enabled);
    !view.loading && has(ObjType::PasswordField) && has(ObjType::Textfield) && has(ObjType::Button)
}

pub(crate) fn plan_relogin(view: &ScreenView, username: &str) -> Option<RecoveryDetail> {
    classify_login_page(view).then(|| RecoveryDetail::Relogin {
        screen: view.screen_id.clone(),
        username: username.to_string(),
        landed_on: String::new(),
    })
}

fn pick<'v>(view: &'v ScreenView, t: ObjType, hints: &[&str]) -> Option<&'v ObjectView> {
    let of_type = || {
        view.objects
            .iter()
            .filter(move |o| o.obj_type == t && o.enabled)
    };
    of_type()
        .find(|o| {
            let n = o.name.to_lowercase();
            hints.iter().any(|h| n.contains(h))
        })
        .or_else(|| of_type().next())
}

/// Logs in on the current page. Resumed when the session is logged in and
/// has left the login page.
pub fn relogin(
    session: &mut SimSession,
    username: &str,
    password: &str,
) -> Option<(RecoveryDetail, bool)> {
    let view = session.observe();
    let mut detail = plan_relogin(&view, username)?;
    let user = pick(&view, ObjType::Textfield, &["user", "email", "login"]).map(|o| o.id.clone());
    let pass = pick(&view, ObjType::PasswordField, &[]).map(|o| o.id.clone());
    let submit = pick(
        &view,
        ObjType::Button,
        &["login", "log in", "sign in", "submit"],
    )
    .map(|o| o.id.clone());
    let (Some(user), Some(pass), Some(submit)) = (user, pass, submit) else {
        return Some((detail, false));
    };
    session.perform(&Action::enter(user, username));
    session.perform(&Action::enter(pass, password));
    session.perform(&Action::click(submit));
    let landed = session.current_screen().to_string();
    let ok = session.logged_in() && landed != view.screen_id;
    if let RecoveryDetail::Relogin { landed_on, .. } = &mut detail {
        *landed_on = landed;
    }
    Some((detail, ok))
}

/// Buttons and links whose text is a navigation word, in lexicon order and
/// then by id.
pub fn navigation_buttons<'v>(view: &'v ScreenView, lexicon: &[String]) -> Vec<&'v ObjectView> {
    let mut navs: Vec<(usize, &ObjectView)> = view
        .objects
        .iter()
        .filter(|o| matches!(o.obj_type, ObjType::Button | ObjType::Link) && o.enabled)
        .filter_map(|o| {
            let label = if o.text.is_empty() { &o.name } else { &o.text };
            lexicon
                .iter()
                .position(|w| w.eq_ignore_ascii_case(label.trim()))
                .map(|i| (i, o))
        })
        .collect();
    navs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    navs.into_iter().map(|(_, o)| o).collect()
}

/// Which on-screen objects may stand in for a missing one.
#[derive(Debug, Clone, Copy, Default)]
pub struct CandidateFilter<'a> {
    /// Objects matching another entry of this repository exactly belong to
    /// that entry and are left alone.
    pub repo: Option<&'a Repository>,
    /// The step acts on the object, so disabled objects are of no use.
    pub actionable: bool,
}

impl CandidateFilter<'_> {
    pub fn candidates(&self, view: &ScreenView, descriptor: &ObjectDescriptor) -> Vec<ObjectView> {
        let claimed: BTreeSet<String> = self
            .repo
            .into_iter()
            .flat_map(|r| r.iter())
            .filter(|d| d.logical_name != descriptor.logical_name)
            .filter_map(|d| resolve_exact(view, d).ok().flatten())
            .map(|o| o.id)
            .collect();
        view.objects
            .iter()
            .filter(|o| (o.enabled || !self.actionable) && !claimed.contains(&o.id))
            .cloned()
            .collect()
    }
}

fn locate(
    view: &ScreenView,
    descriptor: &ObjectDescriptor,
    similarity: &SimilarityConfig,
    filter: &CandidateFilter<'_>,
) -> Option<(ObjectView, f64)> {
    if let Ok(Some(o)) = resolve_exact(view, descriptor) {
        return Some((o, 1.0));
    }
    let m = fuzzy_match(
        descriptor,
        &filter.candidates(view, descriptor),
        view.dimensions,
        similarity,
    );
    let best = m.best?;
    let o = view.object(&best.candidate)?.clone();
    Some((o, best.overall))
}

/// Breadth-first search through navigation clicks. Always leaves the session
/// as it found it.
pub(crate) fn plan_explore(
    session: &mut SimSession,
    descriptor: &ObjectDescriptor,
    similarity: &SimilarityConfig,
    config: &RecoveryConfig,
    filter: &CandidateFilter<'_>,
) -> Option<RecoveryDetail> {
    let start_view = session.observe();
    if navigation_buttons(&start_view, &config.navigation_lexicon).is_empty() {
        return None;
    }
    let start = session.snapshot();
    let mut visited = BTreeSet::from([start_view.screen_id.clone()]);
    let mut queue = VecDeque::from([(session.snapshot(), Vec::<String>::new())]);
    let mut found = None;
    'search: while let Some((snap, path)) = queue.pop_front() {
        if path.len() >= config.explore_max_depth {
            continue;
        }
        session.restore(&snap);
        let here = session.observe();
        let navs: Vec<String> = navigation_buttons(&here, &config.navigation_lexicon)
            .iter()
            .map(|o| o.id.clone())
            .collect();
        for nav in navs {
            session.restore(&snap);
            if !session.perform(&Action::click(nav.clone())).is_ok() {
                continue;
            }
            let view = session.observe();
            if view.loading || view.popup.is_some() || !visited.insert(view.screen_id.clone()) {
                continue;
            }
            let mut next = path.clone();
            next.push(nav);
            if let Some((o, score)) = locate(&view, descriptor, similarity, filter) {
                found = Some(RecoveryDetail::AdjacentExploration {
                    logical_name: descriptor.logical_name.clone(),
                    path: next,
                    screen: view.screen_id.clone(),
                    candidate_attributes: Attributes::of_object(&o, &descriptor.attributes.keys()),
                    candidate: o.id,
                    score,
                });
                break 'search;
            }
            queue.push_back((session.snapshot(), next));
        }
    }
    session.restore(&start);
    found
}

pub(crate) fn apply_explore(session: &mut SimSession, detail: &RecoveryDetail) -> bool {
    let RecoveryDetail::AdjacentExploration { path, screen, .. } = detail else {
        return false;
    };
    let start = session.snapshot();
    let ok = path
        .iter()
        .all(|nav| session.perform(&Action::click(nav.clone())).is_ok())
        && session.current_screen() == screen;
    if !ok {
        session.restore(&start);
    }
    ok
}

/// Looks for the object on pages reachable through navigation buttons. On
/// success the session is left on the page holding it; otherwise unchanged.
pub fn explore_adjacent(
    session: &mut SimSession,
    descriptor: &ObjectDescriptor,
    similarity: &SimilarityConfig,
    config: &RecoveryConfig,
    filter: &CandidateFilter<'_>,
) -> Option<(RecoveryDetail, bool)> {
    let detail = plan_explore(session, descriptor, similarity, config, filter)?;
    let ok = apply_explore(session, &detail);
    Some((detail, ok))
}

pub(crate) fn plan_custom<'k>(
    view: &ScreenView,
    kb: &'k KnowledgeBase,
    trigger: TriggerKind,
) -> Option<(&'k CustomAction, RecoveryDetail)> {
    let a = kb.custom_actions.iter().find(|a| {
        let p = &a.screen;
        (a.triggers.is_empty() || a.triggers.contains(&trigger))
            && p.screen_id.as_ref().is_none_or(|s| s == &view.screen_id)
            && p.title_contains
                .as_ref()
                .is_none_or(|t| view.title.contains(t.as_str()))
            && p.has_object
                .as_ref()
                .is_none_or(|n| view.objects.iter().any(|o| &o.name == n))
    })?;
    Some((
        a,
        RecoveryDetail::Custom {
            action: a.name.clone(),
            steps: a.actions.len(),
        },
    ))
}

pub(crate) fn apply_custom(session: &mut SimSession, action: &CustomAction) -> bool {
    action.actions.iter().all(|step| {
        let target = match step.verb {
            ActionVerb::Open | ActionVerb::Refresh | ActionVerb::PopupClick => step.target.clone(),
            _ => {
                let view = session.observe();
                match view
                    .objects
                    .iter()
                    .find(|o| o.name == step.target || o.id == step.target)
                {
                    Some(o) => o.id.clone(),
                    None => return false,
                }
            }
        };
        session
            .perform(&Action::new(step.verb, target, step.value.clone()))
            .is_ok()
    })
}

/// Identifying attributes of a rebind candidate, restricted to the keys the
/// descriptor uses.
pub(crate) fn candidate_attributes(o: &ObjectView, keys: &[AttrKey]) -> Attributes {
    Attributes::of_object(o, keys)
}
