use serde::{Deserialize, Serialize};

use super::strategies::{
    apply_custom, apply_explore, apply_fill, apply_popup, candidate_attributes, plan_custom,
    plan_explore, plan_fill, plan_popup, plan_relogin, refresh_retry, relogin, CandidateFilter,
};
use super::{
    decision_key, EventDecision, EventOutcome, KnowledgeBase, PopupDefinition, RecoveryConfig,
    RecoveryDetail, RecoveryEvent, Strategy, TriggerKind,
};
use crate::dsl::{Step, Verb};
use crate::matcher::{fuzzy_match, SimilarityConfig};
use crate::model::{Action, ActionOutcome, ObjType, ObjectView, SimSession};
use crate::repo::{resolve_exact, Repository};
use crate::testgen::ValueHeuristic;

/// Why a step could not proceed, in terms the strategies respond to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocked {
    pub trigger: TriggerKind,
    /// Guard objects still unset, for `guard_unsatisfied`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmet: Vec<String>,
    pub message: String,
}

impl Blocked {
    fn new(trigger: TriggerKind, message: impl Into<String>) -> Self {
        Blocked {
            trigger,
            unmet: Vec::new(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepAttempt {
    Passed,
    Blocked(Blocked),
    /// Not recoverable: assertion mismatch, invalid action, ambiguity.
    Failed(String),
}

fn outcome_attempt(outcome: ActionOutcome, what: &str) -> StepAttempt {
    match outcome {
        ActionOutcome::Ok => StepAttempt::Passed,
        ActionOutcome::NoSuchObject => StepAttempt::Blocked(Blocked::new(
            TriggerKind::ObjectNotFound,
            format!("{what} not found"),
        )),
        ActionOutcome::BlockedByPopup => StepAttempt::Blocked(Blocked::new(
            TriggerKind::BlockedByPopup,
            "a popup is in the way",
        )),
        ActionOutcome::GuardUnsatisfied { unmet } => StepAttempt::Blocked(Blocked {
            trigger: TriggerKind::GuardUnsatisfied,
            message: format!("required field(s) not set: {}", unmet.join(", ")),
            unmet,
        }),
        ActionOutcome::LoadFailure => StepAttempt::Blocked(Blocked::new(
            TriggerKind::LoadFailure,
            "the screen did not load",
        )),
        ActionOutcome::InvalidAction { reason } => StepAttempt::Failed(reason),
    }
}

/// Runs one step. `binding` overrides descriptor resolution with a concrete
/// object id; `retry` marks a repeat after recovery, where an `open` whose
/// screen is already loaded counts as done.
pub fn try_step(
    session: &mut SimSession,
    step: &Step,
    repo: &Repository,
    binding: Option<&str>,
    retry: bool,
) -> StepAttempt {
    let view = session.observe();
    let arg = step.arg().unwrap_or("");
    match step.verb {
        Verb::Wait => return StepAttempt::Passed,
        Verb::Open => {
            if retry && view.screen_id == arg && !view.loading && view.popup.is_none() {
                return StepAttempt::Passed;
            }
            return outcome_attempt(
                session.perform(&Action::open(arg)),
                &format!("screen `{arg}`"),
            );
        }
        Verb::AssertScreen => {
            return if view.screen_id == arg {
                StepAttempt::Passed
            } else {
                StepAttempt::Blocked(Blocked::new(
                    TriggerKind::ObjectNotFound,
                    format!("expected screen `{arg}`, on `{}`", view.screen_id),
                ))
            };
        }
        _ => {}
    }

    let logical = step.object_ref.as_deref().unwrap_or("");
    let Some(descriptor) = repo.get(logical) else {
        return StepAttempt::Failed(format!("`{logical}` is not in the object repository"));
    };
    if view.loading {
        return StepAttempt::Blocked(Blocked::new(
            TriggerKind::LoadFailure,
            "the screen did not load",
        ));
    }
    let acts = step.verb.action_verb();
    if acts.is_some() && view.popup.is_some() {
        return StepAttempt::Blocked(Blocked::new(
            TriggerKind::BlockedByPopup,
            "a popup is in the way",
        ));
    }
    let target: ObjectView = match binding {
        Some(id) => match view.object(id) {
            Some(o) => o.clone(),
            None => {
                return StepAttempt::Blocked(Blocked::new(
                    TriggerKind::ObjectNotFound,
                    format!(
                        "`{logical}` (bound to `{id}`) not found on `{}`",
                        view.screen_id
                    ),
                ))
            }
        },
        None => match resolve_exact(&view, descriptor) {
            Ok(Some(o)) => o,
            Ok(None) => {
                return StepAttempt::Blocked(Blocked::new(
                    TriggerKind::ObjectNotFound,
                    format!("`{logical}` not found on `{}`", view.screen_id),
                ))
            }
            Err(e) => return StepAttempt::Failed(e.to_string()),
        },
    };
    match (step.verb, acts) {
        (Verb::AssertExists, _) => StepAttempt::Passed,
        (Verb::AssertText, _) => {
            let actual = if matches!(target.obj_type, ObjType::Textfield | ObjType::PasswordField) {
                &target.value
            } else {
                &target.text
            };
            if actual == arg {
                StepAttempt::Passed
            } else {
                StepAttempt::Failed(format!("`{logical}` reads {actual:?}, expected {arg:?}"))
            }
        }
        (_, Some(av)) => {
            let value = (step.verb != Verb::Click).then(|| arg.to_string());
            outcome_attempt(
                session.perform(&Action::new(av, target.id, value)),
                &format!("`{logical}`"),
            )
        }
        _ => StepAttempt::Failed(format!("`{}` cannot run here", step.verb)),
    }
}

/// Inputs shared by every strategy for one blocked step.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryContext<'a> {
    pub script_id: &'a str,
    pub step: &'a Step,
    pub repo: &'a Repository,
    pub config: &'a RecoveryConfig,
    pub similarity: &'a SimilarityConfig,
    pub heuristics: &'a [ValueHeuristic],
    pub kb: &'a KnowledgeBase,
    /// Popup definitions learned earlier in the same script run.
    pub learned: &'a [PopupDefinition],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub events: Vec<RecoveryEvent>,
    /// The step has now passed.
    pub resume: bool,
    /// A strategy cleared the trigger but the retry hit a different one.
    pub next: Option<Blocked>,
    /// The retry failed in a way no strategy handles.
    pub failure: Option<String>,
    /// Object id the step is now bound to, after a rebind.
    pub binding: Option<String>,
    pub learned: Vec<PopupDefinition>,
}

enum Applied {
    /// Could not clear the trigger.
    No,
    Yes {
        binding: Option<String>,
    },
}

/// One pass of the strategy pipeline over `blocked`. Strategies run in the
/// configured order; a strategy whose decision key the tester rejected is
/// recorded as skipped and not attempted.
pub fn attempt_recovery(
    session: &mut SimSession,
    ctx: &RecoveryContext<'_>,
    blocked: &Blocked,
    binding: Option<String>,
) -> RecoveryOutcome {
    let mut out = RecoveryOutcome {
        events: Vec::new(),
        resume: false,
        next: None,
        failure: None,
        binding: binding.clone(),
        learned: Vec::new(),
    };
    let trigger = blocked.trigger;
    let descriptor = ctx.step.object_ref.as_deref().and_then(|r| ctx.repo.get(r));
    let filter = CandidateFilter {
        repo: Some(ctx.repo),
        actionable: ctx.step.verb.action_verb().is_some(),
    };
    let mut tried = Vec::new();

    for &strategy in &ctx.config.strategy_order {
        if tried.contains(&strategy) || !strategy.applies_to(trigger) {
            continue;
        }
        tried.push(strategy);
        let view = session.observe();
        let mut learned = None;
        let mut custom = None;
        let detail = match strategy {
            Strategy::PopupResolution => {
                let learned_so_far: Vec<PopupDefinition> =
                    ctx.learned.iter().chain(&out.learned).cloned().collect();
                let Some(p) = plan_popup(&view, ctx.kb, &learned_so_far, ctx.config) else {
                    continue;
                };
                learned = p.learned;
                p.detail
            }
            Strategy::FillRequiredField => plan_fill(&view, &blocked.unmet, ctx.heuristics),
            Strategy::FuzzyRebind => {
                let Some(d) = descriptor else { continue };
                let m = fuzzy_match(
                    d,
                    &filter.candidates(&view, d),
                    view.dimensions,
                    ctx.similarity,
                );
                let Some(best) = m.best else { continue };
                let Some(o) = view.object(&best.candidate) else {
                    continue;
                };
                RecoveryDetail::FuzzyRebind {
                    logical_name: d.logical_name.clone(),
                    screen: view.screen_id.clone(),
                    candidate: o.id.clone(),
                    candidate_attributes: candidate_attributes(o, &d.attributes.keys()),
                    score: best.overall,
                    runner_up: m.ranking.get(1).map(|r| (r.candidate.clone(), r.overall)),
                }
            }
            Strategy::RefreshRetry => RecoveryDetail::RefreshRetry {
                screen: view.screen_id.clone(),
                attempts: 0,
                max_attempts: ctx.config.refresh_max_attempts,
            },
            Strategy::Relogin => {
                let Some(c) = &ctx.config.credentials else {
                    continue;
                };
                let Some(d) = plan_relogin(&view, &c.username) else {
                    continue;
                };
                d
            }
            Strategy::AdjacentExploration => {
                let Some(d) = descriptor else { continue };
                let Some(detail) = plan_explore(session, d, ctx.similarity, ctx.config, &filter)
                else {
                    continue;
                };
                detail
            }
            Strategy::Custom => {
                let Some((action, detail)) = plan_custom(&view, ctx.kb, trigger) else {
                    continue;
                };
                custom = Some(action);
                detail
            }
        };

        let key = decision_key(ctx.script_id, ctx.step.index, &detail);
        let mut event = RecoveryEvent {
            script_id: ctx.script_id.to_string(),
            step: ctx.step.index,
            trigger,
            strategy,
            detail,
            outcome: EventOutcome::Exhausted,
            decision: ctx
                .kb
                .decision(&key)
                .map_or(EventDecision::Pending, Into::into),
            decision_key: key,
            skipped: false,
        };
        if event.decision == EventDecision::Rejected {
            event.skipped = true;
            out.events.push(event);
            continue;
        }

        let applied = match strategy {
            Strategy::PopupResolution => {
                if apply_popup(session, &event.detail) {
                    Applied::Yes {
                        binding: binding.clone(),
                    }
                } else {
                    Applied::No
                }
            }
            Strategy::FillRequiredField => {
                if apply_fill(session, &event.detail) {
                    Applied::Yes {
                        binding: binding.clone(),
                    }
                } else {
                    Applied::No
                }
            }
            Strategy::FuzzyRebind => match &event.detail {
                RecoveryDetail::FuzzyRebind { candidate, .. } => Applied::Yes {
                    binding: Some(candidate.clone()),
                },
                _ => unreachable!(),
            },
            Strategy::RefreshRetry => {
                let (detail, ok) = refresh_retry(session, ctx.config.refresh_max_attempts);
                event.detail = detail;
                if ok {
                    Applied::Yes {
                        binding: binding.clone(),
                    }
                } else {
                    Applied::No
                }
            }
            Strategy::Relogin => {
                let c = ctx
                    .config
                    .credentials
                    .as_ref()
                    .expect("planned with credentials");
                match relogin(session, &c.username, &c.password) {
                    Some((detail, ok)) => {
                        event.detail = detail;
                        if ok {
                            Applied::Yes {
                                binding: binding.clone(),
                            }
                        } else {
                            Applied::No
                        }
                    }
                    None => Applied::No,
                }
            }
            Strategy::AdjacentExploration => {
                if apply_explore(session, &event.detail) {
                    match &event.detail {
                        RecoveryDetail::AdjacentExploration { candidate, .. } => Applied::Yes {
                            binding: Some(candidate.clone()),
                        },
                        _ => unreachable!(),
                    }
                } else {
                    Applied::No
                }
            }
            Strategy::Custom => {
                if apply_custom(session, custom.expect("planned custom action")) {
                    Applied::Yes {
                        binding: binding.clone(),
                    }
                } else {
                    Applied::No
                }
            }
        };
        let Applied::Yes {
            binding: new_binding,
        } = applied
        else {
            out.events.push(event);
            continue;
        };
        if let Some(l) = learned {
            out.learned.push(l);
        }

        match try_step(session, ctx.step, ctx.repo, new_binding.as_deref(), true) {
            StepAttempt::Passed => {
                event.outcome = EventOutcome::Resumed;
                out.events.push(event);
                out.resume = true;
                out.binding = new_binding;
                return out;
            }
            StepAttempt::Blocked(b) if b.trigger != trigger => {
                event.outcome = EventOutcome::Resumed;
                out.events.push(event);
                out.next = Some(b);
                out.binding = new_binding;
                return out;
            }
            StepAttempt::Blocked(_) => out.events.push(event),
            StepAttempt::Failed(reason) => {
                out.events.push(event);
                out.failure = Some(reason);
                return out;
            }
        }
    }
    out
}
