use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Span, TestScript, Verb};
use crate::model::AppModel;
use crate::repo::Repository;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    UnknownObject,
    InvalidVerbForType,
    MissingParameter,
    ExtraParameter,
    UnknownScreen,
    UnreachableObject,
}

impl IssueKind {
    pub fn severity(self) -> Severity {
        match self {
            IssueKind::UnknownScreen | IssueKind::UnreachableObject => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub step: usize,
    pub message: String,
    pub span: Span,
}

/// Authoring-time checks of a script against the repository and, when
/// given, the application model. An empty result means the script is clean.
pub fn validate(
    script: &TestScript,
    repo: &Repository,
    model: Option<&AppModel>,
) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut push = |kind: IssueKind, step: &super::Step, message: String| {
        issues.push(ValidationIssue {
            severity: kind.severity(),
            kind,
            step: step.index,
            message,
            span: step.span,
        })
    };
    let mut checked_reach = BTreeSet::new();

    for step in &script.steps {
        let verb = step.verb;
        if verb.takes_object() && step.object_ref.is_none() {
            push(
                IssueKind::MissingParameter,
                step,
                format!("`{verb}` needs an object"),
            );
        }
        let expected = verb.arity();
        let found = step.args.len();
        if found < expected {
            push(
                IssueKind::MissingParameter,
                step,
                format!("`{verb}` takes {expected} argument(s), found {found}"),
            );
        } else if found > expected {
            push(
                IssueKind::ExtraParameter,
                step,
                format!("`{verb}` takes {expected} argument(s), found {found}"),
            );
        }

        if let Some(obj) = &step.object_ref {
            match repo.get(obj) {
                None => push(
                    IssueKind::UnknownObject,
                    step,
                    format!("`{obj}` is not in the object repository"),
                ),
                Some(d) => {
                    if let Some(t) = d.attributes.obj_type {
                        if !verb.accepts(t) {
                            push(
                                IssueKind::InvalidVerbForType,
                                step,
                                format!("`{verb}` cannot act on `{obj}` ({t})"),
                            );
                        }
                    }
                    if let Some(m) = model {
                        if checked_reach.insert(obj.clone()) && !reachable(m, d) {
                            push(
                                IssueKind::UnreachableObject,
                                step,
                                format!("`{obj}` matches no object on any screen"),
                            );
                        }
                    }
                }
            }
        }

        if let (Some(m), Verb::Open | Verb::AssertScreen, Some(screen)) = (model, verb, step.arg())
        {
            if m.screen(screen).is_none() {
                push(
                    IssueKind::UnknownScreen,
                    step,
                    format!("no screen `{screen}` in the model"),
                );
            }
        }
    }
    issues
}

fn reachable(model: &AppModel, d: &crate::repo::ObjectDescriptor) -> bool {
    model.screens.iter().any(|s| {
        model
            .static_view(&s.id)
            .is_some_and(|v| v.objects.iter().any(|o| d.attributes.matches(o)))
    })
}
