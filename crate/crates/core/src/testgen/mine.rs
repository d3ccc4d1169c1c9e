use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GenerationConfig, GenerationError};
use crate::dsl::{Step, TestScript, Verb};

pub const MASKED: &str = "«masked»";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionLogRecord {
    pub session_id: String,
    pub seq: u64,
    pub screen: String,
    #[serde(default)]
    pub object: String,
    pub action: String,
    #[serde(default)]
    pub value: Option<String>,
}

/// Parses a JSON-lines interaction log; blank lines are ignored.
pub fn load_interaction_log(document: &str) -> Result<Vec<InteractionLogRecord>, GenerationError> {
    document
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GenerationError::Log {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineOutput {
    pub scripts: Vec<TestScript>,
    /// How many sessions followed each emitted script's path.
    pub frequencies: Vec<usize>,
    pub warnings: Vec<String>,
}

type PathKey = Vec<(String, String, String)>;

fn log_verb(action: &str) -> Option<Verb> {
    match action {
        "open" => Some(Verb::Open),
        "click" => Some(Verb::Click),
        "enter" => Some(Verb::Enter),
        "select" => Some(Verb::Select),
        "check" => Some(Verb::Check),
        _ => None,
    }
}

/// Turns the most frequent distinct user paths into scripts.
///
/// Paths compare on (screen, object, action) only; the emitted values come
/// from the path's most recent session, taken to be the one with the
/// greatest session id.
pub fn mine_logs(records: &[InteractionLogRecord], config: &GenerationConfig) -> MineOutput {
    let mut warnings = Vec::new();
    let mut sessions: BTreeMap<&str, Vec<&InteractionLogRecord>> = BTreeMap::new();
    for r in records {
        sessions.entry(r.session_id.as_str()).or_default().push(r);
    }

    // path → (count, latest session id, records of that session)
    let mut paths: BTreeMap<PathKey, (usize, &str, Vec<&InteractionLogRecord>)> = BTreeMap::new();
    for (sid, mut recs) in sessions {
        recs.sort_by_key(|r| r.seq);
        let first = recs[0].seq;
        if let Some((i, _)) = recs
            .iter()
            .enumerate()
            .find(|(i, r)| r.seq != first + *i as u64)
        {
            warnings.push(format!(
                "session `{sid}` skipped: sequence gap or duplicate at seq {}",
                recs[i].seq
            ));
            continue;
        }
        if let Some(r) = recs.iter().find(|r| log_verb(&r.action).is_none()) {
            warnings.push(format!(
                "session `{sid}` skipped: unknown action `{}`",
                r.action
            ));
            continue;
        }
        let key: PathKey = recs
            .iter()
            .map(|r| (r.screen.clone(), r.object.clone(), r.action.clone()))
            .collect();
        let entry = paths.entry(key).or_insert((0, sid, Vec::new()));
        entry.0 += 1;
        if sid >= entry.1 {
            entry.1 = sid;
            entry.2 = recs;
        }
    }

    let mut ranked: Vec<(PathKey, usize, Vec<&InteractionLogRecord>)> = paths
        .into_iter()
        .map(|(k, (n, _, recs))| (k, n, recs))
        .collect();
    // stable sort keeps lexicographic key order among equal counts
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    ranked.truncate(config.top_k_sessions);

    let masked = |object: &str| {
        let lower = object.to_lowercase();
        config
            .mask_fields
            .iter()
            .any(|p| lower.contains(&p.to_lowercase()))
    };
    let mut scripts = Vec::new();
    let mut frequencies = Vec::new();
    for (rank, (_, count, recs)) in ranked.into_iter().enumerate() {
        let mut steps = Vec::new();
        if recs[0].action != "open" {
            steps.push(Step::new(Verb::Open, None, &[&recs[0].screen]));
        }
        for (i, r) in recs.iter().enumerate() {
            if i > 0 && r.screen != recs[i - 1].screen {
                steps.push(Step::new(Verb::AssertScreen, None, &[&r.screen]));
            }
            let raw = r.value.clone().unwrap_or_default();
            let value = if masked(&r.object) {
                MASKED.to_string()
            } else {
                raw
            };
            let step = match log_verb(&r.action).expect("checked above") {
                Verb::Open => Step::new(Verb::Open, None, &[&r.screen]),
                Verb::Click => Step::new(Verb::Click, Some(&r.object), &[]),
                v => Step::new(v, Some(&r.object), &[&value]),
            };
            steps.push(step);
        }
        scripts.push(TestScript::new(format!("mined-{:03}", rank + 1), steps));
        frequencies.push(count);
    }
    MineOutput {
        scripts,
        frequencies,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(
        sid: &str,
        seq: u64,
        screen: &str,
        object: &str,
        action: &str,
        value: Option<&str>,
    ) -> InteractionLogRecord {
        InteractionLogRecord {
            session_id: sid.into(),
            seq,
            screen: screen.into(),
            object: object.into(),
            action: action.into(),
            value: value.map(str::to_string),
        }
    }

    #[test]
    fn empty_log() {
        let out = mine_logs(&[], &GenerationConfig::default());
        assert!(out.scripts.is_empty());
    }

    #[test]
    fn masks_and_uses_latest_values() {
        let cfg = GenerationConfig {
            mask_fields: vec!["pass".into()],
            ..Default::default()
        };
        let recs = vec![
            rec("s1", 0, "login", "UserField", "enter", Some("old")),
            rec("s1", 1, "login", "PasswordField", "enter", Some("hunter2")),
            rec("s2", 0, "login", "UserField", "enter", Some("new")),
            rec("s2", 1, "login", "PasswordField", "enter", Some("hunter3")),
        ];
        let out = mine_logs(&recs, &cfg);
        assert_eq!(out.scripts.len(), 1);
        assert_eq!(out.frequencies, vec![2]);
        assert_eq!(
            out.scripts[0].to_text(),
            "test \"mined-001\"\nopen \"login\"\nenter \"UserField\" \"new\"\nenter \"PasswordField\" \"«masked»\"\n"
        );
    }

    #[test]
    fn gap_skips_session_with_warning() {
        let recs = vec![
            rec("s1", 0, "a", "X", "click", None),
            rec("s1", 2, "a", "Y", "click", None),
        ];
        let out = mine_logs(&recs, &GenerationConfig::default());
        assert!(out.scripts.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn parses_json_lines() {
        let log = "{\"session_id\":\"a\",\"seq\":0,\"screen\":\"s\",\"object\":\"B\",\"action\":\"click\",\"value\":null}\n\n";
        assert_eq!(load_interaction_log(log).unwrap().len(), 1);
        assert!(matches!(
            load_interaction_log("{oops"),
            Err(GenerationError::Log { line: 1, .. })
        ));
    }
}
