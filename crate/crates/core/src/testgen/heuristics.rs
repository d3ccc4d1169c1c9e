use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ObjType, ObjectView, UiObject};

/// A field-name pattern with the values to use for fields that match it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueHeuristic {
    /// Case-insensitive substring of the field name.
    pub name_pattern: String,
    pub valid_value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_value: Option<String>,
    #[serde(default)]
    pub expect_rejection_of_invalid: bool,
}

impl ValueHeuristic {
    fn new(pattern: &str, valid: &str, invalid: Option<&str>) -> Self {
        ValueHeuristic {
            name_pattern: pattern.into(),
            valid_value: valid.into(),
            invalid_value: invalid.map(str::to_string),
            expect_rejection_of_invalid: invalid.is_some(),
        }
    }

    fn matches(&self, field_name: &str) -> bool {
        field_name
            .to_lowercase()
            .contains(&self.name_pattern.to_lowercase())
    }
}

pub const DEFAULT_VALUE: &str = "test value";

/// The shipped field-name database, in match order.
pub fn builtin_heuristics() -> Vec<ValueHeuristic> {
    vec![
        ValueHeuristic::new("email", "user@example.com", Some("not-an-email")),
        ValueHeuristic::new("age", "30", Some("-1")),
        ValueHeuristic::new("phone", "0412345678", Some("phone-number")),
        ValueHeuristic::new("date", "2024-01-31", Some("2024-13-45")),
        ValueHeuristic::new("zip", "3000", Some("ABCDE")),
        ValueHeuristic::new("postcode", "3000", Some("ABCDE")),
        ValueHeuristic::new("name", "Alex Smith", None),
    ]
}

#[derive(Debug, Error)]
#[error("invalid heuristics file: {0}")]
pub struct HeuristicsError(String);

pub fn load_heuristics(document: &str) -> Result<Vec<ValueHeuristic>, HeuristicsError> {
    let list: Vec<ValueHeuristic> =
        serde_json::from_str(document).map_err(|e| HeuristicsError(e.to_string()))?;
    if let Some(h) = list.iter().find(|h| h.name_pattern.is_empty()) {
        return Err(HeuristicsError(format!(
            "empty name_pattern (valid value `{}`)",
            h.valid_value
        )));
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicValue {
    pub valid: String,
    /// Invalid probe value the field is expected to reject.
    pub invalid_probe: Option<String>,
}

/// Value to put into an input field. `None` for objects that take no input.
pub fn heuristic_value_for(
    name: &str,
    obj_type: ObjType,
    options: &[String],
    heuristics: &[ValueHeuristic],
) -> Option<HeuristicValue> {
    match obj_type {
        ObjType::Listbox | ObjType::Combobox => Some(HeuristicValue {
            valid: options
                .first()
                .cloned()
                .unwrap_or_else(|| DEFAULT_VALUE.to_string()),
            invalid_probe: None,
        }),
        ObjType::Checkbox => Some(HeuristicValue {
            valid: "on".into(),
            invalid_probe: None,
        }),
        ObjType::Textfield | ObjType::PasswordField => {
            Some(match heuristics.iter().find(|h| h.matches(name)) {
                Some(h) => HeuristicValue {
                    valid: h.valid_value.clone(),
                    invalid_probe: h
                        .invalid_value
                        .clone()
                        .filter(|_| h.expect_rejection_of_invalid),
                },
                None => HeuristicValue {
                    valid: DEFAULT_VALUE.into(),
                    invalid_probe: None,
                },
            })
        }
        ObjType::Button | ObjType::Link | ObjType::Label => None,
    }
}

pub fn heuristic_value(
    field: &ObjectView,
    heuristics: &[ValueHeuristic],
) -> Option<HeuristicValue> {
    heuristic_value_for(&field.name, field.obj_type, &field.options, heuristics)
}

pub fn heuristic_value_of(obj: &UiObject, heuristics: &[ValueHeuristic]) -> Option<HeuristicValue> {
    heuristic_value_for(&obj.name, obj.obj_type, &obj.options, heuristics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(name: &str) -> Option<HeuristicValue> {
        heuristic_value_for(name, ObjType::Textfield, &[], &builtin_heuristics())
    }

    #[test]
    fn email_age_and_default() {
        assert_eq!(
            text("UserEmail"),
            Some(HeuristicValue {
                valid: "user@example.com".into(),
                invalid_probe: Some("not-an-email".into())
            })
        );
        assert_eq!(
            text("Age"),
            Some(HeuristicValue {
                valid: "30".into(),
                invalid_probe: Some("-1".into())
            })
        );
        assert_eq!(
            text("Comment"),
            Some(HeuristicValue {
                valid: "test value".into(),
                invalid_probe: None
            })
        );
    }

    #[test]
    fn selects_pick_first_option() {
        let opts = vec!["Female".to_string(), "Male".into(), "Other".into()];
        let v = heuristic_value_for(
            "GenderField",
            ObjType::Listbox,
            &opts,
            &builtin_heuristics(),
        )
        .unwrap();
        assert_eq!(v.valid, "Female");
        assert!(heuristic_value_for("Hint", ObjType::Label, &[], &builtin_heuristics()).is_none());
    }

    #[test]
    fn file_overrides() {
        let h =
            load_heuristics(r#"[{"name_pattern": "comment", "valid_value": "hello"}]"#).unwrap();
        assert_eq!(
            heuristic_value_for("Comment", ObjType::Textfield, &[], &h)
                .unwrap()
                .valid,
            "hello"
        );
        assert!(load_heuristics(r#"[{"name_pattern": "", "valid_value": "x"}]"#).is_err());
    }
}
