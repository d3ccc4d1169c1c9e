//! The test-script language.
//!
//! ```text
//! test "signup happy path"
//! open "signup"
//! enter "NameField" "Alice"      # comment
//! click "SubmitButton"
//! assert_screen "welcome"
//! ```
//!
//! One step per line: a verb, an optional quoted object reference, then
//! quoted (or bare) arguments.

mod parser;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ActionVerb, ObjType};

pub use parser::{parse, parse_unchecked, serialize, ParseError, ParseErrorKind};
pub use validate::{validate, IssueKind, Severity, ValidationIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Open,
    Click,
    Enter,
    Select,
    Check,
    AssertScreen,
    AssertText,
    AssertExists,
    Wait,
}

impl Verb {
    pub const ALL: [Verb; 9] = [
        Verb::Open,
        Verb::Click,
        Verb::Enter,
        Verb::Select,
        Verb::Check,
        Verb::AssertScreen,
        Verb::AssertText,
        Verb::AssertExists,
        Verb::Wait,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Open => "open",
            Verb::Click => "click",
            Verb::Enter => "enter",
            Verb::Select => "select",
            Verb::Check => "check",
            Verb::AssertScreen => "assert_screen",
            Verb::AssertText => "assert_text",
            Verb::AssertExists => "assert_exists",
            Verb::Wait => "wait",
        }
    }

    pub fn takes_object(self) -> bool {
        !matches!(self, Verb::Open | Verb::AssertScreen | Verb::Wait)
    }

    /// Number of arguments after the object reference.
    pub fn arity(self) -> usize {
        match self {
            Verb::Click | Verb::AssertExists => 0,
            _ => 1,
        }
    }

    /// The simulator action a step with this verb performs on its object.
    pub fn action_verb(self) -> Option<ActionVerb> {
        match self {
            Verb::Click => Some(ActionVerb::Click),
            Verb::Enter => Some(ActionVerb::Enter),
            Verb::Select => Some(ActionVerb::Select),
            Verb::Check => Some(ActionVerb::Check),
            _ => None,
        }
    }

    /// Whether the verb may target an object of type `t`.
    pub fn accepts(self, t: ObjType) -> bool {
        use ObjType::*;
        match self {
            Verb::Click => matches!(t, Button | Link | Checkbox),
            Verb::Enter => matches!(t, Textfield | PasswordField),
            Verb::Select => matches!(t, Listbox | Combobox),
            Verb::Check => t == Checkbox,
            Verb::AssertText => matches!(t, Label | Textfield | Link),
            Verb::AssertExists => true,
            Verb::Open | Verb::AssertScreen | Verb::Wait => false,
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Verb::ALL.into_iter().find(|v| v.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_ref: Option<String>,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub span: Span,
}

// Source spans are provenance, not content: two scripts that serialize to the
// same canonical text compare equal.
impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.verb == other.verb
            && self.object_ref == other.object_ref
            && self.args == other.args
    }
}

impl Step {
    pub fn new(verb: Verb, object_ref: Option<&str>, args: &[&str]) -> Step {
        Step {
            index: 0,
            verb,
            object_ref: object_ref.map(str::to_string),
            args: args.iter().map(|s| s.to_string()).collect(),
            span: Span::default(),
        }
    }

    pub fn arg(&self) -> Option<&str> {
        self.args.first().map(String::as_str)
    }
}

/// A parsed script. Its id is its `test` header name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScript {
    pub id: String,
    pub name: String,
    pub steps: Vec<Step>,
}

impl TestScript {
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> TestScript {
        let name = name.into();
        let mut s = TestScript {
            id: name.clone(),
            name,
            steps,
        };
        s.reindex();
        s
    }

    /// Makes step indices dense from 0.
    pub fn reindex(&mut self) {
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.index = i;
        }
    }

    pub fn rename(&mut self, name: impl Into<String>) {
        self.name = name.into();
        self.id = self.name.clone();
    }

    pub fn to_text(&self) -> String {
        serialize(self)
    }
}
