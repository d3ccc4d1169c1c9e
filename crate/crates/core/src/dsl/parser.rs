use std::fmt;

use thiserror::Error;

use super::{Span, Step, TestScript, Verb};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownVerb(String),
    Arity {
        verb: Verb,
        expected: usize,
        found: usize,
    },
    MissingHeader,
    NoSteps,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownVerb(v) => write!(f, "unknown verb `{v}`"),
            ParseErrorKind::Arity {
                verb,
                expected,
                found,
            } => {
                write!(f, "`{verb}` takes {expected} token(s), found {found}")
            }
            ParseErrorKind::MissingHeader => f.write_str("expected `test \"<name>\"` header"),
            ParseErrorKind::NoSteps => f.write_str("script has no steps"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

struct Token {
    text: String,
    column: usize,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let err = |column: usize, msg: &str| ParseError {
        line: line_no,
        column,
        kind: ParseErrorKind::Syntax(msg.to_string()),
    };
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let column = i + 1;
        if c == '"' {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err(column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(err(i + 1, "invalid escape")),
                        };
                        text.push(esc);
                        i += 2;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            if chars
                .get(i)
                .is_some_and(|c| !c.is_whitespace() && *c != '#')
            {
                return Err(err(i + 1, "expected whitespace after string"));
            }
            tokens.push(Token { text, column });
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '#' {
                if chars[i] == '"' {
                    return Err(err(i + 1, "quote inside bare word"));
                }
                i += 1;
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                column,
            });
        }
    }
    Ok(tokens)
}

/// Parses a script, rejecting arity violations.
pub fn parse(text: &str) -> Result<TestScript, Vec<ParseError>> {
    parse_inner(text, true)
}

/// Parses a script but keeps steps with the wrong number of tokens, so the
/// validator can report them as missing or extra parameters.
pub fn parse_unchecked(text: &str) -> Result<TestScript, Vec<ParseError>> {
    parse_inner(text, false)
}

fn parse_inner(text: &str, strict: bool) -> Result<TestScript, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut name: Option<(String, usize)> = None;
    let mut steps = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens = match tokenize(raw, line_no) {
            Ok(t) => t,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let Some((head, rest)) = tokens.split_first() else {
            continue;
        };
        let at = |column: usize, kind: ParseErrorKind| ParseError {
            line: line_no,
            column,
            kind,
        };

        if head.text == "test" {
            if name.is_some() {
                errors.push(at(
                    head.column,
                    ParseErrorKind::Syntax("duplicate test header".into()),
                ));
            } else if rest.len() != 1 {
                errors.push(at(head.column, ParseErrorKind::MissingHeader));
            } else {
                name = Some((rest[0].text.clone(), line_no));
            }
            continue;
        }
        if name.is_none() {
            errors.push(at(head.column, ParseErrorKind::MissingHeader));
            // report once; later lines would all repeat it
            name = Some((String::new(), line_no));
            continue;
        }
        let Ok(verb) = head.text.parse::<Verb>() else {
            errors.push(at(
                head.column,
                ParseErrorKind::UnknownVerb(head.text.clone()),
            ));
            continue;
        };
        let expected = verb.arity() + usize::from(verb.takes_object());
        if strict && rest.len() != expected {
            errors.push(at(
                head.column,
                ParseErrorKind::Arity {
                    verb,
                    expected,
                    found: rest.len(),
                },
            ));
            continue;
        }
        let (object_ref, args) = if verb.takes_object() {
            match rest.split_first() {
                Some((obj, args)) => (Some(obj.text.clone()), args),
                None => (None, rest),
            }
        } else {
            (None, rest)
        };
        let args: Vec<String> = args.iter().map(|t| t.text.clone()).collect();
        if let Some(bad) = check_arg_values(verb, &args) {
            errors.push(at(head.column, ParseErrorKind::Syntax(bad)));
            continue;
        }
        steps.push(Step {
            index: steps.len(),
            verb,
            object_ref,
            args,
            span: Span {
                line: line_no,
                column: head.column,
            },
        });
    }

    match &name {
        None => errors.push(ParseError {
            line: 1,
            column: 1,
            kind: ParseErrorKind::MissingHeader,
        }),
        Some((_, line)) if steps.is_empty() && errors.is_empty() => errors.push(ParseError {
            line: *line,
            column: 1,
            kind: ParseErrorKind::NoSteps,
        }),
        _ => {}
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let (name, _) = name.expect("header checked");
    Ok(TestScript {
        id: name.clone(),
        name,
        steps,
    })
}

fn check_arg_values(verb: Verb, args: &[String]) -> Option<String> {
    let first = args.first()?;
    match verb {
        Verb::Wait if first.parse::<u32>().is_err() => {
            Some(format!("wait expects a tick count, got `{first}`"))
        }
        Verb::Check if !matches!(first.as_str(), "on" | "off") => {
            Some(format!("check expects on/off, got `{first}`"))
        }
        _ => None,
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text: header line, then one line per step, every token quoted.
pub fn serialize(script: &TestScript) -> String {
    let mut out = format!("test {}\n", quote(&script.name));
    for step in &script.steps {
        out.push_str(step.verb.as_str());
        for tok in step.object_ref.iter().chain(step.args.iter()) {
            out.push(' ');
            out.push_str(&quote(tok));
        }
        out.push('\n');
    }
    out
}
