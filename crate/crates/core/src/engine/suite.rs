use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dsl::{parse_unchecked, ParseError, TestScript};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteFile {
    pub path: PathBuf,
    pub script: TestScript,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("script id `{id}` is used by both {first} and {second}")]
    DuplicateId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, errors: Vec<ParseError>) -> SuiteError {
    let e = &errors[0];
    SuiteError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        column: e.column,
        message: e.kind.to_string(),
    }
}

/// Reads every script file directly inside `dir`, in file name order.
/// Hidden files and `.json` files are skipped. Arity problems are left for
/// the validator to report.
pub fn load_suite(dir: &Path) -> Result<Vec<SuiteFile>, SuiteError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || path.extension().is_some_and(|e| e == "json") || !path.is_file()
        {
            continue;
        }
        paths.push(path);
    }
    paths.sort();
    let mut out: Vec<SuiteFile> = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let script = parse_unchecked(&text).map_err(|e| parse_error(&path, e))?;
        if let Some(prev) = out.iter().find(|f| f.script.id == script.id) {
            return Err(SuiteError::DuplicateId {
                id: script.id,
                first: prev.path.clone(),
                second: path,
            });
        }
        out.push(SuiteFile { path, script });
    }
    Ok(out)
}
