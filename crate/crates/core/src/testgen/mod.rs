//! Automatic test generation: crawling the application model and mining
//! user interaction logs.

mod crawl;
mod heuristics;
mod mine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crawl::{crawl_generate, derive_descriptor, CrawlOutput};
pub use heuristics::{
    builtin_heuristics, heuristic_value, heuristic_value_for, heuristic_value_of, load_heuristics,
    HeuristicValue, HeuristicsError, ValueHeuristic, DEFAULT_VALUE,
};
pub use mine::{load_interaction_log, mine_logs, InteractionLogRecord, MineOutput, MASKED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub max_depth: usize,
    pub max_scripts: usize,
    pub options_per_select: usize,
    pub top_k_sessions: usize,
    pub mask_fields: Vec<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            max_depth: 5,
            max_scripts: 50,
            options_per_select: 3,
            top_k_sessions: 10,
            mask_fields: Vec::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerationError {
    #[error("generation limit `{0}` must be positive")]
    NonPositive(&'static str),
    #[error("interaction log line {line}: {message}")]
    Log { line: usize, message: String },
}

impl GenerationConfig {
    pub fn check(&self) -> Result<(), GenerationError> {
        for (name, v) in [
            ("max_depth", self.max_depth),
            ("max_scripts", self.max_scripts),
            ("options_per_select", self.options_per_select),
            ("top_k_sessions", self.top_k_sessions),
        ] {
            if v == 0 {
                return Err(GenerationError::NonPositive(name));
            }
        }
        Ok(())
    }
}
