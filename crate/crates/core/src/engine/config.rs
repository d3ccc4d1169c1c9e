use serde::{Deserialize, Serialize};

use crate::matcher::SimilarityConfig;
use crate::recovery::{Credentials, RecoveryConfig, Strategy};
use crate::testgen::{builtin_heuristics, ValueHeuristic};

/// What happens after a step fails for good.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegacyMode {
    /// Skip the remaining steps of the script.
    Abort,
    /// Carry on with the next step.
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub popup_match_threshold: f64,
    pub min_popup_confidence: f64,
    pub learned_popup_confidence: f64,
    pub refresh_max_attempts: u32,
    pub explore_max_depth: usize,
    pub max_passes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        let r = RecoveryConfig::default();
        Limits {
            popup_match_threshold: r.popup_match_threshold,
            min_popup_confidence: r.min_popup_confidence,
            learned_popup_confidence: r.learned_popup_confidence,
            refresh_max_attempts: r.refresh_max_attempts,
            explore_max_depth: r.explore_max_depth,
            max_passes: r.max_passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub similarity: SimilarityConfig,
    pub adaptive: bool,
    pub legacy_mode: LegacyMode,
    /// Refuse to run scripts with validation errors.
    pub validate_before_run: bool,
    pub strategy_order: Vec<Strategy>,
    pub credentials: Option<Credentials>,
    pub dismissal_lexicon: Vec<String>,
    pub navigation_lexicon: Vec<String>,
    pub limits: Limits,
    pub heuristics: Vec<ValueHeuristic>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let r = RecoveryConfig::default();
        EngineConfig {
            similarity: SimilarityConfig::default(),
            adaptive: true,
            legacy_mode: LegacyMode::Abort,
            validate_before_run: true,
            strategy_order: r.strategy_order,
            credentials: None,
            dismissal_lexicon: r.dismissal_lexicon,
            navigation_lexicon: r.navigation_lexicon,
            limits: Limits::default(),
            heuristics: builtin_heuristics(),
        }
    }
}

impl EngineConfig {
    pub fn load(document: &str) -> Result<Self, String> {
        let c: EngineConfig = serde_json::from_str(document).map_err(|e| e.to_string())?;
        if c.limits.max_passes == 0 {
            return Err("limits.max_passes must be positive".into());
        }
        Ok(c)
    }

    pub fn recovery_config(&self) -> RecoveryConfig {
        let l = &self.limits;
        RecoveryConfig {
            strategy_order: self.strategy_order.clone(),
            credentials: self.credentials.clone(),
            dismissal_lexicon: self.dismissal_lexicon.clone(),
            navigation_lexicon: self.navigation_lexicon.clone(),
            popup_match_threshold: l.popup_match_threshold,
            min_popup_confidence: l.min_popup_confidence,
            learned_popup_confidence: l.learned_popup_confidence,
            refresh_max_attempts: l.refresh_max_attempts,
            explore_max_depth: l.explore_max_depth,
            max_passes: l.max_passes,
        }
    }
}
