//! Application configuration: one JSON file drives the CLI.
//!
//! Every field has a default, so a partial (or absent) config file works;
//! `--seed` on the command line overrides the seeds in the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::DecodeLimits;
use crate::harness::{FieldMap, GeneratorConfig};
use crate::neural::TrainConfig;
use crate::phrase_table::InduceParams;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AppConfig {
    pub generator: GeneratorConfig,
    pub induce: InduceConfig,
    /// Phrase-table prediction threshold (strict greater-than).
    pub primitive_threshold: f64,
    /// Sketch decoder training.
    pub train: TrainConfig,
    /// Path scorer training.
    pub scorer_train: TrainConfig,
    pub limits: LimitsConfig,
    pub field_map: FieldMap,
    /// Select header attached to predicted queries.
    pub select_meta: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct InduceConfig {
    pub max_n: usize,
    pub min_count: usize,
    pub floor_prob: f64,
}

impl Default for InduceConfig {
    fn default() -> Self {
        let p = InduceParams::default();
        InduceConfig { max_n: p.max_n, min_count: p.min_count, floor_prob: p.floor_prob }
    }
}

impl From<InduceConfig> for InduceParams {
    fn from(c: InduceConfig) -> Self {
        InduceParams { max_n: c.max_n, min_count: c.min_count, floor_prob: c.floor_prob }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LimitsConfig {
    pub max_depth: usize,
    pub max_vertices: usize,
    pub max_expansions: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let l = DecodeLimits::default();
        LimitsConfig {
            max_depth: l.max_depth,
            max_vertices: l.max_vertices,
            max_expansions: l.max_expansions,
        }
    }
}

impl From<LimitsConfig> for DecodeLimits {
    fn from(c: LimitsConfig) -> Self {
        DecodeLimits {
            max_depth: c.max_depth,
            max_vertices: c.max_vertices,
            max_expansions: c.max_expansions,
        }
    }
}

impl Default for AppConfig {
    fn default() -> Self {
        let scorer_train = TrainConfig { epochs: 200, learning_rate: 1.0, ..TrainConfig::desk_scale() };
        AppConfig {
            generator: GeneratorConfig::default(),
            induce: InduceConfig::default(),
            primitive_threshold: 0.5,
            train: TrainConfig::desk_scale(),
            scorer_train,
            limits: LimitsConfig::default(),
            field_map: FieldMap::default(),
            select_meta: "DISTINCT ?x0".to_string(),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }

    /// Overrides every embedded seed (generator and both training configs).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.generator.seed = seed;
        self.train.seed = seed;
        self.scorer_train.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_file_yields_defaults() {
        let parsed: AppConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, AppConfig::default());
    }

    #[test]
    fn partial_config_overrides_one_field() {
        let parsed: AppConfig =
            serde_json::from_str("{\"primitive_threshold\": 0.25}").unwrap();
        assert_eq!(parsed.primitive_threshold, 0.25);
        assert_eq!(parsed.select_meta, "DISTINCT ?x0");
    }

    #[test]
    fn seed_override_reaches_all_components() {
        let cfg = AppConfig::default().with_seed(42);
        assert_eq!(cfg.generator.seed, 42);
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.scorer_train.seed, 42);
    }
}
