//! Single JSON pipeline configuration: the experiment record. Unknown keys
//! are rejected everywhere; every section has defaults so `{}` is a valid
//! config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{CatalogConfig, DatasetMode};
use crate::error::{Error, Result};
use crate::kinetics::KappaMode;
use crate::models::search::{HyperSpace, SearchStrategy};
use crate::models::Family;
use crate::phase::RegimeThresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// Raw sweep spacing (quadrature runs at these temperatures only).
    pub raw_step: f64,
    /// Augmented spacing for the regenerated dense curves.
    pub augment_step: f64,
    /// Arrhenius fit window.
    pub fit_t_min: f64,
    pub fit_t_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_min: 50.0,
            t_max: 1000.0,
            raw_step: 25.0,
            augment_step: 1.0,
            fit_t_min: 200.0,
            fit_t_max: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub families: Vec<Family>,
    pub search_budget: usize,
    pub strategy: SearchStrategy,
    pub space: HyperSpace,
    /// Background sample size for Shapley attribution.
    pub background_rows: usize,
    /// How many dataset rows to explain (seeded sample).
    pub explain_rows: usize,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            families: crate::models::ALL_FAMILIES.to_vec(),
            search_budget: 3,
            strategy: SearchStrategy::Tpe,
            space: HyperSpace::default(),
            background_rows: 256,
            explain_rows: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitsConfig {
    pub kfold_k: usize,
    pub test_fraction: f64,
    /// Include the leave-one-system-out plans in benchmarks.
    pub loo: bool,
}

impl Default for SplitsConfig {
    fn default() -> Self {
        SplitsConfig {
            kfold_k: 10,
            test_fraction: 0.10,
            loo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub panel_temperatures: Vec<f64>,
    pub thresholds: RegimeThresholds,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            panel_temperatures: (1..=8).map(|i| 100.0 * i as f64).collect(),
            thresholds: RegimeThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: String,
    pub kappa_mode: KappaMode,
    pub dataset_mode: DatasetMode,
    pub catalog: CatalogConfig,
    pub grid: GridConfig,
    pub models: ModelsConfig,
    pub splits: SplitsConfig,
    pub phase: PhaseConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 20260823,
            output_dir: "out".to_string(),
            kappa_mode: KappaMode::Wkb,
            dataset_mode: DatasetMode::Arrhenius,
            catalog: CatalogConfig::default(),
            grid: GridConfig::default(),
            models: ModelsConfig::default(),
            splits: SplitsConfig::default(),
            phase: PhaseConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.t_min > 0.0 && g.t_max > g.t_min && g.raw_step > 0.0 && g.augment_step > 0.0) {
            return Err(Error::Spec(format!(
                "invalid grid: t_min={} t_max={} raw_step={} augment_step={}",
                g.t_min, g.t_max, g.raw_step, g.augment_step
            )));
        }
        if !(g.fit_t_min >= g.t_min && g.fit_t_max <= g.t_max && g.fit_t_min < g.fit_t_max) {
            return Err(Error::Spec(format!(
                "fit window [{}, {}] must sit inside the grid [{}, {}]",
                g.fit_t_min, g.fit_t_max, g.t_min, g.t_max
            )));
        }
        if self.models.families.is_empty() {
            return Err(Error::Spec("models.families must be nonempty".into()));
        }
        if self.models.background_rows == 0 || self.models.explain_rows == 0 {
            return Err(Error::Spec(
                "models.background_rows and models.explain_rows must be >= 1".into(),
            ));
        }
        self.models.space.validate()?;
        if self.splits.kfold_k < 2 {
            return Err(Error::Spec(format!(
                "splits.kfold_k must be >= 2, got {}",
                self.splits.kfold_k
            )));
        }
        if !(0.0..1.0).contains(&self.splits.test_fraction) {
            return Err(Error::Spec(format!(
                "splits.test_fraction must be in [0, 1), got {}",
                self.splits.test_fraction
            )));
        }
        if self.phase.panel_temperatures.is_empty() {
            return Err(Error::Spec("phase.panel_temperatures must be nonempty".into()));
        }
        self.phase.thresholds.validate()?;
        Ok(())
    }

    /// Load and validate a config file. All failures here are usage errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Spec(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("config serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        let json = config.to_json().unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn empty_object_uses_defaults() {
        let config: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>("{\"sneed\": 1}").is_err());
        assert!(
            serde_json::from_str::<PipelineConfig>("{\"grid\": {\"t_mim\": 10}}").is_err()
        );
    }

    #[test]
    fn bad_fit_window_fails_validation() {
        let mut config = PipelineConfig::default();
        config.grid.fit_t_max = 2000.0;
        assert!(matches!(config.validate().unwrap_err(), Error::Spec(_)));
    }

    #[test]
    fn missing_file_is_a_spec_error() {
        let err = PipelineConfig::load(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, Error::Spec(_)));
    }
}
