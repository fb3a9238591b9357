use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gestalt::TowerConfig;
use crate::harness::scene::{Family, SceneSpec};
use crate::model::ModelConfig;
use crate::region::SlicParams;

/// Everything a training run depends on, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda_closure: f64,
    pub lambda_causal: f64,
    /// Per-trigger masking probability of the pretext objective.
    pub pretext_mask_p: f64,
    pub train_scenes: usize,
    pub eval_scenes: usize,
    pub families: Vec<Family>,
    /// Run a deletion intervention every this many steps (0 disables).
    pub strengthen_every: usize,
    /// Worker threads for data generation and evaluation (0 = all cores).
    pub threads: usize,
    pub scene: SceneSpec,
    pub segmentation: SegmentationConfig,
    pub tower: TowerConfig,
    pub model: ModelConfig,
}

/// Ground-truth region layout of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Side of the square background cells.
    pub background_cell: usize,
    /// Arc length of one path region.
    pub path_chunk: f64,
    /// Superpixel settings for segmenting arbitrary images.
    pub slic: SlicParams,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { background_cell: 8, path_chunk: 6.0, slic: SlicParams::default() }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 8,
            batch_size: 4,
            learning_rate: 1e-3,
            lambda_closure: 0.1,
            lambda_causal: 0.1,
            pretext_mask_p: 0.5,
            train_scenes: 600,
            eval_scenes: 300,
            families: Family::ALL.to_vec(),
            strengthen_every: 50,
            threads: 0,
            scene: SceneSpec::default(),
            segmentation: SegmentationConfig::default(),
            tower: TowerConfig { decay: 0.85, ..TowerConfig::default() },
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.train_scenes == 0 || self.eval_scenes == 0 {
            return bad("epochs, batch_size, train_scenes and eval_scenes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda_closure >= 0.0 && self.lambda_causal >= 0.0) {
            return bad("loss weights must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.pretext_mask_p) {
            return bad("pretext_mask_p must lie in [0, 1]");
        }
        if self.families.is_empty() {
            return bad("at least one question family is required");
        }
        if self.segmentation.background_cell == 0 || !(self.segmentation.path_chunk > 0.0) {
            return bad("segmentation sizes must be positive");
        }
        if self.segmentation.slic.k == 0 || self.segmentation.slic.iters == 0 {
            return bad("segmentation.slic needs k and iters of at least 1");
        }
        self.scene.validate()?;
        self.model.validate()?;
        self.tower.proximity.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.tower.decay > 0.0 && self.tower.decay < 1.0) {
            return bad("tower.decay must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn worker_threads(&self) -> usize {
        if self.threads > 0 {
            self.threads
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}
