//! Run configuration: one TOML file covering architecture, loss, training
//! recipe, data paths, and evaluation protocol. Unknown keys are rejected so
//! hyperparameter typos fail loudly, and every config round-trips losslessly
//! through `emit` / `parse`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::AugmentConfig;
use crate::eval::EvalMode;
use crate::loss::LossConfig;
use crate::net::NetConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config emit error: {0}")]
    Emit(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which objective drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Focal Tversky plus lambda times focal cross-entropy.
    HybridFocal,
    Focal,
    FocalTversky,
    WeightedCe,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LossKind::HybridFocal => "hybrid-focal",
            LossKind::Focal => "focal",
            LossKind::FocalTversky => "focal-tversky",
            LossKind::WeightedCe => "weighted-ce",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            epochs: 40,
            lr: 1e-4,
            lr_decay: 0.1,
            decay_every: 5,
            weight_decay: 5e-4,
            seed: 0,
            loss: LossKind::HybridFocal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Dataset root with images/ and gt/ subdirectories.
    pub train_dir: PathBuf,
    /// Optional held-out set; when present, a best-validation checkpoint is
    /// tracked alongside the final one.
    pub val_dir: Option<PathBuf>,
    /// Apply the rotation/crop/flip scheme during training.
    pub augment: bool,
    pub augment_cfg: AugmentConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_dir: PathBuf::from("data/train"),
            val_dir: None,
            augment: false,
            augment_cfg: AugmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// Threshold sweep; default is the 99-step 0.01..0.99 grid.
    pub thresholds: Vec<f64>,
    /// Matching tolerance in pixels; absent means 0.0075 x diagonal.
    pub tolerance: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::CEval,
            thresholds: crate::eval::default_thresholds(),
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub net: NetConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn emit(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.net.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.loss.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.train;
        if t.batch_size == 0 || t.epochs == 0 {
            return Err(ConfigError::Invalid("batch_size and epochs must be >= 1".into()));
        }
        if t.lr <= 0.0 || t.lr_decay <= 0.0 || t.decay_every == 0 {
            return Err(ConfigError::Invalid(
                "lr and lr_decay must be > 0, decay_every >= 1".into(),
            ));
        }
        if t.weight_decay < 0.0 {
            return Err(ConfigError::Invalid("weight_decay must be >= 0".into()));
        }
        let e = &self.eval;
        if e.thresholds.len() < 2 {
            return Err(ConfigError::Invalid("at least two eval thresholds required".into()));
        }
        if e.thresholds.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(ConfigError::Invalid("eval thresholds must lie in [0,1]".into()));
        }
        if let Some(tol) = e.tolerance {
            if tol < 0.0 {
                return Err(ConfigError::Invalid("tolerance must be >= 0".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.data.augment_cfg.flip_prob) {
            return Err(ConfigError::Invalid("flip_prob must lie in [0,1]".into()));
        }
        if self.data.augment {
            let factor = 1usize << (self.net.stage_widths.len().saturating_sub(1));
            let (ch, cw) = self.data.augment_cfg.crop_size;
            if ch == 0 || cw == 0 || ch % factor != 0 || cw % factor != 0 {
                return Err(ConfigError::Invalid(format!(
                    "augment crop_size {ch}x{cw} must be a nonzero multiple of the \
                     encoder downsampling factor {factor}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_recipe() {
        let c = RunConfig::default();
        assert_eq!(c.train.batch_size, 8);
        assert_eq!(c.train.epochs, 40);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.train.lr_decay, 0.1);
        assert_eq!(c.train.decay_every, 5);
        assert_eq!(c.train.weight_decay, 5e-4);
        assert_eq!(c.train.loss, LossKind::HybridFocal);
        assert_eq!(c.net.stage_widths, vec![16, 32, 64, 128]);
        assert_eq!(c.eval.thresholds.len(), 99);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.train.seed = 1234;
        c.train.loss = LossKind::WeightedCe;
        c.net.laplacian_path = false;
        c.net.stage_widths = vec![8, 16];
        c.net.branch_dilations = vec![vec![1], vec![1, 2]];
        c.data.val_dir = Some(PathBuf::from("data/val"));
        c.data.augment = true;
        c.eval.mode = EvalMode::SEval;
        c.eval.tolerance = Some(2.0);
        c.eval.thresholds = vec![0.25, 0.5, 0.75];
        let text = c.emit().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected_naming_it() {
        let err = RunConfig::parse("[train]\nbatchsize = 8\n").unwrap_err();
        assert!(err.to_string().contains("batchsize"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for toml in [
            "[train]\nlr = 0.0\n",
            "[train]\nbatch_size = 0\n",
            "[eval]\nthresholds = [0.5]\n",
            "[eval]\ntolerance = -1.0\n",
            "[loss]\nalpha_tv = 0.9\n", // alpha_tv + beta_tv != 1
        ] {
            assert!(RunConfig::parse(toml).is_err(), "{toml}");
        }
    }

    #[test]
    fn loss_kind_spellings() {
        let c = RunConfig::parse("[train]\nloss = \"focal-tversky\"\n").unwrap();
        assert_eq!(c.train.loss, LossKind::FocalTversky);
        assert!(RunConfig::parse("[train]\nloss = \"unknown\"\n").is_err());
    }
}
