//! Run configuration: a TOML file with one section per component, overridden
//! by command-line flags. The resolved value is written into every output
//! directory as `config.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use evtae::eval::{ExperimentConfig, SplitConfig};
use evtae::losses::LossWeights;
use evtae::model::TaeConfig;
use evtae::pipeline::Preprocessor;
use evtae::synth::SynthConfig;
use evtae::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Registered window scorer used for calibration and detection.
    pub scorer: String,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub tae: TaeConfig,
    pub preprocess: Preprocessor,
    pub split: SplitConfig,
    pub ablation: Ablation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scorer: "squared-error".into(),
            paths: Paths::default(),
            synth: SynthConfig::default(),
            tae: TaeConfig::default(),
            preprocess: Preprocessor::default(),
            split: SplitConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    1.0
}

impl GridEntry {
    pub fn new(weights: LossWeights, gamma: f64) -> Self {
        Self {
            lambda1: weights.lambda1,
            lambda2: weights.lambda2,
            lambda3: weights.lambda3,
            gamma,
        }
    }

    pub fn weights(&self) -> evtae::Result<LossWeights> {
        LossWeights::new(self.lambda1, self.lambda2, self.lambda3)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub grid: Vec<GridEntry>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> evtae::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// One seed drives generation, the split and model initialization.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.split.seed = seed;
        self.tae.seed = seed;
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            tae: self.tae.clone(),
            preprocess: self.preprocess,
            split: self.split.clone(),
            scorer: self.scorer.clone(),
        }
    }

    pub fn to_toml(&self) -> evtae::Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Writes the resolved configuration as `dir/config.toml`.
    pub fn write_snapshot(&self, dir: &Path) -> evtae::Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = dir.join("config.toml");
        fs::write(&path, self.to_toml()?).map_err(|e| Error::Io { path, source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.ablation.grid = LossWeights::ablation_grid()
            .into_iter()
            .map(|w| GridEntry::new(w, 1.0))
            .collect();
        cfg.paths.data = Some("dataset.csv".into());
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("[tae]\nepochs = 3\n[synth]\nn_ev = 5\n").unwrap();
        assert_eq!(cfg.tae.epochs, 3);
        assert_eq!(cfg.tae.window_length, 168);
        assert_eq!(cfg.synth.n_ev, 5);
        assert_eq!(cfg.synth.n_non_ev, 1106);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[tae]\nepoch = 3\n").is_err());
    }
}
