use std::path::PathBuf;

use kinaug_core::classifier::{FinetuneConfig, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "TRTR")]
    Trtr,
    #[serde(rename = "TATR")]
    Tatr,
    #[serde(rename = "TRTA")]
    Trta,
    #[serde(rename = "TRTR-LOSO")]
    TrtrLoso,
    #[serde(rename = "TRATR-LOSO")]
    TratrLoso,
    #[serde(rename = "TRTR-FT")]
    TrtrFt,
    #[serde(rename = "TRATR-FT")]
    TratrFt,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Trtr,
        Scenario::Tatr,
        Scenario::Trta,
        Scenario::TrtrLoso,
        Scenario::TratrLoso,
        Scenario::TrtrFt,
        Scenario::TratrFt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Trtr => "TRTR",
            Scenario::Tatr => "TATR",
            Scenario::Trta => "TRTA",
            Scenario::TrtrLoso => "TRTR-LOSO",
            Scenario::TratrLoso => "TRATR-LOSO",
            Scenario::TrtrFt => "TRTR-FT",
            Scenario::TratrFt => "TRATR-FT",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
    }

    pub fn is_loso(self) -> bool {
        !matches!(self, Scenario::Trtr | Scenario::Tatr | Scenario::Trta)
    }

    pub fn is_finetune(self) -> bool {
        matches!(self, Scenario::TrtrFt | Scenario::TratrFt)
    }

    /// Scenario whose checkpoints a fine-tuning scenario starts from.
    pub fn baseline(self) -> Scenario {
        match self {
            Scenario::TrtrFt => Scenario::TrtrLoso,
            Scenario::TratrFt => Scenario::TratrLoso,
            s => s,
        }
    }

    pub fn augments_training(self) -> bool {
        matches!(
            self,
            Scenario::Tatr | Scenario::TratrLoso | Scenario::TratrFt
        )
    }

    pub fn trains_on_real(self) -> bool {
        self != Scenario::Tatr
    }

    pub fn augments_test(self) -> bool {
        self == Scenario::Trta
    }

    pub fn needs_augmentation(self) -> bool {
        self.augments_training() || self.augments_test()
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Example counts of the fine-tuning set per held-out subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneCounts {
    /// Real repetitions of the held-out subject, all of one class.
    pub subject_real: usize,
    /// Real repetitions per class from the training subjects (TRTR-FT).
    pub real_per_class: usize,
    /// Augmented repetitions per class the subject did not record (TRATR-FT).
    pub augmented_missing: usize,
    /// Augmented repetitions of the recorded class (TRATR-FT).
    pub augmented_recorded: usize,
}

impl Default for FinetuneCounts {
    fn default() -> Self {
        FinetuneCounts {
            subject_real: 2,
            real_per_class: 2,
            augmented_missing: 8,
            augmented_recorded: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Manifest of the real dataset.
    pub data: PathBuf,
    pub model: Option<String>,
    pub ruleset: Option<String>,
    /// Pre-generated augmented pool; generated per fold when absent.
    pub augmented: Option<PathBuf>,
    /// Split plans to use instead of building them.
    pub splits: Option<PathBuf>,
    /// Output directory of a LOSO run whose checkpoints seed fine-tuning.
    pub baseline: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub sizes: AugmentedSizes,
    pub k: usize,
    pub time_steps: usize,
    /// Attempts per (source, class) slot during per-fold generation.
    pub max_attempts: u32,
    pub network: ModelConfig,
    pub training: TrainConfig,
    pub finetune: FinetuneConfig,
    pub finetune_counts: FinetuneCounts,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk(Scenario::Trtr, PathBuf::new())
    }
}

impl ExperimentConfig {
    /// CPU-sized network and augmented-set sizes.
    pub fn desk(scenario: Scenario, data: PathBuf) -> Self {
        ExperimentConfig {
            scenario,
            data,
            model: None,
            ruleset: None,
            augmented: None,
            splits: None,
            baseline: None,
            out: None,
            sizes: AugmentedSizes {
                train: 300,
                validation: 60,
                test: 60,
            },
            k: 5,
            time_steps: 32,
            max_attempts: 10,
            network: ModelConfig::desk(),
            training: TrainConfig::desk(),
            finetune: FinetuneConfig::desk(),
            finetune_counts: FinetuneCounts::default(),
            seed: 0,
        }
    }

    /// Full network, 256 time steps and 1200/240/240 augmented examples.
    pub fn apply_full_scale(&mut self) {
        self.sizes = AugmentedSizes {
            train: 1200,
            validation: 240,
            test: 240,
        };
        self.time_steps = 256;
        self.max_attempts = 50;
        self.network = ModelConfig::default();
        self.training = TrainConfig {
            seed: self.training.seed,
            ..TrainConfig::default()
        };
        self.finetune = FinetuneConfig {
            seed: self.finetune.seed,
            ..FinetuneConfig::default()
        };
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.data.as_os_str().is_empty() {
            return Err(CliError::Usage(
                "experiment needs a dataset (--data)".into(),
            ));
        }
        if self.k < 2 {
            return Err(CliError::Usage(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.time_steps < 2 {
            return Err(CliError::Usage("time_steps must be at least 2".into()));
        }
        if self.max_attempts == 0 {
            return Err(CliError::Usage("max_attempts must be at least 1".into()));
        }
        let s = self.sizes;
        let needs = match self.scenario {
            Scenario::Tatr => s.train > 0 && s.validation > 0,
            Scenario::Trta => s.test > 0,
            Scenario::TratrLoso => s.train > 0,
            Scenario::TratrFt => {
                let c = self.finetune_counts;
                (s.train > 0 || self.baseline.is_some())
                    && c.augmented_missing + c.augmented_recorded > 0
            }
            _ => true,
        };
        if !needs {
            return Err(CliError::Usage(format!(
                "scenario {} needs nonzero augmented-set sizes",
                self.scenario
            )));
        }
        if self.finetune_counts.subject_real == 0 && self.scenario.is_finetune() {
            return Err(CliError::Usage(
                "fine-tuning needs at least one subject repetition".into(),
            ));
        }
        self.network.validate()?;
        self.training.validate()?;
        self.finetune.validate()?;
        Ok(())
    }
}
