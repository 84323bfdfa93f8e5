//! Experiment orchestration: dataset generation, model training, Monte-Carlo
//! BER sweeps and the classifier structure search.
//!
//! Everything is driven by one [`ExperimentConfig`] and its master seed.
//! Sub-streams are split off with [`derive_seed`] so that, for example, the
//! test split never shares draws with the training split, and every sweep
//! trial owns the generator `trial_rng(sweep_seed, trial)`.

mod dataset;
mod structure;
mod sweep;
mod train;

pub use dataset::{generate_dataset, generate_split, read_dataset, write_dataset, Dataset, SymbolSet};
pub use structure::{run_structure_search, structure_csv, write_structure_csv, StructureRow, STRUCTURE_CSV_HEADER};
pub use sweep::{
    ber_confidence_halfwidth, run_ber_sweep, sweep_csv, write_sweep_csv, BerRecord, Sweep, SWEEP_CSV_HEADER,
};
pub use train::{classifier_features, train_classifier, train_denoiser, TrainedModels};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::DistributionSpec;
use crate::dbn::{DenoiseConfig, FineTuneConfig};
use crate::error::{ensure, Error, Result};
use crate::io::{self, ArtifactMeta};
use crate::pixelizer::{Resolution, DEFAULT_RESOLUTIONS};
use crate::rbm::TrainConfig;
use crate::receiver::{Method, NormScope, RxConfig};
use crate::rng::derive_seed;
use crate::waveforms::{FrameConfig, ModSpec};

/// Salts for [`ExperimentConfig::sub_seed`], one per independent stream.
pub mod salt {
    pub const TRAIN: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const TEST: u64 = 3;
    pub const DENOISE_TRAINING: u64 = 4;
    pub const CLASSIFIER_TRAINING: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const STRUCTURE: u64 = 7;
    pub const TRANSMIT: u64 = 8;
    pub const CHANNEL: u64 = 9;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AwgnDenoise,
    MultipathDenoise,
    DopplerDenoise,
    ClassifyAwgn,
    Overall,
}

/// How the sweep finds the payload of each received frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMode {
    /// Use the simulator's knowledge of frame position and direct-path
    /// Doppler.
    Genie,
    /// Detect the pilots and estimate Doppler from them.
    Pilot,
}

/// Fractions of the generated symbols assigned to each split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split {
            train: 0.5,
            validation: 0.2,
            test: 0.3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPaths {
    pub denoise: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureSearchConfig {
    /// Hidden-layer sizes of each candidate; the input size is implied.
    pub structures: Vec<Vec<usize>>,
    /// Pre-training and fine-tuning epochs for each run.
    pub epoch_budgets: Vec<usize>,
    pub ebno_db: f64,
    /// Independent repetitions; each derives its own data and weights.
    pub repeats: usize,
}

impl Default for StructureSearchConfig {
    fn default() -> Self {
        StructureSearchConfig {
            structures: vec![vec![64, 16], vec![128, 32]],
            epoch_budgets: vec![1, 20],
            ebno_db: 0.0,
            repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub modulation: ModSpec,
    pub frame: FrameConfig,
    pub channel: DistributionSpec,
    /// Symbols generated across all three splits.
    pub dataset_symbols: usize,
    pub split: Split,
    /// Symbols per channel realization when generating datasets.
    pub burst_symbols: usize,
    /// Eb/No values cycled over the bursts of the training and validation
    /// splits.
    pub train_ebno_db: Vec<f64>,
    /// Eb/No of the test split and of the sweep grid.
    pub ebno_grid_db: Vec<f64>,
    /// Undo the direct path's time scaling when slicing dataset symbols.
    pub genie_compensation: bool,
    pub resolutions: Vec<Resolution>,
    pub normalization: NormScope,
    pub rbm: TrainConfig,
    pub denoise: DenoiseConfig,
    pub fine_tune: FineTuneConfig,
    pub denoise_preset: String,
    pub classify_preset: String,
    /// Feed the classifier de-noised reconstructions rather than the
    /// normalized received symbols.
    pub classify_on_denoised: bool,
    pub methods: Vec<Method>,
    pub sync: SyncMode,
    pub detection_threshold: f64,
    /// Noncoherent pilot correlation block, seconds.
    pub pilot_block_s: Option<f64>,
    pub doppler_compensation: bool,
    /// Minimum frames per sweep point.
    pub trials: usize,
    /// Keep adding frames until the BER confidence target is met.
    pub auto_extend: bool,
    pub max_bits: usize,
    /// Silence ahead of each frame is uniform on `[0, max_lead_in]` samples.
    pub max_lead_in: usize,
    pub models: ModelPaths,
    pub structure: StructureSearchConfig,
    /// Write zero wall times so output files are byte-identical across runs.
    pub reproducible: bool,
}

impl ExperimentConfig {
    /// Defaults for each experiment kind, at desk scale.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let modulation = ModSpec::default();
        let fs = modulation.fs_hz;
        let base = ExperimentConfig {
            kind,
            seed: 1,
            modulation,
            frame: FrameConfig::default(),
            channel: DistributionSpec::awgn(),
            dataset_symbols: 10_000,
            split: Split::default(),
            burst_symbols: 1,
            train_ebno_db: vec![-10.0, -5.0, 0.0],
            ebno_grid_db: vec![-10.0, -5.0, 0.0],
            genie_compensation: false,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            normalization: NormScope::Symbol,
            rbm: TrainConfig::default(),
            denoise: DenoiseConfig::default(),
            fine_tune: FineTuneConfig::default(),
            denoise_preset: "desk-denoise".into(),
            classify_preset: "desk-classify".into(),
            classify_on_denoised: true,
            methods: vec![Method::Mle, Method::DbnDenoiseMle],
            sync: SyncMode::Genie,
            detection_threshold: 0.1,
            pilot_block_s: None,
            doppler_compensation: false,
            trials: 20,
            auto_extend: true,
            max_bits: 1_000_000,
            max_lead_in: 400,
            models: ModelPaths::default(),
            structure: StructureSearchConfig::default(),
            reproducible: false,
        };
        match kind {
            ExperimentKind::AwgnDenoise => base,
            ExperimentKind::MultipathDenoise => ExperimentConfig {
                channel: DistributionSpec::multipath(fs),
                ..base
            },
            ExperimentKind::DopplerDenoise => ExperimentConfig {
                channel: DistributionSpec::doppler(vec![0.9, 1.0, 1.1]),
                methods: vec![Method::Mle, Method::MleDopplerSync, Method::DbnDenoiseMle],
                ..base
            },
            ExperimentKind::ClassifyAwgn => ExperimentConfig {
                train_ebno_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
                ebno_grid_db: vec![0.0, 4.0, 8.0, 10.0],
                classify_on_denoised: false,
                methods: vec![Method::Mle, Method::DbnFull],
                ..base
            },
            ExperimentKind::Overall => ExperimentConfig {
                channel: DistributionSpec::overall(fs),
                train_ebno_db: vec![0.0, 5.0, 10.0, 15.0],
                ebno_grid_db: vec![5.0, 10.0],
                genie_compensation: true,
                // the higher default rate leaves most hidden units stuck on
                // these 875-pixel frames
                rbm: TrainConfig {
                    learning_rate: 0.01,
                    epochs: 30,
                    ..TrainConfig::default()
                },
                methods: vec![Method::Mle, Method::MleDopplerSync, Method::DbnFull],
                // path phases are redrawn every 0.5-1 ms
                pilot_block_s: Some(0.001),
                doppler_compensation: true,
                trials: 50,
                auto_extend: false,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        self.channel.validate()?;
        self.rbm.validate()?;
        self.fine_tune.validate()?;
        let layout = self.frame.layout(self.modulation.fs_hz)?;
        layout.check_payload(&self.modulation)?;
        let s = &self.split;
        ensure!(
            [s.train, s.validation, s.test].iter().all(|f| *f >= 0.0)
                && (s.train + s.validation + s.test - 1.0).abs() < 1e-9,
            Config,
            "split fractions must be non-negative and sum to 1"
        );
        ensure!(self.dataset_symbols >= 1, Config, "dataset_symbols must be positive");
        ensure!(self.burst_symbols >= 1, Config, "burst_symbols must be positive");
        ensure!(!self.train_ebno_db.is_empty(), Config, "train_ebno_db is empty");
        ensure!(!self.ebno_grid_db.is_empty(), Config, "ebno_grid_db is empty");
        ensure!(self.trials >= 1, Config, "trials must be at least 1");
        ensure!(!self.resolutions.is_empty(), Config, "resolutions is empty");
        ensure!(
            self.resolutions[0].decimation == 1,
            Config,
            "the first resolution must be undecimated"
        );
        ensure!(
            self.detection_threshold > 0.0 && self.detection_threshold < 1.0,
            Config,
            "detection_threshold must lie in (0, 1)"
        );
        Ok(())
    }

    /// Receiver settings implied by this experiment.
    pub fn rx_config(&self, method: Method) -> RxConfig {
        RxConfig {
            modulation: self.modulation,
            frame: self.frame,
            method,
            detection_threshold: self.detection_threshold,
            pilot_block_s: self.pilot_block_s,
            doppler_compensation: self.doppler_compensation,
            normalization: self.normalization,
            resolutions: self.resolutions.clone(),
            denoise_model: self.models.denoise.clone(),
            classifier_model: self.models.classifier.clone(),
        }
    }

    /// Symbols in each split, in train/validation/test order.
    pub fn split_sizes(&self) -> [usize; 3] {
        let n = self.dataset_symbols as f64;
        let train = (n * self.split.train).round() as usize;
        let val = (n * self.split.validation).round() as usize;
        [train, val, self.dataset_symbols.saturating_sub(train + val)]
    }

    pub fn sub_seed(&self, salt: u64) -> u64 {
        derive_seed(self.seed, salt)
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        io::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn artifact_meta(&self, git_revision: &str) -> ArtifactMeta {
        ArtifactMeta::new(git_revision, &self.hash(), self.seed)
    }

    /// Parses a JSON document: `kind` selects the defaults and the remaining
    /// fields override them, recursively for nested objects.
    pub fn from_json_value(v: Value) -> Result<Self> {
        let kind_value = v
            .get("kind")
            .cloned()
            .ok_or_else(|| Error::Config("experiment config needs a \"kind\" field".into()))?;
        let kind: ExperimentKind =
            serde_json::from_value(kind_value).map_err(|e| Error::Config(format!("bad experiment kind: {e}")))?;
        let mut merged = serde_json::to_value(Self::for_kind(kind)).expect("config serializes");
        merge(&mut merged, v);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let v: Value = io::read_json(path)?;
        Self::from_json_value(v).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn presets_validate() {
        for kind in [
            ExperimentKind::AwgnDenoise,
            ExperimentKind::MultipathDenoise,
            ExperimentKind::DopplerDenoise,
            ExperimentKind::ClassifyAwgn,
            ExperimentKind::Overall,
        ] {
            ExperimentConfig::for_kind(kind).validate().unwrap();
        }
    }

    #[test]
    fn json_overrides_nested_fields() {
        let cfg = ExperimentConfig::from_json_value(json!({
            "kind": "overall",
            "seed": 9,
            "rbm": {"epochs": 3},
            "frame": {"payload_bits": 40}
        }))
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.rbm.epochs, 3);
        assert_eq!(cfg.rbm.batch_size, 32);
        assert_eq!(cfg.frame.payload_bits, 40);
        assert_eq!(cfg.frame.guard_s, 0.01);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_json_value(json!({"seed": 1})).is_err());
        assert!(ExperimentConfig::from_json_value(json!({"kind": "nope"})).is_err());
        assert!(ExperimentConfig::from_json_value(json!({
            "kind": "awgn-denoise",
            "split": {"train": 0.5, "validation": 0.5, "test": 0.5}
        }))
        .is_err());
    }

    #[test]
    fn split_sizes_cover_dataset() {
        let cfg = ExperimentConfig::for_kind(ExperimentKind::AwgnDenoise);
        assert_eq!(cfg.split_sizes(), [5000, 2000, 3000]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::for_kind(ExperimentKind::AwgnDenoise);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
